import csv
import io
import json

import pytest

from qlift.cli import EXIT_CAPACITY, EXIT_CONFIG, EXIT_OK, ExperimentConfig, main, run_suite, validate_config


def strip_timing(text):
    d = json.loads(text)
    d.pop("timing")
    return json.dumps(d, sort_keys=True)


def run_cli(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_validate_defaults_seed():
    cfg = validate_config('{"suite": "p-of-r", "relation": "k-collision", "N": 4, "k": 2}')
    assert isinstance(cfg, ExperimentConfig)
    assert cfg.seed == 0 and any("seed" in n for n in cfg.notes)
    assert "seed" in cfg.echo()


@pytest.mark.parametrize("raw,needle", [
    ('{"suite": "verify-lift", "M": 2, "k": 3}', "distinct k-tuples require k <= M"),
    ('{"suite": "game-value", "relation": "inversion", "trials": -5}', "trials"),
    ('{"suite": "bogus"}', "suite"),
    ('{"suite": "p-of-r", "relation": "k-collision", "M": "two"}', "M: expected an integer"),
    ('{"suite": "p-of-r", "relation": "k-collision", "extra": 1}', "extra: unknown field"),
    ('{"suite": "p-of-r"}', "relation"),
    ('not json', "invalid JSON"),
    ('{"suite": "verify-lift", "adversary": ["wizard"]}', "adversary[0]"),
    ('{"suite": "p-of-r", "relation": "k-collision", "format": "csv"}', "csv"),
])
def test_validate_diagnostics(raw, needle):
    diags = validate_config(raw)
    assert isinstance(diags, list)
    assert any(needle in d for d in diags), diags


def test_p_of_r_suite(capsys):
    code, out, _ = run_cli(["p-of-r", "--relation", "k-collision", "--N", "4", "--k", "2"], capsys)
    assert code == EXIT_OK
    report = json.loads(out)
    assert report["results"][0]["value"] == 0.25
    assert report["results"][0]["exact"] == "1/4"
    assert report["all_inequalities_hold"] is True
    assert set(report) >= {"version", "tolerances", "config", "timing"}


def test_verify_lift_suite(capsys):
    code, out, _ = run_cli(["verify-lift", "--M", "3", "--N", "2", "--k", "1", "--q", "2",
                            "--adversary", "random:7"], capsys)
    assert code == EXIT_OK
    report = json.loads(out)
    assert len(report["results"]) == 8 * 8 * 3
    assert all(r["holds"] for r in report["results"])
    assert report["all_inequalities_hold"]


def test_verify_lift_sampled_triples(capsys):
    code, out, _ = run_cli(["verify-lift", "--M", "4", "--k", "2", "--q", "1", "--trials", "3",
                            "--adversary", "random", "--adversary", "guess:0,1"], capsys)
    assert code == EXIT_OK
    assert len(json.loads(out)["results"]) == 6


def test_bounds_table_csv(capsys, tmp_path):
    path = tmp_path / "bounds.csv"
    code, out, _ = run_cli(["bounds-table", "--format", "csv", "--qs", "0,1", "--ks", "1,2",
                            "--Ns", "2", "--out", str(path)], capsys)
    assert code == EXIT_OK and out == ""
    rows = list(csv.DictReader(io.StringIO(path.read_text())))
    assert len(rows) == 2 * 2 * 5
    assert {r["name"] for r in rows} == {"loss_factor", "yz_loss", "inversion", "k-collision", "k-search-zero"}


def test_bounds_table_json_holds(capsys):
    code, out, _ = run_cli(["bounds-table", "--qs", "0,5", "--ks", "1,4", "--Ns", "2,256"], capsys)
    assert code == EXIT_OK and json.loads(out)["all_inequalities_hold"]


def test_compare_losses(capsys):
    code, out, _ = run_cli(["compare-losses", "--qs", "100", "--ks", "4"], capsys)
    r = json.loads(out)["results"][0]
    assert code == EXIT_OK and 288 <= r["ratio"] <= 1152


def test_game_value_suite(capsys):
    code, out, _ = run_cli(["game-value", "--relation", "k-search-zero", "--M", "2", "--N", "2",
                            "--q", "1", "--adversary", "classical:" + json.dumps(
                                {"query": 0, "children": {"0": {"output": [0]}, "1": {"output": [1]}}})],
                           capsys)
    assert code == EXIT_OK
    row = json.loads(out)["results"][0]
    assert row["value"] == pytest.approx(0.75)
    assert row["lifted_adversary"]["holds"]


def test_uniform_images_suite(capsys):
    code, out, _ = run_cli(["uniform-images", "--M", "2", "--q", "1", "--adversary", "random:1"], capsys)
    assert code == EXIT_OK
    assert json.loads(out)["results"][0]["deviation"] <= 1e-9


def test_classical_mr_suite(capsys):
    code, out, _ = run_cli(["classical-mr", "--M", "2", "--q", "1", "--trials", "2000",
                            "--adversary", "random:3"], capsys)
    assert code == EXIT_OK
    row = json.loads(out)["results"][0]
    assert abs(row["estimate"]["mean"] - row["exact"]) <= 3 * row["estimate"]["stderr"] + 1e-12


def test_invalid_config_exit(capsys):
    code, _, err = run_cli(["verify-lift", "--M", "2", "--k", "3"], capsys)
    assert code == EXIT_CONFIG and "k <= M" in err


def test_config_file_overrides_flags(capsys, tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"N": 4, "k": 2, "relation": "k-collision"}))
    code, out, _ = run_cli(["p-of-r", "--N", "2", "--relation", "k-search-zero", "--config", str(path)], capsys)
    assert code == EXIT_OK
    assert json.loads(out)["results"][0]["value"] == 0.25


def test_capacity_exit(capsys):
    code, _, err = run_cli(["verify-lift", "--M", "3", "--q", "1", "--state-budget", "4"], capsys)
    assert code == EXIT_CAPACITY and "state budget" in err


def test_failing_inequality_sets_exit_status(monkeypatch):
    import qlift.cli as cli
    monkeypatch.setitem(cli.RUNNERS, "p-of-r", lambda cfg: ([{"holds": False}], False))
    cfg = validate_config({"suite": "p-of-r", "relation": "k-collision"})
    code, text = run_suite(cfg)
    assert code == 1 and json.loads(text)["all_inequalities_hold"] is False


def test_reports_are_deterministic():
    raw = {"suite": "verify-lift", "M": 2, "N": 2, "k": 1, "q": 1, "seed": 3, "adversary": ["random"]}
    a = run_suite(validate_config(raw))[1]
    b = run_suite(validate_config(raw))[1]
    assert strip_timing(a) == strip_timing(b)
