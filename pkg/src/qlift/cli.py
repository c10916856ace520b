"""Command-line batch runner: ``qlift <suite> [flags]``.

Every suite writes one JSON report (or CSV for tabular suites). The exit
status is 0 exactly when every asserted inequality in the report holds,
1 when one fails, 2 for an invalid configuration and 3 when a budget is
exceeded.

Randomness flows from the single top-level ``seed``: each component draws
from ``SeedSequence(seed, spawn_key=(crc32(label),))`` where ``label`` names
the component (e.g. ``"adversary/0"`` or ``"triples"``).
"""
from __future__ import annotations

import argparse
import itertools
import json
import sys
import time
import zlib
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import __version__
from .adversary import classical_strategy, grover_search, guess_adversary, random_circuit, wrap_with_readout
from .bounds import (bounds_table, compare_losses, named_relation, p_of_r_exact, p_of_r_mc,
                     stirling_chain, to_csv, yz_loss)
from .constants import BRANCH_CAP, ENUMERATION_BUDGET, STATE_DIM_BUDGET, tolerances
from .errors import CapacityError, QliftError
from .games import GAMES, game_value_mc, lifted_adversary_check, lifting_check, named_game
from .oracle import distinct_tuples, enumerate_oracles, oracle_count, sample_oracle
from .reprogram import (classical_mr_direct, classical_mr_exact, classical_mr_sample, coherent_sim_exact,
                        uniform_images_check)
from .statevec import Predicate, true_predicate

SUITES = ("verify-lift", "uniform-images", "game-value", "bounds-table", "p-of-r",
          "compare-losses", "classical-mr")
TABULAR = ("bounds-table", "compare-losses")
PREDICATES = ("true",) + tuple(GAMES)

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_CAPACITY = 0, 1, 2, 3


@dataclass
class ExperimentConfig:
    suite: str
    M: int = 2
    N: int = 2
    k: int = 1
    q: int = 1
    g: int = 1
    K: int = 1
    S: int = 1
    trials: int | None = None
    seed: int = 0
    adversary: list = field(default_factory=list)
    relation: str = "true"
    qs: list = field(default_factory=lambda: list(range(0, 11)))
    ks: list = field(default_factory=lambda: [1, 2, 3, 4])
    Ns: list = field(default_factory=lambda: [2, 4, 16, 256])
    enumeration_budget: int = ENUMERATION_BUDGET
    state_budget: int = STATE_DIM_BUDGET
    branch_cap: int = BRANCH_CAP
    out: str | None = None
    format: str = "json"
    notes: list = field(default_factory=list)

    def echo(self) -> dict:
        d = asdict(self)
        d.pop("out")
        return d


INT_FIELDS = ("M", "N", "k", "q", "g", "K", "S", "seed", "enumeration_budget", "state_budget", "branch_cap")


def validate_config(raw) -> ExperimentConfig | list[str]:
    """Resolve a JSON document (text or dict) into a config, or return diagnostics."""
    diags: list[str] = []
    if isinstance(raw, (str, bytes)):
        try:
            raw = json.loads(raw)
        except json.JSONDecodeError as exc:
            return [f"<root>: invalid JSON ({exc})"]
    if not isinstance(raw, dict):
        return ["<root>: expected a JSON object"]
    data = {k: v for k, v in raw.items() if v is not None}
    known = set(ExperimentConfig.__dataclass_fields__) - {"notes"}
    for key in sorted(set(data) - known):
        diags.append(f"{key}: unknown field")
    suite = data.get("suite")
    if suite not in SUITES:
        diags.append(f"suite: must be one of {', '.join(SUITES)}, got {suite!r}")
    for key in INT_FIELDS:
        if key in data and (isinstance(data[key], bool) or not isinstance(data[key], int)):
            diags.append(f"{key}: expected an integer, got {data[key]!r}")
    if diags:
        return diags
    notes = []
    if "seed" not in data:
        notes.append("seed: not given, default 0 used")
    cfg = ExperimentConfig(**{k: v for k, v in data.items() if k in known})
    cfg.notes = notes
    if isinstance(cfg.adversary, (str, dict)):
        cfg.adversary = [cfg.adversary]
    for key in ("M", "N", "k", "g", "K", "S"):
        if getattr(cfg, key) < 1:
            diags.append(f"{key}: must be >= 1, got {getattr(cfg, key)}")
    if cfg.q < 0:
        diags.append(f"q: must be >= 0, got {cfg.q}")
    if cfg.seed < 0:
        diags.append(f"seed: must be >= 0, got {cfg.seed}")
    if cfg.trials is not None and (isinstance(cfg.trials, bool) or not isinstance(cfg.trials, int)
                                   or cfg.trials < 1):
        diags.append(f"trials: must be a positive integer, got {cfg.trials!r}")
    if cfg.suite in ("verify-lift", "uniform-images", "game-value", "classical-mr") and cfg.k > cfg.M:
        diags.append(f"k: distinct k-tuples require k <= M (k={cfg.k}, M={cfg.M})")
    if cfg.relation not in PREDICATES:
        diags.append(f"relation: must be one of {', '.join(PREDICATES)}, got {cfg.relation!r}")
    if cfg.suite in ("p-of-r", "game-value") and cfg.relation == "true":
        diags.append(f"relation: suite {cfg.suite} needs a named relation")
    if cfg.format not in ("json", "csv"):
        diags.append(f"format: must be json or csv, got {cfg.format!r}")
    elif cfg.format == "csv" and cfg.suite not in TABULAR:
        diags.append(f"format: csv is only available for {', '.join(TABULAR)}")
    for key in ("qs", "ks", "Ns"):
        vals = getattr(cfg, key)
        if not isinstance(vals, list) or not vals or not all(isinstance(v, int) for v in vals):
            diags.append(f"{key}: expected a nonempty list of integers")
    for i, spec in enumerate(cfg.adversary):
        try:
            _parse_adversary_spec(spec)
        except ValueError as exc:
            diags.append(f"adversary[{i}]: {exc}")
    return diags if diags else cfg


# ---------------------------------------------------------------------------
# seeds and adversaries


def derive_seed(seed: int, label: str) -> np.random.SeedSequence:
    return np.random.SeedSequence(seed, spawn_key=(zlib.crc32(label.encode()),))


def _parse_adversary_spec(spec) -> dict:
    if isinstance(spec, dict):
        out = dict(spec)
    elif isinstance(spec, str):
        kind, _, arg = spec.partition(":")
        out = {"type": kind}
        if kind == "random" and arg:
            out["seed"] = int(arg)
        elif kind == "guess":
            out["xs"] = [int(v) for v in arg.split(",") if v]
        elif kind == "grover":
            out["iterations"] = int(arg or 1)
        elif kind == "classical":
            out["tree"] = json.loads(arg)
    else:
        raise ValueError(f"cannot parse {spec!r}")
    if out.get("type") not in ("random", "guess", "grover", "classical"):
        raise ValueError(f"unknown adversary type {out.get('type')!r}")
    return out


def build_adversary(spec, cfg: ExperimentConfig, index: int):
    spec = _parse_adversary_spec(spec)
    kind = spec["type"]
    if kind == "random":
        seed = spec.get("seed")
        seed = derive_seed(cfg.seed, f"adversary/{index}") if seed is None else seed
        adv = random_circuit(seed, cfg.q, cfg.M, cfg.N, k=cfg.k, work_dim=int(spec.get("work_dim", 1)))
        return adv, spec | {"seed": spec.get("seed", f"derived:adversary/{index}")}
    if kind == "guess":
        xs = spec.get("xs") or list(range(cfg.k))
        return guess_adversary(cfg.M, cfg.N, xs, q=cfg.q), spec | {"xs": xs}
    if kind == "grover":
        return grover_search(cfg.M, cfg.N, int(spec.get("iterations", 1))), spec
    return classical_strategy(spec["tree"], cfg.M, cfg.N, q=spec.get("q")), spec


def _adversaries(cfg: ExperimentConfig):
    specs = cfg.adversary or ["random"]
    return [build_adversary(s, cfg, i) for i, s in enumerate(specs)]


def _check_state(adv, cfg: ExperimentConfig, control_capacity: int = 0) -> None:
    dim = adv.layout(control_capacity).dim
    if dim > cfg.state_budget:
        raise CapacityError(f"state dimension {dim} exceeds state budget {cfg.state_budget}")


def _predicate(name: str, N: int, k: int) -> Predicate:
    if name == "true":
        return true_predicate(k)
    R = named_relation(name, N, k)

    def check(xs, ys, z, H):
        return len(set(xs)) == len(xs) and R.member(tuple(ys))
    return Predicate(k, check, name)


# ---------------------------------------------------------------------------
# suites


def suite_verify_lift(cfg: ExperimentConfig) -> tuple[list, bool]:
    V = _predicate(cfg.relation, cfg.N, cfg.k)
    tables = oracle_count(cfg.M, cfg.N)
    tuples = list(distinct_tuples(cfg.M, cfg.k))
    n_triples = tables ** 2 * len(tuples)
    results, ok = [], True
    if n_triples <= cfg.enumeration_budget and cfg.trials is None:
        oracles = list(enumerate_oracles(cfg.M, cfg.N, cfg.enumeration_budget))
        triples = [(H, G, x) for H in oracles for G in oracles for x in tuples]
        mode = "enumerate"
    else:
        rng = np.random.default_rng(derive_seed(cfg.seed, "triples"))
        triples = [(sample_oracle(cfg.M, cfg.N, rng), sample_oracle(cfg.M, cfg.N, rng),
                    tuples[int(rng.integers(len(tuples)))]) for _ in range(cfg.trials or 20)]
        mode = "sample"
    for adv, spec in _adversaries(cfg):
        wrapped = wrap_with_readout(adv, cfg.k)
        _check_state(wrapped, cfg, cfg.k)
        for H, G, x in triples:
            r = coherent_sim_exact(wrapped, H, G, x, V, cap=cfg.branch_cap)
            row = r.to_dict()
            row["config"]["adversary"] = spec
            row["mode"] = mode
            results.append(row)
            ok &= r.holds
    return results, ok


def suite_uniform_images(cfg: ExperimentConfig) -> tuple[list, bool]:
    family = []
    for adv, _ in _adversaries(cfg):
        wrapped = wrap_with_readout(adv, cfg.k)
        _check_state(wrapped, cfg, cfg.k)
        family.append(wrapped)
    q = family[0].q
    dev = uniform_images_check(cfg.M, cfg.N, cfg.k, q, family, budget=cfg.enumeration_budget)
    # exact uniformity is only claimed for a single intercepted query
    asserted = cfg.k == 1
    holds = dev <= 1e-9
    return [{"name": "uniform_images", "M": cfg.M, "N": cfg.N, "k": cfg.k, "q": q,
             "deviation": dev, "asserted": asserted, "holds": holds}], (holds or not asserted)


def suite_game_value(cfg: ExperimentConfig) -> tuple[list, bool]:
    game = named_game(cfg.relation, cfg.M, cfg.N, cfg.k)
    results, ok = [], True
    for adv, spec in _adversaries(cfg):
        _check_state(adv, cfg)
        row = {"adversary": spec, "game": game.name}
        if cfg.trials is not None:
            row["estimate"] = game_value_mc(game, adv, cfg.trials, derive_seed(cfg.seed, "game-mc")).to_dict()
        if oracle_count(cfg.M, cfg.N) <= cfg.enumeration_budget:
            check = lifting_check(game, adv)
            row.update(check)
            ok &= check["holds"]
            if oracle_count(cfg.M, cfg.N) ** 2 <= cfg.enumeration_budget:
                lifted = lifted_adversary_check(game, adv, cfg.enumeration_budget)
                row["lifted_adversary"] = lifted
                ok &= lifted["holds"]
        elif cfg.trials is None:
            raise CapacityError(f"N^M = {oracle_count(cfg.M, cfg.N)} exceeds enumeration budget "
                                f"{cfg.enumeration_budget}; pass trials for a Monte-Carlo estimate")
        results.append(row)
    return results, ok


def suite_bounds_table(cfg: ExperimentConfig) -> tuple[list, bool]:
    rows = bounds_table(cfg.qs, cfg.ks, cfg.Ns)
    ok = True
    checks = []
    for q, k, N in itertools.product(cfg.qs, cfg.ks, cfg.Ns):
        chain = stirling_chain(q, k, N)
        holds = all(c["holds"] for c in chain.values())
        ok &= holds
        checks.append({"q": q, "k": k, "N": N, "stirling_chain_holds": holds})
    return [r.to_dict() for r in rows] + checks, ok, rows


def suite_p_of_r(cfg: ExperimentConfig) -> tuple[list, bool]:
    R = named_relation(cfg.relation, cfg.N, cfg.k)
    if cfg.trials is not None:
        est = p_of_r_mc(R, cfg.trials, derive_seed(cfg.seed, "p-of-r"))
        return [{"relation": R.name, "N": cfg.N, "k": cfg.k, "estimate": est.to_dict()}], True
    p = p_of_r_exact(R)
    return [{"relation": R.name, "N": cfg.N, "k": cfg.k, "value": float(p), "exact": str(p)}], True


def suite_compare_losses(cfg: ExperimentConfig) -> tuple[list, bool]:
    rows = [compare_losses(q, k) for k in cfg.ks for q in cfg.qs]
    return rows, True


def suite_classical_mr(cfg: ExperimentConfig) -> tuple[list, bool]:
    rng = np.random.default_rng(derive_seed(cfg.seed, "classical-mr"))
    H = sample_oracle(cfg.M, cfg.N, rng)
    y = tuple(int(v) for v in rng.integers(0, cfg.N, size=cfg.k))
    x_star = tuple(int(v) for v in rng.choice(cfg.M, size=cfg.k, replace=False))
    V = _predicate(cfg.relation, cfg.N, cfg.k)
    trials = cfg.trials or 100_000
    results, ok = [], True
    for i, (adv, spec) in enumerate(_adversaries(cfg)):
        _check_state(adv, cfg)
        est = classical_mr_sample(adv, H, y, trials, derive_seed(cfg.seed, f"classical-mr/{i}"), V, x_star)
        direct = classical_mr_direct(adv, H, y, x_star, V)
        loss = yz_loss(adv.q, cfg.k)
        holds = est.mean * loss >= direct - 3 * est.stderr * loss
        row = {"adversary": spec, "H": list(H.values), "y_target": list(y), "x_star": list(x_star),
               "estimate": est.to_dict(), "direct": direct, "yz_loss": loss, "holds": holds}
        if adv.q <= 2:
            row["exact"] = classical_mr_exact(adv, H, y, x_star, V)
        results.append(row)
        ok &= holds
    return results, ok


RUNNERS = {
    "verify-lift": suite_verify_lift,
    "uniform-images": suite_uniform_images,
    "game-value": suite_game_value,
    "bounds-table": suite_bounds_table,
    "p-of-r": suite_p_of_r,
    "compare-losses": suite_compare_losses,
    "classical-mr": suite_classical_mr,
}


def _compare_csv(rows: list) -> str:
    import csv
    import io
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("q", "k", "loss_factor", "yz_loss", "ratio", "reference"))
    for r in rows:
        w.writerow((r["q"], r["k"], r["loss_factor"], r["yz_loss"], repr(r["ratio"]), r["reference"]))
    return buf.getvalue()


def run_suite(cfg: ExperimentConfig) -> tuple[int, str]:
    """Run one suite; returns ``(exit status, report text)``."""
    start = time.perf_counter()
    try:
        out = RUNNERS[cfg.suite](cfg)
    except CapacityError as exc:
        return EXIT_CAPACITY, json.dumps({"error": "capacity", "message": str(exc)}, sort_keys=True)
    except (QliftError, ValueError) as exc:
        return EXIT_CONFIG, json.dumps({"error": "invalid", "message": str(exc)}, sort_keys=True)
    results, ok = out[0], out[1]
    status = EXIT_OK if ok else EXIT_FAIL
    if cfg.format == "csv":
        text = to_csv(out[2]) if cfg.suite == "bounds-table" else _compare_csv(results)
        return status, text
    report = {
        "suite": cfg.suite,
        "version": __version__,
        "config": cfg.echo(),
        "tolerances": tolerances(),
        "results": results,
        "all_inequalities_hold": bool(ok),
        "timing": {"wall_seconds": time.perf_counter() - start},
    }
    return status, json.dumps(report, sort_keys=True, indent=2, default=_default)


def _default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.random.SeedSequence):
        return {"entropy": obj.entropy, "spawn_key": list(obj.spawn_key)}
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qlift", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="suite", required=True)
    for name in SUITES:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file; its values override flags")
        p.add_argument("--out", help="write the report here instead of stdout")
        p.add_argument("--format", choices=("json", "csv"))
        for key in ("M", "N", "k", "q", "g", "K", "S", "trials", "seed"):
            p.add_argument(f"--{key}", type=int, dest=key)
        p.add_argument("--adversary", action="append",
                       help="random[:seed] | guess:x1,x2 | grover:t | classical:<json tree>; repeatable")
        p.add_argument("--relation", choices=PREDICATES)
        p.add_argument("--qs", type=_int_list)
        p.add_argument("--ks", type=_int_list)
        p.add_argument("--Ns", type=_int_list)
        p.add_argument("--enumeration-budget", type=int, dest="enumeration_budget")
        p.add_argument("--state-budget", type=int, dest="state_budget")
        p.add_argument("--branch-cap", type=int, dest="branch_cap")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = vars(build_parser().parse_args(argv))
    config_path = args.pop("config")
    raw = {k: v for k, v in args.items() if v is not None}
    if config_path:
        try:
            with open(config_path) as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            print(f"config: cannot read {config_path}: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        if not isinstance(loaded, dict):
            print("config: expected a JSON object", file=sys.stderr)
            return EXIT_CONFIG
        raw.update(loaded)
        raw["suite"] = args["suite"]
    cfg = validate_config(raw)
    if isinstance(cfg, list):
        for d in cfg:
            print(d, file=sys.stderr)
        return EXIT_CONFIG
    status, text = run_suite(cfg)
    if status in (EXIT_CONFIG, EXIT_CAPACITY):
        print(text, file=sys.stderr)
        return status
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")
    else:
        print(text)
    return status


if __name__ == "__main__":
    sys.exit(main())
