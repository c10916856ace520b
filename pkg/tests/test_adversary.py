import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qlift.adversary import (AdversaryCircuit, classical_strategy, grover, grover_search, grover_success,
                             guess_adversary, parse_tree, product_adversary, random_circuit, run,
                             tree_depth, wrap_with_readout)
from qlift.errors import ConfigurationError, ValidationError
from qlift.oracle import OracleTable, enumerate_oracles
from qlift.statevec import OutputMap, norm_sq, output_distribution


def xs_distribution(adv, H, k=None):
    omap = adv.output_map
    k = omap.k if k is None else k
    dist = output_distribution(run(adv, H), OutputMap(omap.xs[:k], (), omap.z))
    out = {}
    for (xs, _, z), p in dist.items():
        if p > 1e-12:
            out[(xs, z)] = out.get((xs, z), 0.0) + p
    return out


@st.composite
def trees(draw, M, N, k, depth):
    if depth == 0 or draw(st.booleans()):
        return {"output": draw(st.lists(st.integers(0, M - 1), min_size=k, max_size=k))}
    return {"query": draw(st.integers(0, M - 1)),
            "children": {y: draw(trees(M, N, k, depth - 1)) for y in range(N)}}


def walk(tree, H):
    while "query" in tree:
        tree = tree["children"][H(tree["query"])]
    return tuple(tree["output"])


@given(st.data(), st.integers(2, 3), st.integers(2, 3), st.integers(1, 2), st.integers(0, 3))
def test_classical_strategy_matches_tree_walk(data, M, N, k, pad):
    tree = data.draw(trees(M, N, k, 2))
    depth = tree_depth(parse_tree(tree))
    adv = classical_strategy(tree, M, N, q=depth + (pad % 2))
    assert adv.q == depth + (pad % 2)
    for values in itertools.islice(itertools.product(range(N), repeat=M), 0, None, max(1, N ** M // 6)):
        H = OracleTable(M, N, values)
        dist = xs_distribution(adv, H)
        assert list(dist) == [(walk(tree, H), ())]
        assert abs(dist[(walk(tree, H), ())] - 1) < 1e-12


def test_classical_strategy_with_z():
    tree = {"query": 1, "children": {0: {"output": [0], "z": [1]}, 1: {"output": [1], "z": [0]}}}
    adv = classical_strategy(tree, 2, 2, z_dims=(2,))
    assert xs_distribution(adv, OracleTable(2, 2, (0, 1))) == {((1,), (0,)): 1.0}


def test_tree_validation():
    with pytest.raises(ValidationError):
        classical_strategy({"query": 0, "children": {0: {"output": [0]}}}, 2, 2)
    with pytest.raises(ValidationError):
        classical_strategy({"output": [3]}, 2, 2)
    with pytest.raises(ValidationError):
        classical_strategy({"query": 0, "children": {0: {"output": [0]}, 1: {"output": [0, 1]}}}, 2, 2)
    with pytest.raises(ValidationError):
        classical_strategy({"query": 0, "children": {0: {"output": [0]}, 1: {"output": [1]}}}, 2, 2, q=0)


def test_guess_adversary():
    adv = guess_adversary(3, 2, [2, 0], q=2)
    assert adv.q == 2
    for H in enumerate_oracles(3, 2):
        assert xs_distribution(adv, H) == {((2, 0), ()): 1.0}


@given(st.integers(0, 1000), st.integers(0, 3), st.integers(2, 3), st.integers(1, 2))
def test_random_circuit_is_normalized_and_seeded(seed, q, M, k):
    adv = random_circuit(seed, q, M, 2, k=k)
    H = OracleTable(M, 2, tuple(i % 2 for i in range(M)))
    s1, s2 = run(adv, H), run(random_circuit(seed, q, M, 2, k=k), H)
    assert abs(norm_sq(s1) - 1) < 1e-10
    assert np.array_equal(s1.vector, s2.vector)
    assert adv.q == q and adv.output_map.k == k


@given(st.integers(0, 1000), st.integers(1, 2))
def test_readout_preserves_outputs_and_computes_images(seed, k):
    M, N = 3, 2
    adv = random_circuit(seed, 1, M, N, k=k)
    wrapped = wrap_with_readout(adv, k)
    assert wrapped.total_queries == adv.q + k and wrapped.q == adv.q
    for H in list(enumerate_oracles(M, N))[::3]:
        base = xs_distribution(adv, H)
        dist = output_distribution(run(wrapped, H), wrapped.output_map)
        merged = {}
        for (xs, ys, z), p in dist.items():
            if p > 1e-14:
                assert ys == tuple(H(x) for x in xs)
                merged[(xs, z)] = merged.get((xs, z), 0.0) + p
        assert merged.keys() == base.keys()
        assert all(abs(merged[key] - base[key]) < 1e-10 for key in base)


def test_readout_errors():
    adv = guess_adversary(2, 2, [0])
    with pytest.raises(ConfigurationError):
        wrap_with_readout(adv, 2)
    with pytest.raises(ConfigurationError):
        wrap_with_readout(wrap_with_readout(adv, 1), 1)


def test_product_adversary_independent_slices():
    tree = {"query": 0, "children": {0: {"output": [0]}, 1: {"output": [1]}}}
    a = classical_strategy(tree, 2, 2)
    b = random_circuit(3, 1, 2, 2)
    prod_adv = product_adversary([a, b], [0, 2], 4)
    assert prod_adv.q == 2
    for H in enumerate_oracles(4, 2):
        da = xs_distribution(a, OracleTable(2, 2, H.values[:2]))
        db = xs_distribution(b, OracleTable(2, 2, H.values[2:]))
        dp = xs_distribution(prod_adv, H)
        for (xa, _), pa in da.items():
            for (xb, _), pb in db.items():
                assert abs(dp[((xa[0], xb[0] + 2), ())] - pa * pb) < 1e-10


@pytest.mark.parametrize("M", [2, 4, 8])
@pytest.mark.parametrize("t", [0, 1, 2, 3])
def test_grover_closed_form(M, t):
    adv = grover(M, lambda x: x == M - 1, t)
    assert adv.q == t
    dist = xs_distribution(adv, OracleTable(M, 2, (0,) * M))
    expected = np.sin((2 * t + 1) * np.arcsin(1 / np.sqrt(M))) ** 2
    assert abs(dist.get(((M - 1,), ()), 0.0) - expected) < 1e-9
    assert abs(grover_success(M, 1, t) - expected) < 1e-12


def test_grover_four_one_iteration_is_exact():
    dist = xs_distribution(grover(4, lambda x: x == 2, 1), OracleTable(4, 2, (0,) * 4))
    assert abs(dist[((2,), ())] - 1.0) < 1e-12


@pytest.mark.parametrize("N", [2, 3])
def test_grover_search_uses_the_oracle(N):
    M = 4
    adv = grover_search(M, N, 1)
    assert adv.q == (1 if N == 2 else 2)
    for target in range(M):
        H = OracleTable(M, N, tuple(0 if x == target else 1 for x in range(M)))
        assert abs(xs_distribution(adv, H)[((target,), ())] - 1.0) < 1e-10


def test_grover_validation():
    with pytest.raises(ValidationError):
        grover(1, lambda x: True, 1)
    with pytest.raises(ValidationError):
        grover(4, lambda x: True, -1)


def test_circuit_json_round_trip():
    adv = random_circuit(5, 2, 2, 2)
    back = AdversaryCircuit.from_json(adv.to_json())
    H = OracleTable(2, 2, (1, 0))
    assert np.allclose(run(back, H).vector, run(adv, H).vector)
    assert back.output_map == adv.output_map


def test_circuit_validation():
    from qlift.statevec import Gate
    with pytest.raises(ConfigurationError):
        AdversaryCircuit(2, 2, (), ((Gate((3,), matrix=np.eye(2)),),))
    with pytest.raises(ConfigurationError):
        AdversaryCircuit(2, 2, (), ((Gate((0,), matrix=np.eye(3)),),))
