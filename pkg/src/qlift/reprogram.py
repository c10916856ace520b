"""Measure-and-reprogram experiments.

Two simulators are implemented:

* the coherent simulator, which records intercepted query inputs in a control
  register and answers every query with the oracle reprogrammed on that
  register's contents;
* the classical baseline, which measures the query input register at the
  intercepted queries and reprograms a classical table.

Both sides of the coherent reprogramming inequality are computed exactly by
enumerating all branch choices ``(v, b)``.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from math import comb, sqrt
from typing import Iterable, Sequence

import numpy as np

from .adversary import AdversaryCircuit, WrappedAdversary, evolve, run
from .bounds import Estimate, estimate_from_samples, loss_factor, yz_loss
from .constants import BRANCH_CAP, DEFAULT_MC_TRIALS, ENUMERATION_BUDGET, INEQUALITY_SLACK
from .errors import CapacityError, ConfigurationError, InvariantError
from .oracle import OracleTable, enumerate_oracles, eval_tuple, oracle_count, reprogram, reprogram_multi
from .statevec import (INPUT, OutputMap, Predicate, StateVector, apply_control_update,
                       apply_controlled_query, apply_gates, apply_oracle_query, equiv_mask,
                       init_state, measure_control, output_distribution,
                       predicate_mask, register_marginal)


@dataclass(frozen=True, order=True)
class BranchChoice:
    """Intercepted query positions ``v`` (1-based, increasing) and timing bits ``b``.

    ``b_j = 0`` updates the control register before the ``v_j``-th query,
    ``b_j = 1`` after it.
    """

    v: tuple[int, ...]
    b: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "v", tuple(int(i) for i in self.v))
        object.__setattr__(self, "b", tuple(int(i) for i in self.b))
        if len(self.v) != len(self.b):
            raise InvariantError("v and b must have equal length")
        if any(a >= c for a, c in zip(self.v, self.v[1:])) or any(i < 1 for i in self.v):
            raise InvariantError(f"v must be strictly increasing and >= 1, got {self.v}")
        if any(bit not in (0, 1) for bit in self.b):
            raise InvariantError("b must be a bit vector")

    def key(self) -> str:
        return f"v={list(self.v)},b={list(self.b)}"


def branch_count(total_queries: int, k: int) -> int:
    return 2 ** k * comb(total_queries, k)


def all_choices(total_queries: int, k: int) -> list[BranchChoice]:
    """Every ``(v, b)`` with ``v`` a k-subset of ``1..total_queries``."""
    return [BranchChoice(v, b)
            for v in itertools.combinations(range(1, total_queries + 1), k)
            for b in itertools.product((0, 1), repeat=k)]


def _check_xo(x_o: Sequence[int], k: int) -> tuple[int, ...]:
    x_o = tuple(int(x) for x in x_o)
    if len(x_o) != k:
        raise InvariantError(f"x_o has {len(x_o)} entries, expected {k}")
    if len(set(x_o)) != k:
        raise InvariantError(f"x_o {x_o} has duplicate entries")
    return x_o


def branch_state(adv: WrappedAdversary, H: OracleTable, G: OracleTable,
                 choice: BranchChoice) -> StateVector:
    """Final simulator state (with control register) for one fixed ``(v, b)``."""
    k = adv.k
    if len(choice.v) != k:
        raise ConfigurationError(f"choice has {len(choice.v)} positions, expected k={k}")
    if choice.v and choice.v[-1] > adv.total_queries:
        raise ConfigurationError(f"position {choice.v[-1]} beyond {adv.total_queries} queries")
    schedule = dict(zip(choice.v, choice.b))

    def query(i, s):
        bit = schedule.get(i)
        if bit == 0:
            s = apply_control_update(s, G)
        s = apply_controlled_query(s, H, G)
        if bit == 1:
            s = apply_control_update(s, G)
        return s

    layout = adv.layout(max(k, 1))
    return evolve(adv.circuit, init_state(layout), query)


def _accept_prob(state: StateVector, x_o: tuple[int, ...], V: Predicate, G: OracleTable,
                 H: OracleTable, omap: OutputMap) -> float:
    layout = state.layout
    reprogrammed = reprogram_multi(H, x_o, eval_tuple(G, x_o))
    mask = predicate_mask(layout, V, reprogrammed, omap) & equiv_mask(layout, x_o, omap)
    s = layout.subset_index[frozenset(x_o)]
    sector = state.amplitudes[..., s]
    probs = np.abs(sector) ** 2 * mask[..., 0]
    return float(probs.sum())


def run_branch(adv: WrappedAdversary, H: OracleTable, G: OracleTable, x_o: Sequence[int],
               choice: BranchChoice, V: Predicate) -> float:
    """Acceptance probability of the simulator for a fixed branch choice.

    The final state is projected onto ``V`` under ``H`` reprogrammed to ``G``
    on ``x_o``, onto outputs equivalent to ``x_o`` and onto control contents
    ``set(x_o)``.
    """
    x_o = _check_xo(x_o, adv.k)
    state = branch_state(adv, H, G, choice)
    return _accept_prob(state, x_o, V, G, H, adv.output_map)


@dataclass
class ExperimentResult:
    lhs: float
    rhs: float
    loss: float
    holds: bool
    per_branch: dict | None = None
    config: dict = field(default_factory=dict)

    @property
    def slack(self) -> float:
        return self.lhs * self.loss - self.rhs

    def to_dict(self, include_branches: bool = False) -> dict:
        out = {"lhs": self.lhs, "rhs": self.rhs, "loss": self.loss, "holds": self.holds,
               "config": self.config}
        if include_branches and self.per_branch is not None:
            out["per_branch"] = self.per_branch
        return out

    def to_json(self, include_branches: bool = False) -> str:
        return json.dumps(self.to_dict(include_branches), sort_keys=True)


def direct_probability(adv: WrappedAdversary, H: OracleTable, G: OracleTable,
                       x_o: Sequence[int], V: Predicate) -> float:
    """``|| G_xo Pi_V A^{H reprogrammed} |0> ||^2`` (the right-hand side)."""
    x_o = _check_xo(x_o, adv.k)
    reprogrammed = reprogram_multi(H, x_o, eval_tuple(G, x_o))
    state = run(adv, reprogrammed)
    mask = predicate_mask(state.layout, V, reprogrammed, adv.output_map)
    mask = mask & equiv_mask(state.layout, x_o, adv.output_map)
    return float((np.abs(state.amplitudes) ** 2 * mask).sum())


def coherent_sim_exact(adv: WrappedAdversary, H: OracleTable, G: OracleTable,
                       x_o: Sequence[int], V: Predicate, cap: int = BRANCH_CAP,
                       keep_branches: bool = False) -> ExperimentResult:
    k, total = adv.k, adv.total_queries
    nb = branch_count(total, k)
    if nb > cap:
        raise CapacityError(f"{nb} branch choices exceed the cap {cap}")
    x_o = _check_xo(x_o, k)
    per = {c.key(): run_branch(adv, H, G, x_o, c, V) for c in all_choices(total, k)}
    lhs = sum(per.values()) / nb
    rhs = direct_probability(adv, H, G, x_o, V)
    loss = float(loss_factor(adv.q, k))
    return ExperimentResult(
        lhs, rhs, loss, lhs * loss >= rhs - INEQUALITY_SLACK,
        per if keep_branches else None,
        {"q": adv.q, "k": k, "H": list(H.values), "G": list(G.values), "x_o": list(x_o),
         "adversary": adv.base.name, "predicate": V.name})


def sim_acceptance_by_xo(adv: WrappedAdversary, H: OracleTable, G: OracleTable,
                         x_os: Iterable[Sequence[int]], V: Predicate) -> dict:
    """Simulator acceptance for many ``x_o`` at once, sharing branch states."""
    x_os = [_check_xo(x, adv.k) for x in x_os]
    choices = all_choices(adv.total_queries, adv.k)
    totals = dict.fromkeys(x_os, 0.0)
    for c in choices:
        state = branch_state(adv, H, G, c)
        for x_o in x_os:
            totals[x_o] += _accept_prob(state, x_o, V, G, H, adv.output_map)
    return {x: t / len(choices) for x, t in totals.items()}


def coherent_sim_sample(adv: WrappedAdversary, H: OracleTable, G: OracleTable,
                        x_o: Sequence[int], V: Predicate, trials: int, seed) -> Estimate:
    """Sample ``(v, b)`` uniformly; each trial contributes its exact branch probability."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    x_o = _check_xo(x_o, adv.k)
    rng = np.random.default_rng(seed)
    total, k = adv.total_queries, adv.k
    cache: dict = {}
    samples = np.empty(trials)
    for t in range(trials):
        v = tuple(sorted(int(i) + 1 for i in rng.choice(total, size=k, replace=False)))
        b = tuple(int(i) for i in rng.integers(0, 2, size=k))
        choice = BranchChoice(v, b)
        if choice not in cache:
            cache[choice] = run_branch(adv, H, G, x_o, choice, V)
        samples[t] = cache[choice]
    return estimate_from_samples(samples)


# ---------------------------------------------------------------------------
# classical measure-and-reprogram baseline

BOTTOM = None


def classical_assignments(q: int, k: int) -> list[tuple]:
    """All valid ``((i_1, b_1), ..., (i_k, b_k))``; ``None`` stands for the bottom pair."""
    options = [BOTTOM] + [(i, b) for i in range(1, q + 1) for b in (0, 1)]
    out = []
    for combo in itertools.product(options, repeat=k):
        used = [c[0] for c in combo if c is not BOTTOM]
        if len(used) == len(set(used)):
            out.append(combo)
    return out


def _schedule(assignment) -> dict:
    return {c[0]: (j, c[1]) for j, c in enumerate(assignment) if c is not BOTTOM}


class _ClassicalMR:
    """Replays the baseline experiment for a fixed assignment and outcome history."""

    def __init__(self, adv: AdversaryCircuit, H: OracleTable, y_target: Sequence[int]):
        self.adv = adv
        self.H = H
        self.y = tuple(int(v) for v in y_target)
        self.layout = adv.layout()

    def replay(self, assignment, outcomes: Sequence[int], normalize: bool):
        """Run until a measurement without a recorded outcome, or to the end.

        Returns ``("measure", state, j)`` or ``("final", state, None)``. With
        ``normalize=False`` the state carries the path probability in its norm.
        """
        sched = _schedule(assignment)
        state = init_state(self.layout)
        oracle = self.H
        used = 0
        for i, step in enumerate(self.adv.steps, start=1):
            state = apply_gates(state, step)
            if i in sched:
                j, bit = sched[i]
                if used == len(outcomes):
                    return "measure", state, j
                x = outcomes[used]
                used += 1
                mask = np.zeros(self.layout.input_dim, dtype=bool)
                mask[x] = True
                shape = [1] * len(self.layout.shape)
                shape[INPUT] = -1
                amps = state.amplitudes * mask.reshape(shape)
                if normalize:
                    amps = amps / sqrt(max(float(np.vdot(amps, amps).real), 1e-300))
                state = state.with_amplitudes(amps)
                if bit == 0:
                    oracle = reprogram(oracle, x, self.y[j])
                    state = apply_oracle_query(state, oracle)
                else:
                    state = apply_oracle_query(state, oracle)
                    oracle = reprogram(oracle, x, self.y[j])
            else:
                state = apply_oracle_query(state, oracle)
        return "final", apply_gates(state, self.adv.post), None

    def measured_slots(self, assignment) -> list[int]:
        return [j for _, (j, _) in sorted(_schedule(assignment).items())]


def _mr_success(xs_out, z, assignment, outcomes, slots, x_star, y, V, H_rep) -> bool:
    xprime = list(xs_out)
    for j, x in zip(slots, outcomes):
        xprime[j] = x
    xprime = tuple(xprime)
    return xprime == x_star and V(xprime, y, z, H_rep)


def _check_mr_inputs(adv, y_target, x_star, V):
    k = len(y_target)
    if adv.output_map.k < k or V.arity != k:
        raise ConfigurationError("adversary outputs / predicate arity do not match k")
    x_star = _check_xo(x_star, k)
    return k, x_star


def _truncate(omap: OutputMap, k: int) -> OutputMap:
    return OutputMap(omap.xs[:k], (), omap.z)


def classical_mr_exact(adv: AdversaryCircuit, H: OracleTable, y_target: Sequence[int],
                       x_star: Sequence[int], V: Predicate) -> float:
    """Exact baseline success probability by enumerating measurement outcomes."""
    k, x_star = _check_mr_inputs(adv, y_target, x_star, V)
    y = tuple(int(v) for v in y_target)
    H_rep = reprogram_multi(H, x_star, y)
    sim = _ClassicalMR(adv, H, y)
    omap = _truncate(adv.output_map, k)
    assignments = classical_assignments(adv.q, k)
    total = 0.0
    for a in assignments:
        slots = sim.measured_slots(a)

        def expand(outcomes):
            kind, state, _ = sim.replay(a, outcomes, normalize=False)
            if kind == "measure":
                return sum(expand(outcomes + [x]) for x in range(adv.input_dim))
            acc = 0.0
            for (xs, _, z), p in output_distribution(state, omap).items():
                if _mr_success(xs, z, a, outcomes, slots, x_star, y, V, H_rep):
                    acc += p
            return acc

        total += expand([])
    return total / len(assignments)


def classical_mr_sample(adv: AdversaryCircuit, H: OracleTable, y_target: Sequence[int],
                        trials: int = DEFAULT_MC_TRIALS, seed=0, V: Predicate | None = None,
                        x_star: Sequence[int] | None = None) -> Estimate:
    """Monte-Carlo run of the baseline with genuine mid-circuit measurements.

    Each trial picks an assignment uniformly, samples every intercepted query
    input from the exact conditional distribution, collapses the state, and
    finally samples the adversary's output. Intermediate states are memoized
    per (assignment, outcome history).
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if V is None or x_star is None:
        raise ConfigurationError("classical_mr_sample needs a predicate and x_star")
    k, x_star = _check_mr_inputs(adv, y_target, x_star, V)
    y = tuple(int(v) for v in y_target)
    H_rep = reprogram_multi(H, x_star, y)
    sim = _ClassicalMR(adv, H, y)
    omap = _truncate(adv.output_map, k)
    assignments = classical_assignments(adv.q, k)
    rng = np.random.default_rng(seed)
    cache: dict = {}

    def node(ai, outcomes):
        key = (ai, outcomes)
        if key not in cache:
            kind, state, _ = sim.replay(assignments[ai], list(outcomes), normalize=True)
            if kind == "measure":
                p = register_marginal(state, INPUT)
                cache[key] = ("measure", p / p.sum())
            else:
                dist = output_distribution(state, omap)
                keys = list(dist)
                p = np.array([dist[c] for c in keys])
                cache[key] = ("final", (keys, p / p.sum()))
        return cache[key]

    samples = np.empty(trials)
    for t in range(trials):
        ai = int(rng.integers(len(assignments)))
        a = assignments[ai]
        outcomes: tuple = ()
        while True:
            kind, data = node(ai, outcomes)
            if kind == "measure":
                outcomes = outcomes + (int(rng.choice(len(data), p=data)),)
                continue
            keys, p = data
            xs, _, z = keys[int(rng.choice(len(keys), p=p))]
            break
        slots = sim.measured_slots(a)
        samples[t] = float(_mr_success(xs, z, a, list(outcomes), slots, x_star, y, V, H_rep))
    return estimate_from_samples(samples)


def classical_mr_direct(adv: AdversaryCircuit, H: OracleTable, y_target: Sequence[int],
                        x_star: Sequence[int], V: Predicate) -> float:
    """``Pr[x = x* and V]`` for the adversary run against ``H`` reprogrammed to ``y`` on ``x*``."""
    k, x_star = _check_mr_inputs(adv, y_target, x_star, V)
    y = tuple(int(v) for v in y_target)
    H_rep = reprogram_multi(H, x_star, y)
    dist = output_distribution(run(adv, H_rep), _truncate(adv.output_map, k))
    return sum(p for (xs, _, z), p in dist.items() if tuple(xs) == x_star and V(xs, y, z, H_rep))


# ---------------------------------------------------------------------------
# uniform images


def image_distribution(adv: WrappedAdversary, H: OracleTable, choice: BranchChoice,
                       Gs: Iterable[OracleTable]) -> dict:
    """Unnormalized distribution of measured images ``G(S)`` (inputs sorted), averaged over ``Gs``."""
    Gs = list(Gs)
    out: dict = {}
    for G in Gs:
        probs = measure_control(branch_state(adv, H, G, choice))
        for subset, p in probs.items():
            if len(subset) != adv.k or p == 0.0:
                continue
            theta = tuple(G.values[x] for x in sorted(subset))
            out[theta] = out.get(theta, 0.0) + p / len(Gs)
    return out


def uniform_images_check(M: int, N: int, k: int, q: int, adv_family: Sequence[WrappedAdversary],
                         choice: BranchChoice | None = None, H: OracleTable | None = None,
                         Gs: Iterable[OracleTable] | None = None,
                         budget: int = ENUMERATION_BUDGET) -> float:
    """Largest total-variation distance of the measured images from uniform on ``[N]^k``.

    Images are averaged over every ``G`` (or the given ``Gs``) and conditioned
    on non-abort. With ``choice=None`` every branch choice is checked.
    """
    if k == 0:
        return 0.0
    if Gs is None:
        if oracle_count(M, N) > budget:
            raise CapacityError(f"N^M = {oracle_count(M, N)} exceeds enumeration budget {budget}")
        Gs = list(enumerate_oracles(M, N, budget))
    else:
        Gs = list(Gs)
    H = H if H is not None else OracleTable(M, N, (0,) * M)
    worst = 0.0
    for adv in adv_family:
        if adv.k != k or adv.q != q:
            raise ConfigurationError(f"adversary {adv.base.name} has (q, k)=({adv.q}, {adv.k})")
        choices = [choice] if choice is not None else all_choices(adv.total_queries, k)
        for c in choices:
            dist = image_distribution(adv, H, c, Gs)
            total = sum(dist.values())
            if total <= 0:
                continue
            uniform = 1.0 / N ** k
            tv = 0.5 * sum(abs(dist.get(theta, 0.0) / total - uniform)
                           for theta in itertools.product(range(N), repeat=k))
            worst = max(worst, tv)
    return worst


def yz_holds(mr_success: float, direct: float, q: int, k: int, slack: float = 0.0) -> bool:
    return mr_success * yz_loss(q, k) >= direct - slack
