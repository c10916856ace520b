"""Loss factors, p(R), and the closed-form application bounds.

Integer combinatorics stay exact (Python ints / Fractions) and are converted
to floats only when a value is reported.
"""
from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb, e, exp, factorial, isfinite, lgamma, log, sqrt
from typing import Callable, Iterable, Sequence

import numpy as np

from .constants import EQUALITY_TOL, EXACT_BINOMIAL_BITS, P_OF_R_BUDGET
from .errors import CapacityError, DomainError, ValidationError


def _check_qk(q: int, k: int) -> None:
    if q < 0:
        raise ValidationError(f"q must be >= 0, got {q}")
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")


def loss_factor(q: int, k: int) -> int:
    """``2^{2k} * C(q+k, k)^2`` as an exact integer."""
    _check_qk(q, k)
    return 4 ** k * comb(q + k, k) ** 2


def yz_loss(q: int, k: int) -> int:
    """``(2q+1)^{2k}``, the loss of the measurement-based reduction."""
    _check_qk(q, k)
    return (2 * q + 1) ** (2 * k)


def compare_losses(q: int, k: int) -> dict:
    ratio = Fraction(yz_loss(q, k), loss_factor(q, k))
    return {"q": q, "k": k, "yz_loss": yz_loss(q, k), "loss_factor": loss_factor(q, k),
            "ratio": float(ratio), "reference": factorial(k) ** 2}


# ---------------------------------------------------------------------------
# estimates shared by the Monte-Carlo routines


@dataclass(frozen=True)
class Estimate:
    mean: float
    stderr: float
    trials: int

    def within(self, value: float, sigmas: float = 3.0) -> bool:
        return abs(self.mean - float(value)) <= sigmas * self.stderr + 1e-12

    def to_dict(self) -> dict:
        return {"mean": self.mean, "stderr": self.stderr, "trials": self.trials}


def estimate_from_samples(samples) -> Estimate:
    samples = np.asarray(samples, dtype=float)
    n = samples.size
    if n == 0:
        raise ValueError("no samples")
    sd = float(samples.std(ddof=1)) if n > 1 else 0.0
    return Estimate(float(samples.mean()), sd / sqrt(n), n)


# ---------------------------------------------------------------------------
# relations and p(R)


@dataclass(frozen=True)
class RelationSpec:
    """A set ``R`` of ordered image tuples in ``[N]^k`` given by a membership test."""

    k: int
    N: int
    member: Callable[[tuple], bool]
    name: str = "relation"
    params: dict = field(default_factory=dict, compare=False)

    def __contains__(self, ys) -> bool:
        return bool(self.member(tuple(ys)))


def inversion_relation(N: int, k: int, targets: Sequence[int] | None = None) -> RelationSpec:
    """Images equal to a fixed tuple of distinct targets (in some order)."""
    if targets is None:
        if k > N:
            raise DomainError(f"{k} distinct targets do not exist in a range of size {N}")
        targets = tuple(range(k))
    targets = tuple(int(t) for t in targets)
    if len(targets) != k or len(set(targets)) != k or any(not 0 <= t < N for t in targets):
        raise DomainError(f"targets {targets} must be {k} distinct values in [0, {N})")
    want = sorted(targets)
    return RelationSpec(k, N, lambda ys: sorted(ys) == want, "inversion", {"targets": list(targets)})


def collision_relation(N: int, k: int) -> RelationSpec:
    return RelationSpec(k, N, lambda ys: len(set(ys)) <= 1, "k-collision")


def search_zero_relation(N: int, k: int) -> RelationSpec:
    return RelationSpec(k, N, lambda ys: all(y == 0 for y in ys), "k-search-zero")


RELATIONS = {
    "inversion": inversion_relation,
    "k-collision": collision_relation,
    "k-search-zero": search_zero_relation,
}


def named_relation(name: str, N: int, k: int) -> RelationSpec:
    try:
        factory = RELATIONS[name]
    except KeyError:
        raise ValidationError(f"unknown relation {name!r}; choose from {sorted(RELATIONS)}") from None
    return factory(N, k)


def closed_form_p(name: str, N: int, k: int) -> Fraction:
    """Reference values of p(R) for the shipped relations."""
    if name == "inversion":
        return Fraction(factorial(k), N ** k)
    if name == "k-collision":
        return Fraction(1, N ** (k - 1))
    if name == "k-search-zero":
        return Fraction(1, N ** k)
    raise ValidationError(f"no closed form for {name!r}")


def p_of_r_exact(R: RelationSpec, budget: int = P_OF_R_BUDGET) -> Fraction:
    """Fraction of ``ys`` in ``[N]^k`` having some permutation inside ``R``."""
    cost = R.N ** R.k * factorial(R.k)
    if cost > budget:
        raise CapacityError(f"N^k * k! = {cost} exceeds the p(R) budget {budget}")
    hits = 0
    for ys in itertools.product(range(R.N), repeat=R.k):
        if any(R.member(p) for p in set(itertools.permutations(ys))):
            hits += 1
    return Fraction(hits, R.N ** R.k)


def p_of_r_mc(R: RelationSpec, trials: int, seed=0) -> Estimate:
    if trials < 1:
        raise ValidationError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    draws = rng.integers(0, R.N, size=(trials, R.k))
    cache: dict = {}
    hits = np.empty(trials)
    for t, row in enumerate(draws):
        key = tuple(sorted(int(v) for v in row))
        if key not in cache:
            cache[key] = any(R.member(p) for p in set(itertools.permutations(key)))
        hits[t] = cache[key]
    return estimate_from_samples(hits)


# ---------------------------------------------------------------------------
# closed-form bounds


def lifted_bound(q: int, k: int, pR) -> float:
    if not 0 <= pR <= 1:
        raise ValidationError(f"p(R) must lie in [0, 1], got {pR}")
    return float(loss_factor(q, k) * Fraction(pR))


def _pow(base: float, exponent: float) -> float:
    try:
        return base ** exponent
    except OverflowError:
        return float("inf")


def bound_inversion(q: int, k: int, N: int) -> float:
    _check_qk(q, k)
    return _pow(4 * e * (q + k) ** 2 / (N * k), k)


def bound_collision(q: int, k: int, N: int) -> float:
    _check_qk(q, k)
    return _pow(2 * e * (q + k) / k, 2 * k) / N ** (k - 1)


def bound_search(q: int, k: int, N: int) -> float:
    _check_qk(q, k)
    return _pow(4 * e ** 2 * (q + k) ** 2 / (N * k ** 2), k)


APPLICATION_BOUNDS = {
    "inversion": bound_inversion,
    "k-collision": bound_collision,
    "k-search-zero": bound_search,
}


def stirling_chain(q: int, k: int, N: int) -> dict:
    """Both sides of ``loss * p(R) <= closed form`` for each shipped relation."""
    loss = loss_factor(q, k)
    out = {}
    for name, bound in APPLICATION_BOUNDS.items():
        lhs = float(loss * closed_form_p(name, N, k))
        rhs = bound(q, k, N)
        out[name] = {"lhs": lhs, "rhs": rhs, "holds": lhs <= rhs * (1 + EQUALITY_TOL)}
    return out


def stirling_chain_check(q: int, k: int, N: int) -> bool:
    return all(row["holds"] for row in stirling_chain(q, k, N).values())


def bound_salted(q: int, k: int, N: int, S: int, K: int, pR) -> float:
    if S < 1 or K < 1:
        raise ValidationError("S and K must be >= 1")
    return 4 * S / K + 4 * lifted_bound(q, k, pR)


def salted_collision_closed_form(q: int, k: int, N: int, S: int, K: int) -> float:
    return 4 * bound_collision(q, k, N) + 4 * S / K


def log_binomial(n: int, r: int) -> float:
    """``log C(n, r)``; exact integer arithmetic while the binomial stays small."""
    if r < 0 or r > n:
        return float("-inf")
    # C(n, r) <= 2^n, so n bounds the bit length
    if n <= EXACT_BINOMIAL_BITS:
        return log(comb(n, r))
    return lgamma(n + 1) - lgamma(r + 1) - lgamma(n - r + 1)


def bound_nonuniform(q: int, k: int, S: int, p_mis, literal: bool = False) -> float:
    """Advice bound ``4 * 2^{2k} * C(S(q+k), Sk)^{2/S} * p^{1/S}``.

    ``literal=True`` drops the ``1/S`` power on ``p``.
    """
    _check_qk(q, k)
    if S < 1:
        raise ValidationError("S must be >= 1")
    if not 0 <= p_mis <= 1:
        raise ValidationError(f"p must lie in [0, 1], got {p_mis}")
    if p_mis == 0:
        return 0.0
    logp = log(p_mis) if literal else log(p_mis) / S
    value = log(4) + 2 * k * log(2) + 2 / S * log_binomial(S * (q + k), S * k) + logp
    try:
        return exp(value)
    except OverflowError:
        return float("inf")


# ---------------------------------------------------------------------------
# reports


@dataclass
class BoundReport:
    name: str
    params: dict
    value: float
    formula: str = ""
    # loss factors are multipliers, not probabilities, and are never vacuous
    probability: bool = True

    @property
    def vacuous(self) -> bool:
        return self.probability and self.value > 1

    @property
    def reported(self) -> float:
        return min(self.value, 1.0) if self.probability else self.value

    def to_dict(self) -> dict:
        value = self.value if isfinite(self.value) else str(self.value)
        return {"name": self.name, "params": dict(self.params), "value": value,
                "reported": self.reported, "vacuous": self.vacuous, "formula": self.formula}


FORMULAS = {
    "loss_factor": "2^(2k) * C(q+k,k)^2",
    "yz_loss": "(2q+1)^(2k)",
    "inversion": "[4e(q+k)^2/(Nk)]^k",
    "k-collision": "N^-(k-1) * [2e(q+k)/k]^(2k)",
    "k-search-zero": "[4e^2(q+k)^2/(Nk^2)]^k",
    "salted": "4S/K + 4*loss*p(R)",
    "nonuniform": "4 * 2^(2k) * C(S(q+k),Sk)^(2/S) * p^(1/S)",
    "nonuniform-literal": "4 * 2^(2k) * C(S(q+k),Sk)^(2/S) * p",
}


def bounds_table(qs: Iterable[int], ks: Iterable[int], Ns: Iterable[int]) -> list[BoundReport]:
    rows = []
    for q, k, N in itertools.product(list(qs), list(ks), list(Ns)):
        params = {"q": q, "k": k, "N": N}
        rows.append(BoundReport("loss_factor", params, float(loss_factor(q, k)), FORMULAS["loss_factor"], False))
        rows.append(BoundReport("yz_loss", params, float(yz_loss(q, k)), FORMULAS["yz_loss"], False))
        for name, bound in APPLICATION_BOUNDS.items():
            rows.append(BoundReport(name, params, bound(q, k, N), FORMULAS[name]))
    return rows


CSV_PARAMS = ("q", "k", "N", "M", "S", "K", "g")


def to_csv(reports: Sequence[BoundReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("name",) + CSV_PARAMS + ("value", "reported", "vacuous", "formula"))
    for r in reports:
        writer.writerow([r.name] + [r.params.get(p, "") for p in CSV_PARAMS]
                        + [repr(r.value), repr(r.reported), int(r.vacuous), r.formula])
    return buf.getvalue()
