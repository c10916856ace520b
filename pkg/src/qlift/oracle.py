"""Explicit function tables H: [M] -> [N] and their reprogrammed variants."""
from __future__ import annotations

import itertools
import json
from collections import Counter
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .constants import ENUMERATION_BUDGET
from .errors import CapacityError, DomainError, InvariantError


@dataclass(frozen=True)
class OracleTable:
    """A total function from ``range(domain_size)`` to ``range(range_size)``.

    Instances are immutable and hashable; every reprogramming returns a new table.
    """

    domain_size: int
    range_size: int
    values: tuple[int, ...]

    def __post_init__(self):
        if self.domain_size < 1 or self.range_size < 1:
            raise DomainError("domain and range sizes must be positive")
        values = tuple(int(v) for v in self.values)
        object.__setattr__(self, "values", values)
        if len(values) != self.domain_size:
            raise DomainError(
                f"expected {self.domain_size} values, got {len(values)}")
        for v in values:
            if not 0 <= v < self.range_size:
                raise DomainError(f"value {v} outside [0, {self.range_size})")

    @classmethod
    def from_values(cls, values: Sequence[int], range_size: int | None = None) -> "OracleTable":
        values = [int(v) for v in values]
        if range_size is None:
            range_size = max(values, default=0) + 1
        return cls(len(values), range_size, tuple(values))

    @property
    def M(self) -> int:
        return self.domain_size

    @property
    def N(self) -> int:
        return self.range_size

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.int64)

    def __call__(self, x: int) -> int:
        return eval_oracle(self, x)

    def __len__(self) -> int:
        return self.domain_size

    def to_json(self) -> str:
        return json.dumps({"M": self.domain_size, "N": self.range_size,
                           "values": list(self.values)})

    @classmethod
    def from_json(cls, text: str) -> "OracleTable":
        data = json.loads(text)
        return cls(int(data["M"]), int(data["N"]), tuple(data["values"]))


def _check_input(H: OracleTable, x: int) -> int:
    x = int(x)
    if not 0 <= x < H.domain_size:
        raise DomainError(f"input {x} outside [0, {H.domain_size})")
    return x


def eval_oracle(H: OracleTable, x: int) -> int:
    return H.values[_check_input(H, x)]


def eval_tuple(H: OracleTable, xs: Sequence[int]) -> tuple[int, ...]:
    return tuple(eval_oracle(H, x) for x in xs)


def reprogram(H: OracleTable, x: int, y: int) -> OracleTable:
    """Return ``H`` with the value on ``x`` replaced by ``y``."""
    x = _check_input(H, x)
    if not 0 <= int(y) < H.range_size:
        raise DomainError(f"output {y} outside [0, {H.range_size})")
    values = list(H.values)
    values[x] = int(y)
    return OracleTable(H.domain_size, H.range_size, tuple(values))


def reprogram_multi(H: OracleTable, xs: Sequence[int], thetas: Sequence[int]) -> OracleTable:
    """Reprogram ``H`` on every point of ``xs`` at once.

    ``xs`` must not contain duplicates.
    """
    xs = tuple(int(x) for x in xs)
    thetas = tuple(int(t) for t in thetas)
    if len(xs) != len(thetas):
        raise InvariantError("xs and thetas must have equal length")
    if len(set(xs)) != len(xs):
        raise InvariantError(f"duplicate reprogramming points in {xs}")
    values = list(H.values)
    for x, t in zip(xs, thetas):
        _check_input(H, x)
        if not 0 <= t < H.range_size:
            raise DomainError(f"output {t} outside [0, {H.range_size})")
        values[x] = t
    return OracleTable(H.domain_size, H.range_size, tuple(values))


def oracle_count(M: int, N: int) -> int:
    return N ** M


def enumerate_oracles(M: int, N: int, budget: int = ENUMERATION_BUDGET) -> Iterator[OracleTable]:
    """Yield all ``N**M`` tables in lexicographic order of their values."""
    count = oracle_count(M, N)
    if count > budget:
        raise CapacityError(f"N^M = {count} oracles exceed enumeration budget {budget}")
    for values in itertools.product(range(N), repeat=M):
        yield OracleTable(M, N, values)


def sample_oracle(M: int, N: int, seed) -> OracleTable:
    """Uniformly random table, deterministic in ``seed``.

    ``seed`` may be an int, a ``SeedSequence`` or a ``Generator``.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return OracleTable(M, N, tuple(int(v) for v in rng.integers(0, N, size=M)))


def tuple_equiv(a: Sequence[int], b: Sequence[int]) -> bool:
    """True iff ``b`` is a permutation of ``a``."""
    return len(a) == len(b) and Counter(int(v) for v in a) == Counter(int(v) for v in b)


def distinct_tuples(M: int, k: int) -> Iterator[tuple[int, ...]]:
    """Ordered k-tuples over ``range(M)`` without repeated entries."""
    return itertools.permutations(range(M), k)
