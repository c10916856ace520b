"""Multi-output k-search games and their winning probabilities.

A game fixes a relation over ``(xs, ys, z, ch, H)`` and a finite, oracle
independent challenge distribution. The challenger evaluates ``ys = H(xs)``
itself, so adversaries only have to output ``xs`` (and optionally ``z``).
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence, Union

import numpy as np

from .adversary import AdversaryCircuit, WrappedAdversary, circuit_of, product_adversary, run, wrap_with_readout
from .bounds import (Estimate, RelationSpec, closed_form_p, estimate_from_samples, lifted_bound,
                     loss_factor, named_relation, p_of_r_exact)
from .constants import ENUMERATION_BUDGET, INEQUALITY_SLACK
from .errors import CapacityError, ConfigurationError, DomainError, ValidationError
from .oracle import OracleTable, enumerate_oracles, eval_tuple, oracle_count, sample_oracle
from .reprogram import sim_acceptance_by_xo
from .statevec import OutputMap, Predicate, output_distribution

Relation = Callable[[tuple, tuple, tuple, object, OracleTable], bool]
AdversaryLike = Union[AdversaryCircuit, WrappedAdversary, Callable[[object], AdversaryCircuit]]


@dataclass(frozen=True, eq=False)
class GameSpec:
    """A k-search game on oracles ``[M] -> [N]``.

    ``challenges`` is a tuple of ``(weight, ch)`` pairs. With ``image_only``
    the relation must ignore ``xs`` and ``H``; ``distinct`` makes outputs with
    repeated inputs lose.
    """

    M: int
    N: int
    k: int
    relation: Relation
    challenges: tuple = ((1.0, None),)
    image_only: bool = False
    distinct: bool | None = None
    name: str = "game"
    relation_spec: RelationSpec | None = field(default=None, compare=False)

    def __post_init__(self):
        if min(self.M, self.N, self.k) < 1:
            raise ValidationError("M, N and k must be positive")
        if callable(self.challenges):
            raise ConfigurationError("challenges must be a finite list of (weight, ch); "
                                     "oracle-dependent samplers are not supported")
        chs = tuple((float(w), ch) for w, ch in self.challenges)
        if not chs or any(w < 0 for w, _ in chs) or abs(sum(w for w, _ in chs) - 1) > 1e-12:
            raise ValidationError("challenge weights must be nonnegative and sum to 1")
        object.__setattr__(self, "challenges", chs)
        if self.distinct is None:
            object.__setattr__(self, "distinct", self.image_only)

    @property
    def domain_size(self) -> int:
        return self.M

    def wins(self, xs, z, ch, H: OracleTable) -> bool:
        xs = tuple(xs)
        if len(xs) != self.k or any(not 0 <= x < self.M for x in xs):
            return False
        if self.distinct and len(set(xs)) != len(xs):
            return False
        return bool(self.relation(xs, eval_tuple(H, xs), tuple(z), ch, H))

    def predicate(self, ch) -> Predicate:
        """The winning check as an oracle predicate on ``(xs, ys, z)``."""
        def check(xs, ys, z, H):
            if self.distinct and len(set(xs)) != len(xs):
                return False
            return self.relation(tuple(xs), tuple(ys), tuple(z), ch, H)
        return Predicate(self.k, check, f"{self.name}[{ch}]")

    def to_dict(self) -> dict:
        return {"name": self.name, "M": self.M, "N": self.N, "k": self.k,
                "image_only": self.image_only, "distinct": self.distinct,
                "challenges": [[w, _jsonable(ch)] for w, ch in self.challenges]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _jsonable(ch):
    if isinstance(ch, tuple):
        return [_jsonable(c) for c in ch]
    return ch


@dataclass(frozen=True, eq=False)
class DerivedGame:
    """A game built from ``base``; ``spec`` is the composite game actually played."""

    base: GameSpec
    kind: str
    param: int
    spec: GameSpec

    @property
    def name(self) -> str:
        return self.spec.name

    def to_dict(self) -> dict:
        return {"kind": self.kind, "param": self.param, "base": self.base.to_dict(),
                "game": self.spec.to_dict()}


Game = Union[GameSpec, DerivedGame]


def as_spec(game: Game) -> GameSpec:
    return game.spec if isinstance(game, DerivedGame) else game


# ---------------------------------------------------------------------------
# named games


def inversion_game(M: int, N: int, k: int) -> GameSpec:
    """Find preimages of ``k`` distinct targets; the challenge is the target set."""
    if k > N:
        raise DomainError(f"{k} distinct targets do not exist in a range of size {N}")
    targets = list(itertools.combinations(range(N), k))
    w = 1.0 / len(targets)
    return GameSpec(M, N, k, lambda xs, ys, z, ch, H: sorted(ys) == list(ch),
                    tuple((w, t) for t in targets), image_only=True, name="inversion",
                    relation_spec=named_relation("inversion", N, k))


def collision_game(M: int, N: int, k: int) -> GameSpec:
    return GameSpec(M, N, k, lambda xs, ys, z, ch, H: len(set(ys)) <= 1, image_only=True,
                    name="k-collision", relation_spec=named_relation("k-collision", N, k))


def search_zero_game(M: int, N: int, k: int) -> GameSpec:
    return GameSpec(M, N, k, lambda xs, ys, z, ch, H: all(y == 0 for y in ys), image_only=True,
                    name="k-search-zero", relation_spec=named_relation("k-search-zero", N, k))


GAMES = {
    "inversion": inversion_game,
    "k-collision": collision_game,
    "k-search-zero": search_zero_game,
}


def named_game(name: str, M: int, N: int, k: int) -> GameSpec:
    try:
        return GAMES[name](M, N, k)
    except KeyError:
        raise ValidationError(f"unknown game {name!r}; choose from {sorted(GAMES)}") from None


def game_p_of_r(game: Game) -> Fraction:
    spec = as_spec(game)
    if spec.relation_spec is None:
        raise ConfigurationError(f"game {spec.name} has no image relation")
    try:
        return closed_form_p(spec.relation_spec.name, spec.N, spec.k)
    except ValidationError:
        return p_of_r_exact(spec.relation_spec)


# ---------------------------------------------------------------------------
# derived games


def _split(seq, k):
    return [tuple(seq[i:i + k]) for i in range(0, len(seq), k)]


def _slice(H: OracleTable, i: int, M: int) -> OracleTable:
    return OracleTable(M, H.range_size, H.values[i * M:(i + 1) * M])


def _product_challenges(base: GameSpec, g: int) -> tuple:
    out = []
    for combo in itertools.product(base.challenges, repeat=g):
        w = float(np.prod([c[0] for c in combo]))
        out.append((w, tuple(c[1] for c in combo)))
    return tuple(out)


def direct_product(game: GameSpec, g: int) -> DerivedGame:
    """``g`` independent copies: copy ``i`` plays on the slice ``[i*M, (i+1)*M)``."""
    if g < 1:
        raise ValidationError("g must be >= 1")
    base = as_spec(game)
    M, k = base.M, base.k

    def relation(xs, ys, z, ch, H):
        for i, (bx, by) in enumerate(zip(_split(xs, k), _split(ys, k))):
            if any(x // M != i for x in bx):
                return False
            local = tuple(x - i * M for x in bx)
            if base.distinct and len(set(local)) != k:
                return False
            if not base.relation(local, by, z, ch[i], _slice(H, i, M)):
                return False
        return True

    spec = GameSpec(g * M, base.N, g * k, relation, _product_challenges(base, g),
                    image_only=False, distinct=base.distinct, name=f"{base.name}^{g}")
    return DerivedGame(base, "direct_product", g, spec)


def salt(game: GameSpec, K: int) -> DerivedGame:
    """Oracle family ``H(i, .)`` for ``i in [K]``; the challenge names a uniform salt."""
    if K < 1:
        raise ValidationError("K must be >= 1")
    base = as_spec(game)
    M, k = base.M, base.k

    def relation(xs, ys, z, ch, H):
        i, inner = ch
        if any(x // M != i for x in xs):
            return False
        return base.relation(tuple(x - i * M for x in xs), ys, z, inner, _slice(H, i, M))

    chs = tuple((w / K, (i, ch)) for i in range(K) for w, ch in base.challenges)
    spec = GameSpec(K * M, base.N, k, relation, chs, image_only=False, distinct=base.distinct,
                    name=f"{base.name}_salted{K}")
    return DerivedGame(base, "salted", K, spec)


def multi_instance(game: GameSpec, g: int) -> DerivedGame:
    """``g`` challenges against one shared oracle; all must be won."""
    if g < 1:
        raise ValidationError("g must be >= 1")
    base = as_spec(game)
    k = base.k

    def relation(xs, ys, z, ch, H):
        for i, (bx, by) in enumerate(zip(_split(xs, k), _split(ys, k))):
            if base.distinct and len(set(bx)) != k:
                return False
            if not base.relation(bx, by, z, ch[i], H):
                return False
        return True

    spec = GameSpec(base.M, base.N, g * k, relation, _product_challenges(base, g),
                    image_only=False, distinct=False, name=f"{base.name}_mis{g}")
    return DerivedGame(base, "multi_instance", g, spec)


def slice_product_adversary(advs: Sequence[AdversaryLike], M: int) -> Callable:
    """Adversary factory for a direct product: copy ``i`` attacks slice ``i``."""
    g = len(advs)

    def factory(ch):
        chs = ch if ch is not None else (None,) * g
        return product_adversary([_resolve(a, c) for a, c in zip(advs, chs)],
                                 [i * M for i in range(g)], g * M, "slice-product")
    return factory


def salted_adversary(adv: AdversaryLike, M: int, K: int) -> Callable:
    """Plays ``adv`` on the salt named by the challenge."""
    def factory(ch):
        i, inner = ch
        return product_adversary([_resolve(adv, inner)], [i * M], K * M, "salted")
    return factory


def shared_product_adversary(advs: Sequence[AdversaryLike], M: int) -> Callable:
    """Adversary factory for a multi-instance game: every copy uses the shared oracle."""
    g = len(advs)

    def factory(ch):
        chs = ch if ch is not None else (None,) * g
        return product_adversary([_resolve(a, c) for a, c in zip(advs, chs)], [0] * g, M, "shared-product")
    return factory


# ---------------------------------------------------------------------------
# evaluation


def _resolve(adv: AdversaryLike, ch) -> AdversaryCircuit:
    if isinstance(adv, (AdversaryCircuit, WrappedAdversary)):
        return circuit_of(adv) if isinstance(adv, AdversaryCircuit) else adv.base
    return adv(ch)


def _win_probability(spec: GameSpec, circuit: AdversaryCircuit, H: OracleTable, ch) -> float:
    omap = circuit.output_map
    if omap.k < spec.k:
        raise ConfigurationError(f"adversary outputs {omap.k} inputs, game needs {spec.k}")
    if circuit.input_dim != spec.M or circuit.output_dim != spec.N:
        raise ConfigurationError(f"adversary registers ({circuit.input_dim}, {circuit.output_dim}) "
                                 f"do not fit game ({spec.M}, {spec.N})")
    state = run(circuit, H)
    dist = output_distribution(state, OutputMap(omap.xs[:spec.k], (), omap.z))
    return sum(p for (xs, _, z), p in dist.items() if spec.wins(xs, z, ch, H))


def _oracles(spec: GameSpec, oracles, budget):
    if oracles is not None:
        return list(oracles)
    if oracle_count(spec.M, spec.N) > budget:
        raise CapacityError(f"N^M = {oracle_count(spec.M, spec.N)} exceeds enumeration budget {budget}")
    return list(enumerate_oracles(spec.M, spec.N, budget))


def game_value_exact(game: Game, adv: AdversaryLike, oracles: Iterable[OracleTable] | None = None,
                     budget: int = ENUMERATION_BUDGET) -> float:
    """Winning probability averaged over every oracle (or the given ones) and challenge."""
    spec = as_spec(game)
    tables = _oracles(spec, oracles, budget)
    circuits = {i: _resolve(adv, ch) for i, (_, ch) in enumerate(spec.challenges)}
    total = 0.0
    for H in tables:
        for i, (w, ch) in enumerate(spec.challenges):
            if w:
                total += w * _win_probability(spec, circuits[i], H, ch)
    return total / len(tables)


def game_value_mc(game: Game, adv: AdversaryLike, trials: int, seed=0,
                  oracles: Sequence[OracleTable] | None = None) -> Estimate:
    """Sample an oracle and a challenge per trial; each trial contributes its exact win probability."""
    if trials < 1:
        raise ValidationError("trials must be >= 1")
    spec = as_spec(game)
    rng = np.random.default_rng(seed)
    weights = np.array([w for w, _ in spec.challenges])
    circuits: dict = {}
    cache: dict = {}
    samples = np.empty(trials)
    for t in range(trials):
        if oracles is not None:
            H = oracles[int(rng.integers(len(oracles)))]
        else:
            H = sample_oracle(spec.M, spec.N, rng)
        i = int(rng.choice(len(weights), p=weights))
        if (H, i) not in cache:
            if i not in circuits:
                circuits[i] = _resolve(adv, spec.challenges[i][1])
            cache[(H, i)] = _win_probability(spec, circuits[i], H, spec.challenges[i][1])
        samples[t] = cache[(H, i)]
    return estimate_from_samples(samples)


def lifting_check(game: Game, adv: AdversaryLike, oracles=None) -> dict:
    """``game value <= loss(q, k) * p(R)`` for an image-only game."""
    spec = as_spec(game)
    value = game_value_exact(spec, adv, oracles)
    q = _resolve(adv, spec.challenges[0][1]).query_count
    pR = game_p_of_r(spec)
    bound = lifted_bound(q, spec.k, pR)
    return {"game": spec.name, "q": q, "k": spec.k, "value": value, "p_of_r": float(pR),
            "bound": bound, "holds": value <= bound + INEQUALITY_SLACK}


def lifted_adversary_value(game: Game, adv: AdversaryLike, budget: int = ENUMERATION_BUDGET) -> float:
    """Exact winning probability of the k-query simulator adversary.

    The simulator runs ``adv`` with an independent uniform ``H'`` and with the
    game oracle as ``G``; its queries to ``G`` are the control updates. It wins
    exactly when it accepts for some set ``x_o``, and these events are
    disjoint, so the acceptances over all k-subsets are summed.
    """
    spec = as_spec(game)
    if not spec.image_only:
        raise ConfigurationError("the simulator adversary needs an image-only game")
    if oracle_count(spec.M, spec.N) ** 2 > budget:
        raise CapacityError(f"(N^M)^2 = {oracle_count(spec.M, spec.N) ** 2} exceeds budget {budget}")
    tables = list(enumerate_oracles(spec.M, spec.N, budget))
    subsets = list(itertools.combinations(range(spec.M), spec.k))
    total = 0.0
    for w, ch in spec.challenges:
        if not w:
            continue
        wrapped = wrap_with_readout(_resolve(adv, ch), spec.k)
        V = spec.predicate(ch)
        acc = 0.0
        for Hp in tables:
            for G in tables:
                acc += sum(sim_acceptance_by_xo(wrapped, Hp, G, subsets, V).values())
        total += w * acc / len(tables) ** 2
    return total


def lifted_adversary_check(game: Game, adv: AdversaryLike, budget: int = ENUMERATION_BUDGET) -> dict:
    spec = as_spec(game)
    value = game_value_exact(spec, adv, budget=budget)
    lifted = lifted_adversary_value(spec, adv, budget)
    q = _resolve(adv, spec.challenges[0][1]).query_count
    loss = loss_factor(q, spec.k)
    return {"game": spec.name, "q": q, "k": spec.k, "value": value, "lifted_value": lifted,
            "loss": float(loss), "holds": lifted >= value / loss - INEQUALITY_SLACK}


def mis_comparison(eps_mis: float, eps_dp: float, g: int, K: int) -> dict:
    """Reports ``eps_mis^{1/g} <= eps_dp^{1/g} + g/K`` without asserting it."""
    lhs = eps_mis ** (1 / g)
    rhs = eps_dp ** (1 / g) + g / K
    return {"lhs": lhs, "rhs": rhs, "relation_holds": lhs <= rhs + INEQUALITY_SLACK, "asserted": False}
