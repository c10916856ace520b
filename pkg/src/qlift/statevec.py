"""Dense mixed-radix state vectors over query, work and control registers.

Register 0 is the query input (dimension ``M``), register 1 the query output
(dimension ``N``), registers ``2..`` are work registers. An optional control
register, holding a subset ``S`` of inputs with ``|S| <= k``, sits on the last
array axis and is never touched by adversary gates.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import cached_property
from math import comb, prod
from typing import Callable, Iterable, Sequence

import numpy as np

from .constants import STATE_DIM_BUDGET, UNITARY_TOL
from .errors import CapacityError, ConfigurationError, ValidationError
from .oracle import OracleTable, tuple_equiv

INPUT = 0
OUTPUT = 1


@dataclass(frozen=True)
class RegisterLayout:
    input_dim: int
    output_dim: int
    work_dims: tuple[int, ...] = ()
    control_capacity: int = 0
    budget: int = field(default=STATE_DIM_BUDGET, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "work_dims", tuple(int(d) for d in self.work_dims))
        if self.input_dim < 1 or self.output_dim < 1 or any(d < 1 for d in self.work_dims):
            raise ConfigurationError("register dimensions must be positive")
        if self.control_capacity < 0:
            raise ConfigurationError("control capacity must be non-negative")
        if self.dim > self.budget:
            raise CapacityError(
                f"state dimension {self.dim} exceeds budget {self.budget}")

    @property
    def private_dims(self) -> tuple[int, ...]:
        return (self.input_dim, self.output_dim) + self.work_dims

    @property
    def num_registers(self) -> int:
        return 2 + len(self.work_dims)

    @property
    def work_dim(self) -> int:
        return prod(self.work_dims)

    @property
    def has_control(self) -> bool:
        return self.control_capacity > 0

    @property
    def control_dim(self) -> int:
        if not self.has_control:
            return 1
        return sum(comb(self.input_dim, i) for i in range(self.control_capacity + 1))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.private_dims + (self.control_dim,)

    @property
    def dim(self) -> int:
        return prod(self.private_dims) * self.control_dim

    @cached_property
    def subsets(self) -> tuple[frozenset, ...]:
        """Control basis: subsets ordered by size, then lexicographically."""
        if not self.has_control:
            return (frozenset(),)
        out = []
        for size in range(self.control_capacity + 1):
            out.extend(frozenset(c) for c in itertools.combinations(range(self.input_dim), size))
        return tuple(out)

    @cached_property
    def subset_index(self) -> dict:
        return {s: i for i, s in enumerate(self.subsets)}

    @cached_property
    def membership(self) -> np.ndarray:
        """``membership[x, s]`` is True iff input ``x`` lies in subset ``s``."""
        table = np.zeros((self.input_dim, self.control_dim), dtype=bool)
        for s, subset in enumerate(self.subsets):
            for x in subset:
                table[x, s] = True
        return table

    @cached_property
    def update_targets(self) -> np.ndarray:
        """Index of ``S | {x}`` for each ``(x, S)``, or -1 where the update aborts."""
        table = np.full((self.input_dim, self.control_dim), -1, dtype=np.int64)
        for s, subset in enumerate(self.subsets):
            if len(subset) >= self.control_capacity:
                continue
            for x in range(self.input_dim):
                if x not in subset:
                    table[x, s] = self.subset_index[subset | {x}]
        return table

    def with_control(self, capacity: int) -> "RegisterLayout":
        return RegisterLayout(self.input_dim, self.output_dim, self.work_dims, capacity, self.budget)

    def basis_index(self, x: int, y: int, work: Sequence[int] = (), subset: Iterable[int] = ()) -> int:
        work = tuple(work) or (0,) * len(self.work_dims)
        s = self.subset_index[frozenset(subset)]
        return int(np.ravel_multi_index((x, y) + tuple(work) + (s,), self.shape))

    def basis_tuple(self, index: int) -> tuple:
        """Inverse of :meth:`basis_index`: ``(x, y, work, S)``."""
        coords = np.unravel_index(index, self.shape)
        coords = tuple(int(c) for c in coords)
        return coords[0], coords[1], coords[2:-1], self.subsets[coords[-1]]

    def to_dict(self) -> dict:
        return {"input_dim": self.input_dim, "output_dim": self.output_dim,
                "work_dims": list(self.work_dims), "control_capacity": self.control_capacity}


@dataclass(frozen=True, eq=False)
class StateVector:
    layout: RegisterLayout
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=np.complex128)
        if amps.size != self.layout.dim:
            raise ConfigurationError(
                f"{amps.size} amplitudes do not fit layout of dimension {self.layout.dim}")
        object.__setattr__(self, "amplitudes", amps.reshape(self.layout.shape))

    @property
    def vector(self) -> np.ndarray:
        return self.amplitudes.reshape(-1)

    def with_amplitudes(self, amps: np.ndarray) -> "StateVector":
        return StateVector(self.layout, amps)

    def to_json(self, threshold: float = 0.0) -> str:
        """Debug dump of the non-negligible amplitudes."""
        entries = []
        for i in np.flatnonzero(np.abs(self.vector) > threshold):
            x, y, w, s = self.layout.basis_tuple(int(i))
            a = self.vector[i]
            entries.append({"x": x, "y": y, "work": list(w), "S": sorted(s),
                            "re": float(a.real), "im": float(a.imag)})
        return json.dumps({"layout": self.layout.to_dict(), "amplitudes": entries})


def init_state(layout: RegisterLayout) -> StateVector:
    amps = np.zeros(layout.shape, dtype=np.complex128)
    amps[(0,) * len(layout.shape)] = 1.0
    return StateVector(layout, amps)


def basis_state(layout: RegisterLayout, x: int, y: int = 0, work: Sequence[int] = (),
                subset: Iterable[int] = ()) -> StateVector:
    amps = np.zeros(layout.dim, dtype=np.complex128)
    amps[layout.basis_index(x, y, work, subset)] = 1.0
    return StateVector(layout, amps)


def norm_sq(state: StateVector) -> float:
    return float(np.vdot(state.amplitudes, state.amplitudes).real)


def is_unitary(matrix: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    matrix = np.asarray(matrix)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        return False
    return bool(np.allclose(matrix.conj().T @ matrix, np.eye(matrix.shape[0]), atol=tol, rtol=0))


@dataclass(frozen=True, eq=False)
class Gate:
    """A unitary acting on a subset of the private registers.

    Exactly one of ``matrix`` (dense, row index = output basis state) or
    ``perm`` (``perm[i]`` is the image of basis state ``i``) is set. The basis
    of the target subspace is row-major over ``targets`` in the given order.
    """

    targets: tuple[int, ...]
    matrix: np.ndarray | None = None
    perm: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        if (self.matrix is None) == (self.perm is None):
            raise ValidationError("a gate needs exactly one of matrix or perm")
        if len(set(self.targets)) != len(self.targets) or not self.targets:
            raise ValidationError(f"invalid gate targets {self.targets}")
        if self.matrix is not None:
            m = np.asarray(self.matrix, dtype=np.complex128)
            if not is_unitary(m):
                raise ValidationError("gate matrix is not unitary within tolerance")
            object.__setattr__(self, "matrix", m)
        else:
            p = np.asarray(self.perm, dtype=np.int64)
            if p.ndim != 1 or not np.array_equal(np.sort(p), np.arange(p.size)):
                raise ValidationError("perm is not a permutation")
            object.__setattr__(self, "perm", p)

    @property
    def size(self) -> int:
        return self.matrix.shape[0] if self.matrix is not None else self.perm.size

    def dense(self) -> np.ndarray:
        if self.matrix is not None:
            return self.matrix
        m = np.zeros((self.size, self.size), dtype=np.complex128)
        m[self.perm, np.arange(self.size)] = 1.0
        return m

    def inverse(self) -> "Gate":
        if self.matrix is not None:
            return Gate(self.targets, matrix=self.matrix.conj().T)
        inv = np.empty_like(self.perm)
        inv[self.perm] = np.arange(self.perm.size)
        return Gate(self.targets, perm=inv)

    def to_dict(self) -> dict:
        m = self.dense()
        return {"targets": list(self.targets),
                "real": m.real.tolist(), "imag": m.imag.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "Gate":
        m = np.asarray(data["real"]) + 1j * np.asarray(data["imag"])
        return cls(tuple(data["targets"]), matrix=m)


def permutation_gate(targets: Sequence[int], dims: Sequence[int],
                     fn: Callable[[tuple[int, ...]], tuple[int, ...]]) -> Gate:
    """Build a permutation gate from a basis map over the target registers."""
    dims = tuple(dims)
    size = prod(dims)
    perm = np.empty(size, dtype=np.int64)
    for i, coords in enumerate(itertools.product(*(range(d) for d in dims))):
        perm[i] = np.ravel_multi_index(tuple(fn(coords)), dims)
    return Gate(tuple(targets), perm=perm)


def _apply_gate(amps: np.ndarray, gate: Gate) -> np.ndarray:
    targets = list(gate.targets)
    front = list(range(len(targets)))
    moved = np.moveaxis(amps, targets, front)
    tshape = moved.shape[:len(targets)]
    if prod(tshape) != gate.size:
        raise ConfigurationError(
            f"gate of size {gate.size} does not match registers {targets} of dims {tshape}")
    flat = moved.reshape(gate.size, -1)
    if gate.matrix is not None:
        out = gate.matrix @ flat
    else:
        out = np.empty_like(flat)
        out[gate.perm] = flat
    return np.moveaxis(out.reshape(moved.shape), front, targets)


def apply_gates(state: StateVector, gates: Iterable[Gate]) -> StateVector:
    amps = state.amplitudes
    control_axis = len(state.layout.shape) - 1
    for gate in gates:
        if any(t < 0 or t >= control_axis for t in gate.targets):
            raise ConfigurationError(
                f"gate targets {gate.targets} outside private registers 0..{control_axis - 1}")
        amps = _apply_gate(amps, gate)
    return state.with_amplitudes(amps)


def apply_unitary(state: StateVector, U: np.ndarray | Gate,
                  targets: Sequence[int] | None = None) -> StateVector:
    """Apply ``U`` to the given private registers (all of them by default)."""
    if not isinstance(U, Gate):
        if targets is None:
            targets = range(state.layout.num_registers)
        U = Gate(tuple(targets), matrix=U)
    return apply_gates(state, [U])


def _shift_output(state: StateVector, shift: np.ndarray) -> StateVector:
    # shift has shape (M, C): output y -> y + shift[x, S] (mod N)
    layout = state.layout
    M, N = layout.input_dim, layout.output_dim
    ndim = len(layout.shape)
    idx_shape = [M, N] + [1] * (ndim - 3) + [layout.control_dim]
    y = np.arange(N).reshape(1, N, 1)
    src = (y - shift[:, None, :]) % N
    src = src.reshape(idx_shape)
    return state.with_amplitudes(np.take_along_axis(state.amplitudes, src, axis=1))


def apply_oracle_query(state: StateVector, H: OracleTable) -> StateVector:
    """``|x, y> -> |x, y + H(x) mod N>`` on the query registers."""
    layout = state.layout
    _check_oracle(layout, H)
    shift = np.repeat(H.as_array()[:, None], layout.control_dim, axis=1)
    return _shift_output(state, shift)


def apply_controlled_query(state: StateVector, H: OracleTable, G: OracleTable) -> StateVector:
    """Query ``H`` reprogrammed to ``G`` on the inputs held in the control register."""
    layout = state.layout
    if not layout.has_control:
        raise ConfigurationError("controlled query needs a control register")
    _check_oracle(layout, H)
    _check_oracle(layout, G)
    shift = np.where(layout.membership, G.as_array()[:, None], H.as_array()[:, None])
    return _shift_output(state, shift)


def apply_control_update(state: StateVector, G: OracleTable | None = None) -> StateVector:
    """Insert the query input into the control register, projecting out aborts.

    Branches whose input already lies in ``S``, or whose ``S`` is full, are
    removed, so the result may be subnormalized. ``G`` is accepted for
    symmetry with the controlled query; images are recovered from ``S`` by
    evaluating ``G`` later.
    """
    layout = state.layout
    if not layout.has_control:
        raise ConfigurationError("control update needs a control register")
    old = state.amplitudes
    new = np.zeros_like(old)
    targets = layout.update_targets
    for x in range(layout.input_dim):
        valid = np.flatnonzero(targets[x] >= 0)
        if valid.size:
            new[x][..., targets[x, valid]] = old[x][..., valid]
    return state.with_amplitudes(new)


@dataclass(frozen=True)
class OutputMap:
    """Where the outputs live once an adversary has finished.

    ``xs`` entries are ``(register, offset)``: the output input value is
    ``offset + content``. ``ys`` and ``z`` are plain register indices.
    """

    xs: tuple[tuple[int, int], ...] = ()
    ys: tuple[int, ...] = ()
    z: tuple[int, ...] = ()

    def __post_init__(self):
        xs = tuple((int(e), 0) if np.isscalar(e) else (int(e[0]), int(e[1])) for e in self.xs)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", tuple(int(r) for r in self.ys))
        object.__setattr__(self, "z", tuple(int(r) for r in self.z))

    @property
    def k(self) -> int:
        return len(self.xs)

    @property
    def registers(self) -> tuple[int, ...]:
        return tuple(sorted({r for r, _ in self.xs} | set(self.ys) | set(self.z)))

    def validate(self, layout: RegisterLayout, input_domain: int | None = None) -> None:
        n = layout.num_registers
        dims = layout.private_dims
        regs = [r for r, _ in self.xs] + list(self.ys) + list(self.z)
        if any(r < 0 or r >= n for r in regs):
            raise ConfigurationError(f"output map {self} addresses registers outside 0..{n - 1}")
        for r in self.ys:
            if dims[r] != layout.output_dim:
                raise ConfigurationError(f"y register {r} has dim {dims[r]} != N")
        if input_domain is not None:
            for r, off in self.xs:
                if off < 0 or off + dims[r] > input_domain:
                    raise ConfigurationError(f"x location {(r, off)} exceeds domain {input_domain}")

    def decode(self, values: dict) -> tuple[tuple[int, ...], tuple[int, ...], tuple[int, ...]]:
        xs = tuple(values[r] + off for r, off in self.xs)
        ys = tuple(values[r] for r in self.ys)
        z = tuple(values[r] for r in self.z)
        return xs, ys, z

    def to_dict(self) -> dict:
        return {"xs": [list(e) for e in self.xs], "ys": list(self.ys), "z": list(self.z)}

    @classmethod
    def from_dict(cls, data: dict) -> "OutputMap":
        return cls(tuple(tuple(e) for e in data.get("xs", ())), tuple(data.get("ys", ())),
                   tuple(data.get("z", ())))


@dataclass(frozen=True)
class Predicate:
    """A winning check ``V^H(xs, ys, z)``.

    ``evaluator(xs, ys, z, oracle)`` decides the relation; the projector
    additionally requires ``oracle(xs[i]) == ys[i]``.
    """

    arity: int
    evaluator: Callable[[tuple, tuple, tuple, OracleTable], bool]
    name: str = "predicate"

    def __call__(self, xs, ys, z, oracle: OracleTable) -> bool:
        if len(xs) != self.arity or len(ys) != self.arity:
            return False
        for x, y in zip(xs, ys):
            if not 0 <= x < oracle.domain_size or oracle.values[x] != y:
                return False
        return bool(self.evaluator(xs, ys, z, oracle))


def true_predicate(k: int) -> Predicate:
    return Predicate(k, lambda xs, ys, z, H: True, "true")


def false_predicate(k: int) -> Predicate:
    return Predicate(k, lambda xs, ys, z, H: False, "false")


def _register_mask(layout: RegisterLayout, registers: Sequence[int],
                   fn: Callable[[dict], bool]) -> np.ndarray:
    """Boolean mask over the state array, broadcast over untouched axes."""
    registers = tuple(sorted(set(registers)))
    dims = [layout.private_dims[r] for r in registers]
    small = np.zeros(dims, dtype=bool)
    for coords in itertools.product(*(range(d) for d in dims)):
        small[coords] = fn(dict(zip(registers, coords)))
    shape = [1] * len(layout.shape)
    for r, d in zip(registers, dims):
        shape[r] = d
    return small.reshape(shape)


def predicate_mask(layout: RegisterLayout, V: Predicate, H: OracleTable,
                   output_map: OutputMap) -> np.ndarray:
    if output_map.k != V.arity or len(output_map.ys) != V.arity:
        raise ConfigurationError(
            f"output map with {output_map.k} xs / {len(output_map.ys)} ys does not fit arity {V.arity}")
    output_map.validate(layout)

    def check(values):
        xs, ys, z = output_map.decode(values)
        return V(xs, ys, z, H)

    return _register_mask(layout, output_map.registers, check)


def project_predicate(state: StateVector, V: Predicate, H: OracleTable,
                      output_map: OutputMap) -> StateVector:
    mask = predicate_mask(state.layout, V, H, output_map)
    return state.with_amplitudes(state.amplitudes * mask)


def equiv_mask(layout: RegisterLayout, x_o: Sequence[int], output_map: OutputMap) -> np.ndarray:
    if output_map.k != len(x_o):
        raise ConfigurationError("output map arity does not match x_o")
    output_map.validate(layout)
    regs = [r for r, _ in output_map.xs]
    x_o = tuple(x_o)

    def check(values):
        xs = tuple(values[r] + off for r, off in output_map.xs)
        return tuple_equiv(xs, x_o)

    return _register_mask(layout, regs, check)


def project_output_equiv(state: StateVector, x_o: Sequence[int], output_map: OutputMap) -> StateVector:
    """Keep basis states whose output tuple is a permutation of ``x_o``."""
    mask = equiv_mask(state.layout, x_o, output_map)
    return state.with_amplitudes(state.amplitudes * mask)


def project_register(state: StateVector, register: int, value: int) -> StateVector:
    mask = _register_mask(state.layout, [register], lambda v: v[register] == value)
    return state.with_amplitudes(state.amplitudes * mask)


def project_control(state: StateVector, subset: Iterable[int]) -> StateVector:
    layout = state.layout
    s = layout.subset_index.get(frozenset(subset))
    amps = np.zeros_like(state.amplitudes)
    if s is not None:
        amps[..., s] = state.amplitudes[..., s]
    return state.with_amplitudes(amps)


def register_marginal(state: StateVector, register: int) -> np.ndarray:
    probs = np.abs(state.amplitudes) ** 2
    axes = tuple(i for i in range(probs.ndim) if i != register)
    return probs.sum(axis=axes)


def measure_control(state: StateVector) -> dict:
    """Probability of each control subset (unnormalized for subnormal states)."""
    probs = (np.abs(state.amplitudes) ** 2).reshape(-1, state.layout.control_dim).sum(axis=0)
    return {s: float(p) for s, p in zip(state.layout.subsets, probs)}


def output_distribution(state: StateVector, output_map: OutputMap) -> dict:
    """Joint probability of decoded ``(xs, ys, z)`` outcomes."""
    layout = state.layout
    output_map.validate(layout)
    regs = output_map.registers
    probs = np.abs(state.amplitudes) ** 2
    axes = tuple(i for i in range(probs.ndim) if i not in regs)
    marg = probs.sum(axis=axes)
    out: dict = {}
    for coords in zip(*np.nonzero(marg)):
        key = output_map.decode(dict(zip(regs, (int(c) for c in coords))))
        out[key] = out.get(key, 0.0) + float(marg[coords])
    return out


def _check_oracle(layout: RegisterLayout, H: OracleTable) -> None:
    if H.domain_size != layout.input_dim or H.range_size != layout.output_dim:
        raise ConfigurationError(
            f"oracle [{H.domain_size}]->[{H.range_size}] does not fit registers "
            f"({layout.input_dim}, {layout.output_dim})")
