"""Query adversaries as gate sequences interleaved with oracle queries.

An :class:`AdversaryCircuit` with ``q`` queries evaluates
``post . O U_q . ... . O U_1 |0>`` where each ``U_i`` is a list of gates over
the adversary's private registers. ``post`` is an optional trailing step
used by adversaries that process the last answer before producing output.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import asin, prod, sqrt
from typing import Callable, Mapping, Sequence, Union

import numpy as np

from .errors import ConfigurationError, ValidationError
from .oracle import OracleTable
from .statevec import (Gate, INPUT, OUTPUT, OutputMap, RegisterLayout, StateVector,
                       apply_gates, apply_oracle_query, init_state, permutation_gate)

QUERY = object()


@dataclass(frozen=True, eq=False)
class AdversaryCircuit:
    input_dim: int
    output_dim: int
    work_dims: tuple[int, ...]
    steps: tuple[tuple[Gate, ...], ...]
    post: tuple[Gate, ...] = ()
    output_map: OutputMap = field(default_factory=OutputMap)
    name: str = "adversary"

    def __post_init__(self):
        object.__setattr__(self, "work_dims", tuple(int(d) for d in self.work_dims))
        object.__setattr__(self, "steps", tuple(tuple(s) for s in self.steps))
        object.__setattr__(self, "post", tuple(self.post))
        layout = self.layout()
        n = layout.num_registers
        for gate in [g for s in self.steps for g in s] + list(self.post):
            if any(t >= n for t in gate.targets):
                raise ConfigurationError(f"gate targets {gate.targets} outside {n} registers")
            if gate.size != prod(layout.private_dims[t] for t in gate.targets):
                raise ConfigurationError(f"gate size {gate.size} mismatches targets {gate.targets}")
        self.output_map.validate(layout, self.input_dim)

    @property
    def query_count(self) -> int:
        return len(self.steps)

    @property
    def q(self) -> int:
        return self.query_count

    @property
    def private_dims(self) -> tuple[int, ...]:
        return (self.input_dim, self.output_dim) + self.work_dims

    def layout(self, control_capacity: int = 0) -> RegisterLayout:
        return RegisterLayout(self.input_dim, self.output_dim, self.work_dims, control_capacity)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "input_dim": self.input_dim,
            "output_dim": self.output_dim,
            "work_dims": list(self.work_dims),
            "steps": [[g.to_dict() for g in step] for step in self.steps],
            "post": [g.to_dict() for g in self.post],
            "output_map": self.output_map.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "AdversaryCircuit":
        return cls(
            int(data["input_dim"]), int(data["output_dim"]), tuple(data["work_dims"]),
            tuple(tuple(Gate.from_dict(g) for g in step) for step in data["steps"]),
            tuple(Gate.from_dict(g) for g in data.get("post", [])),
            OutputMap.from_dict(data["output_map"]), data.get("name", "adversary"))

    @classmethod
    def from_json(cls, text: str) -> "AdversaryCircuit":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True, eq=False)
class WrappedAdversary:
    """``base`` followed by ``k`` read-out queries computing ``ys = H(xs)``."""

    base: AdversaryCircuit
    k: int
    circuit: AdversaryCircuit

    @property
    def total_queries(self) -> int:
        return self.circuit.query_count

    @property
    def q(self) -> int:
        return self.base.query_count

    @property
    def output_map(self) -> OutputMap:
        return self.circuit.output_map

    def layout(self, control_capacity: int = 0) -> RegisterLayout:
        return self.circuit.layout(control_capacity)


Adversary = Union[AdversaryCircuit, WrappedAdversary]


def circuit_of(adv: Adversary) -> AdversaryCircuit:
    return adv.circuit if isinstance(adv, WrappedAdversary) else adv


def evolve(circuit: AdversaryCircuit, state: StateVector,
           query: Callable[[int, StateVector], StateVector]) -> StateVector:
    """Run the circuit, delegating the i-th query (1-based) to ``query``."""
    for i, step in enumerate(circuit.steps, start=1):
        state = apply_gates(state, step)
        state = query(i, state)
    return apply_gates(state, circuit.post)


def run(adv: Adversary, H: OracleTable, layout: RegisterLayout | None = None) -> StateVector:
    """Final state of the adversary interacting with ``H``."""
    circuit = circuit_of(adv)
    if layout is None:
        layout = circuit.layout()
    elif layout.private_dims != circuit.private_dims:
        raise ConfigurationError(
            f"layout registers {layout.private_dims} do not match circuit {circuit.private_dims}")
    return evolve(circuit, init_state(layout), lambda i, s: apply_oracle_query(s, H))


def _from_sequence(seq: list, input_dim: int, output_dim: int, work_dims: Sequence[int],
                   output_map: OutputMap, name: str) -> AdversaryCircuit:
    steps, current = [], []
    for item in seq:
        if item is QUERY:
            steps.append(tuple(current))
            current = []
        else:
            current.append(item)
    return AdversaryCircuit(input_dim, output_dim, tuple(work_dims), tuple(steps),
                            tuple(current), output_map, name)


def _sequence(circuit: AdversaryCircuit) -> list:
    seq = []
    for step in circuit.steps:
        seq.extend(step)
        seq.append(QUERY)
    seq.extend(circuit.post)
    return seq


def swap_gate(a: int, b: int, dim: int) -> Gate:
    return permutation_gate((a, b), (dim, dim), lambda c: (c[1], c[0]))


def load_gate(dims: Sequence[int], register: int, offset: int) -> Gate:
    """Add ``offset + content(register)`` into the query input (mod its dim)."""
    D = dims[INPUT]
    return permutation_gate((INPUT, register), (D, dims[register]),
                            lambda c: ((c[0] + offset + c[1]) % D, c[1]))


def wrap_with_readout(adv: AdversaryCircuit, k: int) -> WrappedAdversary:
    """Append ``k`` queries that copy ``H(x_i)`` into fresh ``y`` registers.

    Between queries only routing permutations are inserted: the query input is
    parked in a fresh register, each ``x_i`` is loaded into the cleared query
    input, and the query output is swapped with a fresh ``y_i`` register.
    """
    if isinstance(adv, WrappedAdversary):
        raise ConfigurationError("adversary is already wrapped")
    omap = adv.output_map
    if k > omap.k:
        raise ConfigurationError(f"k={k} exceeds the {omap.k} exposed outputs")
    if k == 0:
        return WrappedAdversary(adv, 0, adv)
    M, N = adv.input_dim, adv.output_dim
    base_regs = 2 + len(adv.work_dims)
    xs = list(omap.xs[:k])
    z = list(omap.z)
    direct = k == 1 and xs[0] == (INPUT, 0)
    work = list(adv.work_dims)
    seq = _sequence(adv)
    if direct:
        y_regs = [base_regs]
        work.append(N)
    else:
        park = base_regs
        work.append(M)
        y_regs = list(range(base_regs + 1, base_regs + 1 + k))
        work.extend([N] * k)
        xs = [(park if r == INPUT else r, off) for r, off in xs]
        z = [park if r == INPUT else r for r in z]
    dims = (M, N) + tuple(work)
    if not direct:
        seq.append(swap_gate(INPUT, park, M))
    for i in range(k):
        if not direct:
            seq.append(load_gate(dims, *xs[i]))
        seq.append(swap_gate(OUTPUT, y_regs[i], N))
        seq.append(QUERY)
        seq.append(swap_gate(OUTPUT, y_regs[i], N))
        if not direct:
            seq.append(load_gate(dims, *xs[i]).inverse())
    out = OutputMap(tuple(xs), tuple(y_regs), tuple(z))
    circuit = _from_sequence(seq, M, N, work, out, f"{adv.name}+readout{k}")
    return WrappedAdversary(adv, k, circuit)


def product_adversary(advs: Sequence[AdversaryCircuit], offsets: Sequence[int],
                      input_dim: int, name: str = "product") -> AdversaryCircuit:
    """Run each adversary in turn on its own registers, sharing the query bus.

    Copy ``j`` sees inputs ``offsets[j] + x``; with disjoint offsets this runs
    independent copies on disjoint slices of a composite domain, with equal
    offsets the copies share one oracle.
    """
    if len(advs) != len(offsets) or not advs:
        raise ConfigurationError("need one offset per adversary")
    N = advs[0].output_dim
    work: list[int] = []
    bases = []
    for adv in advs:
        if adv.output_dim != N:
            raise ConfigurationError("all copies need the same range")
        bases.append(2 + len(work))
        work.extend(adv.private_dims)
    dims = (input_dim, N) + tuple(work)
    seq: list = []
    xs, z = [], []
    for adv, base, off in zip(advs, bases, offsets):
        if off < 0 or off + adv.input_dim > input_dim:
            raise ConfigurationError(f"slice at offset {off} exceeds composite domain {input_dim}")
        remap = {r: base + r for r in range(2 + len(adv.work_dims))}
        load = load_gate(dims, remap[INPUT], off)
        swap = swap_gate(OUTPUT, remap[OUTPUT], N)
        for item in _sequence(adv):
            if item is QUERY:
                seq.extend([load, swap, QUERY, swap, load.inverse()])
            else:
                seq.append(_retarget(item, remap))
        xs.extend((remap[r], o + off) for r, o in adv.output_map.xs)
        z.extend(remap[r] for r in adv.output_map.z)
    return _from_sequence(seq, input_dim, N, work, OutputMap(tuple(xs), (), tuple(z)), name)


def _retarget(gate: Gate, remap: Mapping[int, int]) -> Gate:
    targets = tuple(remap[t] for t in gate.targets)
    if gate.matrix is not None:
        return Gate(targets, matrix=gate.matrix)
    return Gate(targets, perm=gate.perm)


def dft(d: int) -> np.ndarray:
    j = np.arange(d)
    return np.exp(2j * np.pi * np.outer(j, j) / d) / sqrt(d)


def diffusion(d: int) -> np.ndarray:
    s = np.full((d, 1), 1 / sqrt(d))
    return 2 * (s @ s.T) - np.eye(d)


def grover(M: int, target_predicate: Callable[[int], bool], iterations: int,
           N: int = 2) -> AdversaryCircuit:
    """Grover search with the phase flip hard-coded from ``target_predicate``.

    The query output register is held in the uniform superposition, which every
    ``y -> y + H(x)`` shift fixes, so the ``iterations`` oracle queries leave
    the search register untouched.
    """
    if M < 2:
        raise ValidationError("Grover needs M >= 2")
    if iterations < 0:
        raise ValidationError("iterations must be >= 0")
    flip = np.diag([-1.0 if target_predicate(x) else 1.0 for x in range(M)])
    prep = [Gate((INPUT,), matrix=dft(M)), Gate((OUTPUT,), matrix=dft(N))]
    iterate = [Gate((INPUT,), matrix=flip), Gate((INPUT,), matrix=diffusion(M))]
    steps = ([tuple(prep + iterate)] + [tuple(iterate)] * (iterations - 1)) if iterations else []
    post = () if iterations else (prep[0],)
    return AdversaryCircuit(M, N, (), tuple(steps), post, OutputMap(((INPUT, 0),)),
                            f"grover(t={iterations})")


def grover_search(M: int, N: int, iterations: int) -> AdversaryCircuit:
    """Grover search for a preimage of 0 that uses the oracle for the phase.

    For ``N == 2`` the output register holds ``|->`` and each iteration costs
    one query (phase kickback). Otherwise each iteration computes ``H(x)``,
    flips the phase on ``0``, negates and queries again to uncompute: two
    queries per iteration.
    """
    if M < 2:
        raise ValidationError("Grover needs M >= 2")
    if iterations < 0:
        raise ValidationError("iterations must be >= 0")
    prep_in = Gate((INPUT,), matrix=dft(M))
    diff = Gate((INPUT,), matrix=diffusion(M))
    seq: list = []
    if N == 2:
        seq += [prep_in, Gate((OUTPUT,), perm=np.array([1, 0])), Gate((OUTPUT,), matrix=dft(2))]
        for _ in range(iterations):
            seq += [QUERY, diff]
    else:
        phase_neg = Gate((OUTPUT,), matrix=np.diag([-1.0] + [1.0] * (N - 1))[:, (-np.arange(N)) % N])
        seq.append(prep_in)
        for _ in range(iterations):
            seq += [QUERY, phase_neg, QUERY, diff]
    return _from_sequence(seq, M, N, (), OutputMap(((INPUT, 0),)), f"grover_search(t={iterations})")


def grover_success(M: int, marked: int, iterations: int) -> float:
    theta = asin(sqrt(marked / M))
    return float(np.sin((2 * iterations + 1) * theta) ** 2)


# ---------------------------------------------------------------------------
# classical decision trees


@dataclass(frozen=True)
class Leaf:
    xs: tuple[int, ...]
    z: tuple[int, ...] = ()


@dataclass(frozen=True)
class Query:
    x: int
    children: Mapping[int, "Node"]


Node = Union[Leaf, Query]


def parse_tree(spec) -> Node:
    """Build a tree from nested dicts: ``{"query": x, "children": {y: ...}}`` or ``{"output": [...]}``."""
    if isinstance(spec, (Leaf, Query)):
        return spec
    if not isinstance(spec, Mapping):
        raise ValidationError(f"tree node must be a mapping, got {spec!r}")
    if "output" in spec:
        return Leaf(tuple(int(v) for v in spec["output"]), tuple(int(v) for v in spec.get("z", ())))
    if "query" in spec:
        children = {int(y): parse_tree(c) for y, c in spec.get("children", {}).items()}
        return Query(int(spec["query"]), children)
    raise ValidationError(f"tree node needs 'query' or 'output': {spec!r}")


def tree_depth(node: Node) -> int:
    if isinstance(node, Leaf):
        return 0
    return 1 + max((tree_depth(c) for c in node.children.values()), default=0)


def _validate_tree(node: Node, M: int, N: int) -> tuple[int, int]:
    leaves = []

    def visit(n):
        if isinstance(n, Leaf):
            leaves.append(n)
            if any(not 0 <= x < M for x in n.xs):
                raise ValidationError(f"leaf output {n.xs} outside [0, {M})")
            return
        if not 0 <= n.x < M:
            raise ValidationError(f"query point {n.x} outside [0, {M})")
        if set(n.children) != set(range(N)):
            raise ValidationError(f"query node on {n.x} must branch on every answer 0..{N - 1}")
        for c in n.children.values():
            visit(c)

    visit(node)
    ks = {len(l.xs) for l in leaves}
    zs = {len(l.z) for l in leaves}
    if len(ks) != 1 or len(zs) != 1:
        raise ValidationError("all leaves must output the same number of values")
    return ks.pop(), zs.pop()


def _walk(node: Node, answers: Sequence[int]) -> tuple[Node, int]:
    """Follow ``answers``; return the node reached and how many answers were consumed."""
    used = 0
    for a in answers:
        if isinstance(node, Leaf):
            break
        node = node.children[a]
        used += 1
    return node, used


def _point(root: Node, answers: Sequence[int]) -> int:
    node, _ = _walk(root, answers)
    return node.x if isinstance(node, Query) else 0


def classical_strategy(tree, M: int, N: int, q: int | None = None,
                       z_dims: Sequence[int] = ()) -> AdversaryCircuit:
    """Reversible permutation-circuit realization of a deterministic decision tree.

    Each answer is moved into its own history register before the next query
    point is computed from the history, so every ``U_i`` is a basis
    permutation. Paths shorter than ``q`` pad with dummy queries on input 0.
    """
    root = parse_tree(tree)
    depth = tree_depth(root)
    q = depth if q is None else q
    if depth > q:
        raise ValidationError(f"tree depth {depth} exceeds query budget {q}")
    k, z_len = _validate_tree(root, M, N)
    z_dims = tuple(z_dims)
    if z_len and len(z_dims) != z_len:
        raise ValidationError("z_dims must describe every z entry")
    hist = list(range(2, 2 + q))
    xregs = list(range(2 + q, 2 + q + k))
    zregs = list(range(2 + q + k, 2 + q + k + z_len))
    work = [N] * q + [M] * k + list(z_dims)
    steps = []
    for i in range(1, q + 1):
        gates = []
        if i > 1:
            gates.append(swap_gate(OUTPUT, hist[i - 2], N))
        h_regs = hist[:i - 1]

        def move(c, i=i):
            answers = c[1:]
            x = c[0] - (_point(root, answers[:i - 2]) if i > 1 else 0) + _point(root, answers)
            return (x % M,) + tuple(answers)

        gates.append(permutation_gate([INPUT] + h_regs, [M] + [N] * len(h_regs), move))
        steps.append(tuple(gates))
    post = []
    if q:
        post.append(swap_gate(OUTPUT, hist[q - 1], N))
    out_regs = [INPUT] + hist + xregs + zregs
    out_dims = [M] + [N] * q + [M] * k + list(z_dims)

    def finish(c):
        answers = c[1:1 + q]
        leaf, _ = _walk(root, answers)
        x = (c[0] - _point(root, answers[:q - 1])) % M if q else c[0]
        xs = tuple((v + t) % M for v, t in zip(c[1 + q:1 + q + k], leaf.xs))
        zv = tuple((v + t) % d for v, t, d in zip(c[1 + q + k:], leaf.z, z_dims))
        return (x,) + tuple(answers) + xs + zv

    post.append(permutation_gate(out_regs, out_dims, finish))
    omap = OutputMap(tuple((r, 0) for r in xregs), (), tuple(zregs))
    return AdversaryCircuit(M, N, tuple(work), tuple(steps), tuple(post), omap, "classical")


def guess_adversary(M: int, N: int, xs: Sequence[int], q: int = 0) -> AdversaryCircuit:
    """Outputs the fixed tuple ``xs`` (after ``q`` dummy queries)."""
    adv = classical_strategy({"output": list(xs)}, M, N, q=q)
    return AdversaryCircuit(adv.input_dim, adv.output_dim, adv.work_dims, adv.steps, adv.post,
                            adv.output_map, f"guess{tuple(xs)}")


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / sqrt(2)
    Q, R = np.linalg.qr(z)
    phases = np.diag(R) / np.abs(np.diag(R))
    return Q * phases


def random_circuit(seed, q: int, M: int, N: int, k: int = 1, work_dim: int = 1,
                   final_unitary: bool = True) -> AdversaryCircuit:
    """Seeded random adversary: every step is one unitary over all private registers.

    ``x_1`` is read from the query input; ``x_2..x_k`` from extra registers of
    dimension ``M``.
    """
    rng = np.random.default_rng(seed)
    work = [M] * (k - 1) + ([work_dim] if work_dim > 1 else [])
    dims = (M, N) + tuple(work)
    d = prod(dims)
    targets = tuple(range(len(dims)))
    steps = tuple((Gate(targets, matrix=random_unitary(d, rng)),) for _ in range(q))
    post = (Gate(targets, matrix=random_unitary(d, rng)),) if final_unitary else ()
    xs = ((INPUT, 0),) + tuple((2 + i, 0) for i in range(k - 1))
    return AdversaryCircuit(M, N, tuple(work), steps, post, OutputMap(xs), f"random(seed={seed},q={q})")
