"""Classical baselines: bounded fan-in boolean circuits, uniform guessing, blocks.

Wires of a :class:`BooleanCircuit` are numbered inputs first, then random
bits, then the outputs of each layer's gates in order.  The last layer's
gates are the circuit outputs (the inputs themselves when there are no
layers).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from . import gf2
from .circuit import GateKind, LayeredCircuit
from .geometry import VSTAR, extended_gd
from .stabcore import AffineSubspace, conditional_guess_probability, measurement_map, simulate


@dataclass(frozen=True)
class BoolGate:
    """Truth table indexed by the input bits, first input most significant."""

    table: tuple[int, ...]
    inputs: tuple[int, ...]

    def __post_init__(self):
        if len(self.table) != 1 << len(self.inputs):
            raise ValueError(f"table needs {1 << len(self.inputs)} entries, got {len(self.table)}")


AND = (0, 0, 0, 1)
OR = (0, 1, 1, 1)
XOR = (0, 1, 1, 0)
NOT = (1, 0)
COPY = (0, 1)


@dataclass
class BooleanCircuit:
    arity: int
    layers: list[list[BoolGate]]
    K: int
    n_random: int = 0

    def __post_init__(self):
        width = self.arity + self.n_random
        for depth, layer in enumerate(self.layers):
            for g in layer:
                if len(g.inputs) > self.K:
                    raise ValueError(f"gate in layer {depth} has fan-in {len(g.inputs)} > K={self.K}")
                if any(not 0 <= w < width for w in g.inputs):
                    raise ValueError(f"gate in layer {depth} reads a wire not produced by an earlier layer")
            width += len(layer)

    @property
    def depth(self) -> int:
        return len(self.layers)

    @cached_property
    def _offsets(self) -> list[int]:
        out = [self.arity + self.n_random]
        for layer in self.layers:
            out.append(out[-1] + len(layer))
        return out

    @property
    def n_outputs(self) -> int:
        return len(self.layers[-1]) if self.layers else self.arity

    def output_wire(self, index: int) -> int:
        if not 0 <= index < self.n_outputs:
            raise IndexError(f"output {index} out of range")
        return self._offsets[-2] + index if self.layers else index


def evaluate(bc: BooleanCircuit, x, random_bits=None) -> np.ndarray:
    """Outputs for one input (1-D) or a batch of inputs (2-D, one per row)."""
    x = np.asarray(x, dtype=np.uint8)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != bc.arity:
        raise ValueError(f"expected {bc.arity} input bits, got {x.shape[1]}")
    rnd = np.zeros((x.shape[0], bc.n_random), dtype=np.uint8) if random_bits is None else np.atleast_2d(
        np.asarray(random_bits, dtype=np.uint8)
    )
    if rnd.shape != (x.shape[0], bc.n_random):
        raise ValueError(f"expected {bc.n_random} random bits per input")
    wires = np.concatenate([x, rnd], axis=1) & 1
    for layer in bc.layers:
        outs = np.empty((x.shape[0], len(layer)), dtype=np.uint8)
        for k, g in enumerate(layer):
            idx = np.zeros(x.shape[0], dtype=np.int64)
            for w in g.inputs:
                idx = (idx << 1) | wires[:, w]
            outs[:, k] = np.asarray(g.table, dtype=np.uint8)[idx]
        wires = np.concatenate([wires, outs], axis=1)
    if bc.layers:
        res = wires[:, bc._offsets[-2] :]
    else:
        res = wires[:, : bc.arity]
    return res[0] if single else res


def _backward(bc: BooleanCircuit, wire: int) -> tuple[set[int], set[tuple[int, int]]]:
    n_in = bc.arity + bc.n_random
    offs = bc._offsets
    sources, gates = set(), set()
    stack = [wire]
    seen = set()
    while stack:
        w = stack.pop()
        if w in seen:
            continue
        seen.add(w)
        if w < n_in:
            sources.add(w)
            continue
        layer = int(np.searchsorted(offs, w, side="right")) - 1
        k = w - offs[layer]
        gates.add((layer, k))
        stack.extend(bc.layers[layer][k].inputs)
    return sources, gates


def light_cone(bc: BooleanCircuit, output_index: int) -> set[int]:
    """Input (and random) wires the output can depend on."""
    return _backward(bc, bc.output_wire(output_index))[0]


def used_gates(bc: BooleanCircuit) -> set[tuple[int, int]]:
    """``(layer, position)`` of every gate inside some output's light cone."""
    out: set[tuple[int, int]] = set()
    for i in range(bc.n_outputs):
        out |= _backward(bc, bc.output_wire(i))[1]
    return out


def random_circuit(
    arity: int, depth: int, width: int, K: int, rng: np.random.Generator, n_random: int = 0
) -> BooleanCircuit:
    """Layers of ``width`` gates with random tables and fan-in ``1..K`` from the previous layer."""
    layers = []
    prev = list(range(arity + n_random))
    nxt = arity + n_random
    for _ in range(depth):
        layer = []
        for _ in range(width):
            fan = int(rng.integers(1, min(K, len(prev)) + 1))
            ins = tuple(int(v) for v in rng.choice(prev, size=fan, replace=False))
            table = tuple(int(v) for v in rng.integers(0, 2, size=1 << fan))
            layer.append(BoolGate(table, ins))
        layers.append(layer)
        prev = list(range(nxt, nxt + width))
        nxt += width
    return BooleanCircuit(arity, layers, K, n_random)


# ---------------------------------------------------------------------------
# Uniform guessing


def random_guess_success(instance) -> float:
    """``2^-r``: chance that a uniformly random string is a valid output."""
    s = instance if isinstance(instance, AffineSubspace) else instance.subspace
    if not s.consistent:
        return 0.0
    return math.ldexp(1.0, -s.r)


# ---------------------------------------------------------------------------
# Block decomposition


@dataclass(frozen=True)
class BlockPartition:
    d: int
    b: int
    blocks_per_side: int
    assignment: np.ndarray = field(repr=False)
    inter_edges: tuple[tuple[int, int], ...] = field(repr=False)

    @property
    def n_blocks(self) -> int:
        return self.blocks_per_side**2

    def members(self, block: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == block)


def partition_blocks(grid, b: int) -> BlockPartition:
    """Tile the V1 lattice with ``b x b`` blocks.

    A V2 vertex joins the block of its cell's top-left corner; a VSTAR
    vertex joins the block of its host edge's lower-index endpoint.
    """
    d = grid if isinstance(grid, int) else grid.d
    if b < 1:
        raise ValueError("block side must be >= 1")
    eg = extended_gd(d)
    side = d**3
    per = -(-side // b)
    assign = np.empty(eg.n, dtype=np.int64)
    base = np.flatnonzero(eg.vclass != VSTAR)
    xy = np.floor(eg.coords[base]).astype(np.int64)
    assign[base] = (xy[:, 1] // b) * per + xy[:, 0] // b
    for w, (u, _) in eg.host.items():
        assign[w] = assign[u]
    inter = tuple((u, v) for u, v in eg.edges if assign[u] != assign[v])
    assign.setflags(write=False)
    return BlockPartition(d, b, per, assign, inter)


def _cut_cz(circuit: LayeredCircuit, part: BlockPartition):
    a = part.assignment
    for layer in circuit.layers:
        yield [g for g in layer if g.kind is GateKind.CZ and a[g.qubits[0]] != a[g.qubits[1]]]


def affected_qubits(instance, part: BlockPartition) -> np.ndarray:
    """Sorted qubits whose backward light cone contains a cut CZ gate."""
    c = instance.circuit
    taint = np.zeros(c.qubit_count, dtype=bool)
    for layer, cut in zip(c.layers, _cut_cz(c, part)):
        for g in cut:
            taint[list(g.qubits)] = True
        for g in layer:
            if len(g.qubits) == 2 and taint[list(g.qubits)].any():
                taint[list(g.qubits)] = True
    return np.flatnonzero(taint)


def affected_bound(depth: int, b: int) -> int:
    """Per-block cap ``4 D 2^D b`` on affected qubits (``D`` = circuit depth)."""
    return 4 * depth * 2**depth * b


def affected_per_block(instance, part: BlockPartition) -> np.ndarray:
    aff = affected_qubits(instance, part)
    return np.bincount(part.assignment[aff], minlength=part.n_blocks)


def cut_circuit(instance, part: BlockPartition) -> LayeredCircuit:
    """The compiled circuit with every inter-block CZ removed."""
    c = instance.circuit
    layers = []
    for layer, cut in zip(c.layers, _cut_cz(c, part)):
        drop = set(cut)
        layers.append([g for g in layer if g not in drop])
    return LayeredCircuit(c.qubit_count, layers, c.measure)


@dataclass
class BlockSimulator:
    """Cached sampler for one (instance, partition) pair.

    With the cut gates gone the state is a product over blocks, so one
    tableau run of the cut circuit equals independent per-block runs.
    """

    instance: object
    part: BlockPartition

    def __post_init__(self):
        self.affected = affected_qubits(self.instance, self.part)
        self.sampler = measurement_map(simulate(cut_circuit(self.instance, self.part)))
        s = self.instance.subspace
        aff = set(self.affected.tolist())
        order = list(self.affected) + [q for q in range(s.m) if q not in aff]
        red, rhs, piv = gf2.echelon(s.C, s.m, s.b, column_order=order)
        n_aff = sum(1 for q in piv if q in aff)
        # echelon rows after the affected pivots vanish on every affected column
        self.free_rank = n_aff
        self.checks = red[n_aff : len(piv)]
        self.check_rhs = rhs[n_aff : len(piv)]

    def sample(self, rng: np.random.Generator, shots: int = 1) -> np.ndarray:
        z = self.sampler.sample(rng, shots)
        if self.affected.size:
            z[:, self.affected] = rng.integers(0, 2, size=(shots, self.affected.size), dtype=np.uint8)
        return z

    def extendable(self, z: np.ndarray) -> np.ndarray:
        """Whether the unaffected bits of each row complete to a valid string."""
        z = np.atleast_2d(z)
        if len(self.checks) == 0:
            return np.ones(len(z), dtype=bool)
        got = gf2.parity(gf2.pack_bits(z)[:, None, :] & self.checks[None, :, :])
        return ~(got ^ self.check_rhs[None, :]).any(axis=1)

    def success(self, z: np.ndarray) -> np.ndarray:
        """Exact per-sample success of guessing the affected bits uniformly."""
        return np.where(self.extendable(z), math.ldexp(1.0, -self.free_rank), 0.0)


def block_simulate(instance, part: BlockPartition, rng: np.random.Generator, shots: int | None = None) -> np.ndarray:
    """Cut-circuit outputs with uniformly random bits on the affected qubits."""
    z = BlockSimulator(instance, part).sample(rng, 1 if shots is None else shots)
    return z[0] if shots is None else z


def block_sample_success(instance, part: BlockPartition, z) -> float:
    """Exact success of one block-simulation sample, by GF(2) counting."""
    aff = affected_qubits(instance, part)
    fixed = {q: int(z[q]) for q in range(len(z)) if q not in set(aff.tolist())}
    return conditional_guess_probability(instance.subspace, fixed, aff)


def block_success(instance, part: BlockPartition, trials: int, rng: np.random.Generator) -> tuple[float, float]:
    if trials < 1:
        raise ValueError("trials must be >= 1")
    sim = BlockSimulator(instance, part)
    vals = sim.success(sim.sample(rng, trials))
    se = float(vals.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return float(vals.mean()), se
