"""The graph-state relation, its direct-product amplification, and losses.

An input is a ``k x k`` bit matrix ``A`` indexed ``A[i, j]`` with ``i`` the
horizontal and ``j`` the vertical position of the V2 vertex it controls.
Serialised inputs are row-major over ``A[i, j]`` (``j`` varies fastest).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from decimal import Decimal, ROUND_CEILING, localcontext
from functools import lru_cache
from typing import Protocol, Sequence

import numpy as np

from . import gf2
from .circuit import LayeredCircuit
from .geometry import GridSpec, build_graph_state_circuit, extended_gd
from .stabcore import (
    AffineSubspace,
    OutcomeMap,
    extract_affine_subspace,
    measurement_map,
    member,
    member_many,
    simulate,
)


def _grid(grid) -> GridSpec:
    return grid if isinstance(grid, GridSpec) else GridSpec(int(grid))


def _check_A(grid: GridSpec, A) -> np.ndarray:
    A = np.asarray(A, dtype=np.uint8)
    if A.shape != (grid.k, grid.k):
        raise ValueError(f"A must be {grid.k}x{grid.k} for d={grid.d}, got {A.shape}")
    if A.max(initial=0) > 1:
        raise ValueError("A must be a 0/1 matrix")
    return A


def random_input(grid, rng: np.random.Generator) -> np.ndarray:
    grid = _grid(grid)
    return rng.integers(0, 2, size=(grid.k, grid.k), dtype=np.uint8)


def measurement_bases(grid, A) -> tuple[str, ...]:
    """Y on V2 vertex ``u_ij`` when ``A[i, j] = 1``; X everywhere else."""
    grid = _grid(grid)
    A = _check_A(grid, A)
    eg = extended_gd(grid.d)
    bases = ["X"] * eg.n
    for v, (i, j) in eg.u_label.items():
        if A[i, j]:
            bases[v] = "Y"
    return tuple(bases)


@lru_cache(maxsize=4)
def _graph_state_circuit(d: int) -> LayeredCircuit:
    return build_graph_state_circuit(extended_gd(d))


def compile_process(grid, A) -> LayeredCircuit:
    """Graph-state layers, S-dagger layer, H layer, then Z readout of every vertex."""
    grid = _grid(grid)
    base = _graph_state_circuit(grid.d)
    c = LayeredCircuit(base.qubit_count, [list(layer) for layer in base.layers], measurement_bases(grid, A))
    return c.with_basis_change()


@dataclass
class RelationInstance:
    grid: GridSpec
    A: np.ndarray
    bases: tuple[str, ...]
    circuit: LayeredCircuit
    _subspace: AffineSubspace | None = field(default=None, repr=False)
    _sampler: OutcomeMap | None = field(default=None, repr=False)

    @property
    def m(self) -> int:
        return self.circuit.qubit_count

    @property
    def column_order(self) -> np.ndarray:
        return extended_gd(self.grid.d).spatial_order()

    @property
    def subspace(self) -> AffineSubspace:
        if self._subspace is None:
            self._subspace = _cached_subspace(self.grid.d, self.A.tobytes())
        return self._subspace

    @property
    def sampler(self) -> OutcomeMap:
        """Noiseless outcome map from sequential tableau measurement."""
        if self._sampler is None:
            self._sampler = measurement_map(simulate(self.circuit), consume=True)
        return self._sampler

    def to_json(self, include_subspace: bool = False) -> str:
        doc = {"d": self.grid.d, "A": "".join(str(int(b)) for b in self.A.reshape(-1))}
        if include_subspace:
            s = self.subspace
            doc["C"] = [_hex_row(row, s.m) for row in s.matrix]
            doc["b"] = "".join(str(int(v)) for v in s.b)
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "RelationInstance":
        doc = json.loads(text)
        grid = GridSpec(int(doc["d"]))
        bits = np.array([int(ch) for ch in doc["A"]], dtype=np.uint8)
        if bits.size != grid.k**2:
            raise ValueError(f"A needs {grid.k ** 2} bits, got {bits.size}")
        inst = make_instance(grid, bits.reshape(grid.k, grid.k))
        if "C" in doc:
            m = inst.m
            C = np.array([_unhex_row(h, m) for h in doc["C"]], dtype=np.uint8).reshape(-1, m)
            b = np.array([int(ch) for ch in doc.get("b", "")], dtype=np.uint8)
            inst._subspace = AffineSubspace.from_equations(C, b)
        return inst


def _hex_row(bits: np.ndarray, m: int) -> str:
    return int("".join(str(int(b)) for b in bits) or "0", 2).to_bytes((m + 7) // 8, "big").hex()


def _unhex_row(text: str, m: int) -> list[int]:
    return [int(ch) for ch in bin(int(text, 16))[2:].zfill(m)[-m:]]


def make_instance(grid, A) -> RelationInstance:
    grid = _grid(grid)
    A = _check_A(grid, A).copy()
    A.setflags(write=False)
    return RelationInstance(grid, A, measurement_bases(grid, A), compile_process(grid, A))


@lru_cache(maxsize=256)
def _cached_subspace(d: int, a_bytes: bytes) -> AffineSubspace:
    grid = GridSpec(d)
    A = np.frombuffer(a_bytes, dtype=np.uint8).reshape(grid.k, grid.k)
    t = simulate(compile_process(grid, A))
    return extract_affine_subspace(t, column_order=extended_gd(d).spatial_order())


def relation_subspace(grid, A) -> AffineSubspace:
    """Λ_d(A) as ``{z : C z = b}``."""
    grid = _grid(grid)
    return _cached_subspace(grid.d, _check_A(grid, A).tobytes())


def sample_quantum(instance: RelationInstance, rng: np.random.Generator, noise=None, shots: int = 1) -> np.ndarray:
    """Outputs of the (optionally noisy) quantum process, shape ``(shots, m)``.

    The noiseless part is drawn first, so ``p = 0`` reproduces the noiseless
    draws exactly for a fixed seed.
    """
    z = instance.sampler.sample(rng, shots)
    if noise is not None and noise.p > 0:
        from .noise import sample_frames

        z = z ^ sample_frames(instance.circuit, noise, rng, shots)
    return z


# ---------------------------------------------------------------------------
# Amplification


@dataclass(frozen=True)
class AmplificationParams:
    epsilon: float
    l: float
    t: int
    n_e: int
    m_e: int

    @property
    def n(self) -> int:
        return self.n_e * self.t

    @property
    def m(self) -> int:
        return self.m_e * self.t


def amplification_params(epsilon: float, grid) -> AmplificationParams:
    """Copies ``t = ceil((6 m_e n_e^(1/8) + 2)^l)`` with ``l = (17/eps - 8)/9``."""
    if not 0 < epsilon <= 1:
        raise ValueError("epsilon must lie in (0, 1]")
    grid = _grid(grid)
    l = (17 / epsilon - 8) / 9
    base = 6 * grid.m_e * grid.n_e ** (1 / 8) + 2
    log10_t = l * math.log10(base)
    if log10_t < 15:
        t = math.ceil(base**l)
    else:
        with localcontext() as ctx:
            ctx.prec = int(log10_t) + 30
            exact = (Decimal(6 * grid.m_e) * Decimal(grid.n_e).sqrt().sqrt().sqrt() + 2) ** (
                (Decimal(17) / Decimal(epsilon) - 8) / 9
            )
            t = int(exact.to_integral_value(rounding=ROUND_CEILING))
    return AmplificationParams(epsilon, l, max(t, 1), grid.n_e, grid.m_e)


def verify_product(instances: Sequence[RelationInstance], z_concat) -> bool:
    """Every block of the concatenated output satisfies its own instance."""
    z = np.asarray(z_concat, dtype=np.uint8).reshape(-1)
    total = sum(inst.m for inst in instances)
    if z.size != total:
        raise ValueError(f"expected {total} bits, got {z.size}")
    pos = 0
    ok = True
    for inst in instances:
        ok &= member(inst.subspace, z[pos : pos + inst.m])
        pos += inst.m
    return bool(ok)


# ---------------------------------------------------------------------------
# Strategies and losses


class Strategy(Protocol):
    def sample(self, instance: RelationInstance, rng: np.random.Generator, shots: int) -> np.ndarray: ...


@dataclass
class QuantumStrategy:
    noise: object | None = None

    def sample(self, instance, rng, shots):
        return sample_quantum(instance, rng, self.noise, shots)


class UniformGuessStrategy:
    """Uniformly random output string; success is exactly ``2^-r``."""

    def sample(self, instance, rng, shots):
        return rng.integers(0, 2, size=(shots, instance.m), dtype=np.uint8)

    def exact_success(self, instance) -> float:
        return math.ldexp(1.0, -instance.subspace.r)


@dataclass
class FixedStrategy:
    output: np.ndarray

    def sample(self, instance, rng, shots):
        return np.repeat(np.asarray(self.output, dtype=np.uint8)[None, :], shots, axis=0)

    def exact_success(self, instance) -> float:
        return float(member(instance.subspace, self.output))


def loss_probability(
    strategy,
    instances: Sequence[RelationInstance],
    trials: int,
    rng: np.random.Generator,
    exact: bool = False,
) -> tuple[float, float]:
    """``1 - mean success`` over the given inputs, with a standard error.

    With ``exact=True`` the strategy's per-input ``exact_success`` is averaged
    instead of sampling (standard error then reflects only input spread).
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if exact:
        vals = np.array([strategy.exact_success(inst) for inst in instances], dtype=float)
        se = vals.std(ddof=1) / math.sqrt(len(vals)) if len(vals) > 1 else 0.0
        return float(1 - vals.mean()), float(se)
    hits = np.concatenate(
        [member_many(inst.subspace, strategy.sample(inst, rng, trials)) for inst in instances]
    ).astype(float)
    se = hits.std(ddof=1) / math.sqrt(hits.size) if hits.size > 1 else 0.0
    return float(1 - hits.mean()), float(se)


def loss_kl(distribution: dict, target) -> float:
    """``KL(p_Q || p_C)`` with ``p_Q`` uniform over the valid outputs.

    ``distribution`` maps output tuples to probabilities; ``target`` is a
    :class:`RelationInstance` or an :class:`AffineSubspace` small enough to
    enumerate.  Returns ``inf`` when a valid output has zero probability.
    """
    total = float(sum(distribution.values()))
    if abs(total - 1) > 1e-9 or any(v < 0 for v in distribution.values()):
        raise ValueError(f"distribution must be normalised, sums to {total}")
    s = target.subspace if isinstance(target, RelationInstance) else target
    valid = s.enumerate()
    q = 1.0 / len(valid)
    kl = 0.0
    for y in valid:
        pc = distribution.get(tuple(int(v) for v in y), 0.0)
        if pc <= 0:
            return math.inf
        kl += q * math.log(q / pc)
    return kl


def exact_success(distribution: dict, target) -> float:
    """Probability mass a distribution puts on valid outputs."""
    s = target.subspace if isinstance(target, RelationInstance) else target
    return float(sum(p for y, p in distribution.items() if member(s, y)))


def pack_outputs(zs: np.ndarray) -> np.ndarray:
    return gf2.pack_bits(zs)
