"""Depolarizing noise: fault sampling, Pauli-frame propagation, and bounds.

A fault slot ``(layer, qubit)`` sits right after ``layer``; the slot after
the last layer is immediately before the (noiseless) measurement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import gf2
from .circuit import GateKind, LayeredCircuit
from .stabcore import AffineSubspace, PauliOp, extract_affine_subspace, new_tableau, simulate

FaultPattern = dict  # (layer, qubit) -> PauliOp, identity omitted


@dataclass(frozen=True)
class NoiseModel:
    """Depolarizing channel ``(1-p) rho + p/3 (X rho X + Y rho Y + Z rho Z)``.

    Applied after every layer on every qubit, or only on the qubits a layer
    touches when ``idle`` is off.
    """

    p: float
    idle: bool = True

    def __post_init__(self):
        if not 0 <= self.p <= 0.75:
            raise ValueError(f"p must lie in [0, 3/4], got {self.p}")


def _eligible(c: LayeredCircuit, nm: NoiseModel) -> list[np.ndarray]:
    if nm.idle:
        full = np.ones(c.qubit_count, dtype=bool)
        return [full] * c.depth
    out = []
    for layer in c.layers:
        mask = np.zeros(c.qubit_count, dtype=bool)
        for g in layer:
            mask[list(g.qubits)] = True
        out.append(mask)
    return out


def fault_codes(c: LayeredCircuit, nm: NoiseModel, rng: np.random.Generator, trials: int) -> np.ndarray:
    """Sampled Pauli codes, shape ``(depth, trials, qubits)`` (0 = identity)."""
    m = c.qubit_count
    codes = np.zeros((c.depth, trials, m), dtype=np.uint8)
    if nm.p == 0:
        return codes
    for layer, mask in enumerate(_eligible(c, nm)):
        u = rng.random((trials, m))
        hit = (u < nm.p) & mask[None, :]
        # X, Z, Y uniformly among the faulty slots
        kind = np.minimum((u * 3 / nm.p).astype(np.int64), 2)
        codes[layer] = np.where(hit, np.array([1, 2, 3], dtype=np.uint8)[kind], 0)
    return codes


def inject(c: LayeredCircuit, nm: NoiseModel, rng: np.random.Generator) -> FaultPattern:
    codes = fault_codes(c, nm, rng, 1)[:, 0, :]
    return {(int(layer), int(q)): PauliOp(int(codes[layer, q])) for layer, q in zip(*np.nonzero(codes))}


def propagate_frames(c: LayeredCircuit, codes: np.ndarray) -> np.ndarray:
    """Push sampled Pauli faults to the end of ``c``; return the X part.

    ``c`` must end in Z readout.  The result is the set of flipped outcome
    bits, shape ``(trials, qubits)``.
    """
    _, trials, m = codes.shape
    fx = np.zeros((trials, m), dtype=np.uint8)
    fz = np.zeros((trials, m), dtype=np.uint8)
    for layer, gates in enumerate(c.layers):
        _conjugate_frames(gates, fx, fz)
        fx ^= codes[layer] & 1
        fz ^= codes[layer] >> 1
    return fx


def _conjugate_frames(gates, fx: np.ndarray, fz: np.ndarray) -> None:
    groups: dict[GateKind, list] = {}
    for g in gates:
        groups.setdefault(g.kind, []).append(g.qubits)
    for k, qs in groups.items():
        qs = np.asarray(qs)
        if k is GateKind.H:
            q = qs[:, 0]
            fx[:, q], fz[:, q] = fz[:, q], fx[:, q].copy()
        elif k in (GateKind.S, GateKind.S_DAGGER):
            q = qs[:, 0]
            fz[:, q] ^= fx[:, q]
        elif k is GateKind.CZ:
            a, b = qs[:, 0], qs[:, 1]
            xa, xb = fx[:, a].copy(), fx[:, b].copy()
            fz[:, a] ^= xb
            fz[:, b] ^= xa
        elif k is GateKind.CNOT:
            a, b = qs[:, 0], qs[:, 1]
            fx[:, b] ^= fx[:, a]
            fz[:, a] ^= fz[:, b]
        elif k in (GateKind.PAULI_X, GateKind.PAULI_Y, GateKind.PAULI_Z):
            pass
        else:
            raise ValueError(f"frames cannot track {k.name}")


def sample_frames(c: LayeredCircuit, nm: NoiseModel, rng: np.random.Generator, trials: int) -> np.ndarray:
    return propagate_frames(c, fault_codes(c, nm, rng, trials))


def _pattern_codes(c: LayeredCircuit, faults: Mapping) -> np.ndarray:
    codes = np.zeros((c.depth, 1, c.qubit_count), dtype=np.uint8)
    for (layer, q), p in faults.items():
        if not 0 <= layer < c.depth or not 0 <= q < c.qubit_count:
            raise IndexError(f"fault slot {(layer, q)} outside circuit")
        codes[layer, 0, q] = int(p)
    return codes


# ---------------------------------------------------------------------------
# Success probabilities


def success_probability_given_faults(instance, faults: Mapping) -> float:
    """Exact success of one fault realisation via tableau simulation.

    The faulted run's outcome set ``S'`` is extracted from its tableau and
    compared with the noiseless set by rank: ``|S' ∩ Λ| / |S'|``.
    """
    t = simulate(instance.circuit, faults)
    shifted = extract_affine_subspace(t, column_order=instance.column_order)
    return _overlap(shifted, instance.subspace)


def _overlap(shifted: AffineSubspace, target: AffineSubspace) -> float:
    both = shifted.intersect(target)
    if not both.consistent:
        return 0.0
    return math.ldexp(1.0, shifted.r - both.r)


def frame_success(instance, faults: Mapping) -> float:
    """Same quantity as :func:`success_probability_given_faults` via Pauli frames."""
    f = propagate_frames(instance.circuit, _pattern_codes(instance.circuit, faults))[0]
    s = instance.subspace
    return float(not gf2.matvec(s.C, gf2.pack_bits(f)).any())


def slot_syndromes(instance, nm: NoiseModel) -> tuple[np.ndarray, np.ndarray]:
    """Syndrome rows of a lone X and a lone Z fault in every noisy slot.

    Returns ``(rows, slot_index)``: ``rows`` is packed ``(2 * slots, words)``
    with the X row of slot ``k`` at ``2k`` and the Z row at ``2k + 1``;
    ``slot_index`` lists the ``(layer, qubit)`` of each slot.
    """
    c = instance.circuit
    s = instance.subspace
    m = c.qubit_count
    eye = np.eye(m, dtype=np.uint8)
    rows, slots = [], []
    for layer, mask in enumerate(_eligible(c, nm)):
        qs = np.flatnonzero(mask)
        if qs.size == 0:
            continue
        fx = np.concatenate([eye[qs], np.zeros((qs.size, m), np.uint8)])
        fz = np.concatenate([np.zeros((qs.size, m), np.uint8), eye[qs]])
        for gates in c.layers[layer + 1 :]:
            _conjugate_frames(gates, fx, fz)
        syn = gf2.parity(gf2.pack_bits(fx)[:, None, :] & s.C[None, :, :])
        both = np.empty((2 * qs.size, s.r), dtype=np.uint8)
        both[0::2], both[1::2] = syn[: qs.size], syn[qs.size :]
        rows.append(both)
        slots.extend((layer, int(q)) for q in qs)
    packed = gf2.pack_bits(np.concatenate(rows)) if rows else np.zeros((0, gf2.n_words(s.r)), np.uint64)
    return packed, np.array(slots, dtype=np.int64).reshape(-1, 2)


def twirled_success_log2(instance, nm: NoiseModel, rng: np.random.Generator, trials: int) -> np.ndarray:
    """Per-trial ``log2`` of the exact success given the set of twirled slots.

    Each slot's channel is identity with probability ``1 - 4p/3`` and a
    uniformly random Pauli (identity included) otherwise.  Given which slots
    were twirled, the syndrome is uniform on the span of their X/Z syndrome
    rows, so success has probability ``2^-rank`` exactly.
    """
    rows, slots = slot_syndromes(instance, nm)
    r = instance.subspace.r
    twirl = 4 * nm.p / 3
    out = np.zeros(trials)
    for k in range(trials):
        hit = np.flatnonzero(rng.random(len(slots)) < twirl)
        if hit.size == 0:
            continue
        sel = rows[np.concatenate([2 * hit, 2 * hit + 1])]
        sel = sel[sel.any(axis=1)]
        out[k] = -gf2.rank(sel, r) if sel.size else 0.0
    return out


def _mean_stderr_log2(logs: np.ndarray) -> tuple[float, float]:
    vals = np.exp2(logs)
    n = vals.size
    mean = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return mean, se


def estimate_success(
    instance,
    nm: NoiseModel,
    trials: int,
    rng: np.random.Generator,
    method: str = "twirl",
) -> tuple[float, float]:
    """Monte Carlo success probability of the noisy process with a standard error.

    ``method="twirl"`` averages the exact conditional success ``2^-rank``
    over sampled twirl sets (see :func:`twirled_success_log2`);
    ``method="plain"`` averages the 0/1 success of sampled fault patterns.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if nm.p == 0:
        return 1.0, 0.0
    if method == "twirl":
        return _mean_stderr_log2(twirled_success_log2(instance, nm, rng, trials))
    if method != "plain":
        raise ValueError(f"unknown method {method!r}")
    f = sample_frames(instance.circuit, nm, rng, trials)
    s = instance.subspace
    ok = ~gf2.parity(gf2.pack_bits(f)[:, None, :] & s.C[None, :, :]).any(axis=1)
    return _mean_stderr_log2(np.where(ok, 0.0, -np.inf))


def no_fault_probability(c: LayeredCircuit, nm: NoiseModel) -> float:
    """Probability that every noisy slot draws the identity."""
    slots = int(sum(mask.sum() for mask in _eligible(c, nm)))
    return (1 - nm.p) ** slots


# ---------------------------------------------------------------------------
# Bounds and the readout reduction


def bsc_crossover(p: float) -> float:
    if not 0 <= p <= 0.75:
        raise ValueError("p must lie in [0, 3/4]")
    return 2 * p / 3


def bsc_flip_experiment(p: float, trials: int, rng: np.random.Generator) -> tuple[float, float]:
    """Depolarize ``|0>`` once and measure Z; return flip rate and its stderr."""
    nm = NoiseModel(p)
    c = LayeredCircuit(1, [[]])
    flips = 0
    from .stabcore import measure_z

    for _ in range(trials):
        t = new_tableau(1)
        for (_, q), pauli in inject(c, nm, rng).items():
            t.apply_pauli(pauli, q)
        bit, _ = measure_z(t, 0, rng)
        flips += bit
    rate = flips / trials
    return rate, math.sqrt(rate * (1 - rate) / trials)


def theorem2_bound(p_guess: float, p: float) -> float:
    """``p_guess ** log2(1 / (1 - 2p/3))``."""
    if not 0 <= p_guess <= 1:
        raise ValueError("p_guess must lie in [0, 1]")
    if not 0 <= p <= 0.75:
        raise ValueError("p must lie in [0, 3/4]")
    expo = math.log2(1 / (1 - 2 * p / 3))
    if expo == 0:
        return 1.0
    return p_guess**expo


def fidelity_lower_bound(p: float, qubits: int, depth: int) -> float:
    if not 0 <= p <= 1 or qubits < 0 or depth < 0:
        raise ValueError("invalid parameters")
    return (1 - p) ** (qubits * depth)


# ---------------------------------------------------------------------------
# Local cycle constraints


def localized_constraint(s: AffineSubspace, support: Sequence[int]):
    """A row of span(C) vanishing outside ``support``, with its right-hand side.

    Eliminates ``C`` with the complement columns first; any remaining row
    whose pivot lands inside the support lives entirely on it.
    """
    support = sorted(int(v) for v in support)
    inside = set(support)
    order = [c for c in range(s.m) if c not in inside] + support
    red, rhs, piv = gf2.echelon(s.C, s.m, s.b, column_order=order)
    for i, c in enumerate(piv):
        if c in inside:
            return gf2.unpack_bits(red[i], s.m), int(rhs[i])
    return None


def cycle_satisfaction_rate(
    instance,
    nm: NoiseModel,
    cycles: Sequence[Sequence[int]],
    trials: int,
    rng: np.random.Generator,
) -> list[dict]:
    """Empirical rate at which noisy outputs satisfy each cycle's local constraint."""
    s = instance.subspace
    local = []
    for cyc in cycles:
        found = localized_constraint(s, cyc)
        if found is not None:
            local.append((tuple(cyc), *found))
    if not local:
        return []
    from .relation import sample_quantum

    z = sample_quantum(instance, rng, nm, trials)
    rows = np.array([row for _, row, _ in local], dtype=np.int64)
    rhs = np.array([beta for _, _, beta in local])
    sat = ((z.astype(np.int64) @ rows.T) % 2) == rhs[None, :]
    bound = math.exp(-nm.p / 2)
    out = []
    for k, (cyc, row, _) in enumerate(local):
        rate = float(sat[:, k].mean())
        out.append(
            {
                "cycle": cyc,
                "support": tuple(int(v) for v in np.flatnonzero(row)),
                "rate": rate,
                "stderr": math.sqrt(max(rate * (1 - rate), 0.0) / trials),
                "bound": bound,
                "satisfied": sat[:, k],
            }
        )
    return out
