"""Dense state-vector oracle for cross-checking the stabilizer engine.

Amplitudes are kept as a ``(2,) * m`` tensor whose axis ``q`` is qubit ``q``;
outcome keys are tuples ``(y_0, ..., y_{m-1})`` in qubit order.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence

import numpy as np

from .circuit import Gate, GateKind, LayeredCircuit, gate

MAX_QUBITS = 14

_S2 = 1 / np.sqrt(2)
SINGLE = {
    GateKind.H: np.array([[1, 1], [1, -1]], dtype=complex) * _S2,
    GateKind.S: np.diag([1, 1j]),
    GateKind.S_DAGGER: np.diag([1, -1j]),
    GateKind.PAULI_X: np.array([[0, 1], [1, 0]], dtype=complex),
    GateKind.PAULI_Y: np.array([[0, -1j], [1j, 0]], dtype=complex),
    GateKind.PAULI_Z: np.diag([1, -1]).astype(complex),
    GateKind.R: np.array([[1, -1j], [1, 1j]], dtype=complex) * _S2,
}
# controlled gates: control is the first qubit, the matrix acts on the second
CONTROLLED = {
    GateKind.CZ: SINGLE[GateKind.PAULI_Z],
    GateKind.CNOT: SINGLE[GateKind.PAULI_X],
    GateKind.CR: SINGLE[GateKind.R],
    GateKind.CH: SINGLE[GateKind.H],
}


class TooManyQubitsError(ValueError):
    pass


def _check_size(m: int) -> None:
    if m > MAX_QUBITS:
        raise TooManyQubitsError(f"dense oracle limited to {MAX_QUBITS} qubits, got {m}")


def _apply_1q(state: np.ndarray, u: np.ndarray, q: int) -> np.ndarray:
    out = np.tensordot(u, state, axes=([1], [q]))
    return np.moveaxis(out, 0, q)


def apply_dense(state: np.ndarray, g: Gate) -> np.ndarray:
    if g.kind in SINGLE:
        return _apply_1q(state, SINGLE[g.kind], g.qubits[0])
    c, t = g.qubits
    state = state.copy()
    idx = [slice(None)] * state.ndim
    idx[c] = 1
    sub = state[tuple(idx)]
    # the target axis shifts down by one once the control axis is dropped
    tt = t - 1 if t > c else t
    state[tuple(idx)] = _apply_1q(sub, CONTROLLED[g.kind], tt)
    return state


def simulate_dense(c: LayeredCircuit, input_bits: Sequence[int] | None = None) -> np.ndarray:
    """Final amplitudes (flat, qubit 0 most significant) of ``c`` on ``|input>``."""
    m = c.qubit_count
    _check_size(m)
    bits = [0] * m if input_bits is None else [int(b) & 1 for b in input_bits]
    if len(bits) != m:
        raise ValueError("input length must equal qubit count")
    state = np.zeros((2,) * m, dtype=complex)
    state[tuple(bits)] = 1.0
    for layer in c.layers:
        for g in layer:
            state = apply_dense(state, g)
    return state.reshape(-1)


def _basis_circuit(c: LayeredCircuit, bases) -> LayeredCircuit:
    if bases is None:
        return c.with_basis_change()
    if isinstance(bases, Mapping):
        bases = [bases.get(q, "Z") for q in range(c.qubit_count)]
    return LayeredCircuit(c.qubit_count, [list(layer) for layer in c.layers], tuple(bases)).with_basis_change()


def outcome_distribution(
    c: LayeredCircuit,
    bases=None,
    input_bits: Sequence[int] | None = None,
    keep: Sequence[int] | None = None,
    tol: float = 1e-12,
) -> dict[tuple[int, ...], float]:
    """Exact measurement distribution, optionally marginalised onto ``keep``.

    ``bases`` is a per-qubit sequence or mapping of ``"X" | "Y" | "Z"``
    (default: the circuit's own measurement layer).
    """
    full = _basis_circuit(c, bases)
    probs = np.abs(simulate_dense(full, input_bits)) ** 2
    m = c.qubit_count
    tensor = probs.reshape((2,) * m)
    if keep is not None:
        keep = list(keep)
        drop = tuple(q for q in range(m) if q not in keep)
        tensor = tensor.sum(axis=drop) if drop else tensor
        order = sorted(keep)
        tensor = np.transpose(tensor, [order.index(q) for q in keep])
    out: dict[tuple[int, ...], float] = {}
    for idx in zip(*np.nonzero(tensor > tol)):
        out[tuple(int(i) for i in idx)] = float(tensor[idx])
    return out


def graph_state_circuit(n: int, edges: Sequence[tuple[int, int]]) -> LayeredCircuit:
    """H on every vertex, then one CZ per edge (one edge per layer, unscheduled)."""
    c = LayeredCircuit(n, [[gate(GateKind.H, q) for q in range(n)]])
    for u, v in edges:
        c.append_layer([gate(GateKind.CZ, u, v)])
    return c


def quantum_input_equivalence_check(
    n: int,
    edges: Sequence[tuple[int, int]],
    controls: Mapping[int, int],
    tol: float = 1e-9,
) -> bool:
    """Classically chosen X/Y bases vs. the same choice driven by input qubits.

    ``controls`` maps a graph vertex to its selector bit (1 = Y basis).  In
    the quantum-input circuit each selector is loaded into an extra qubit;
    the basis change on the vertex is ``R`` when the selector is 1 and ``H``
    when it is 0, realised as a controlled-R followed by an anti-controlled H.
    Vertices without a selector are measured in X.
    """
    sel = sorted(controls)
    total = n + len(sel)
    _check_size(total)
    if any(not 0 <= v < n for v in sel):
        raise ValueError("control vertex out of range")
    classical = graph_state_circuit(n, edges)
    bases = ["Y" if controls.get(q, 0) else "X" for q in range(n)]
    want = outcome_distribution(classical, bases)

    inputs = [0] * n + [int(controls[v]) & 1 for v in sel]
    qc = LayeredCircuit(total, [list(layer) for layer in graph_state_circuit(n, edges).layers])
    anc = {v: n + i for i, v in enumerate(sel)}
    qc.append_layer([gate(GateKind.CR, anc[v], v) for v in sel])
    qc.append_layer([gate(GateKind.PAULI_X, anc[v]) for v in sel])
    qc.append_layer([gate(GateKind.CH, anc[v], v) for v in sel] + [gate(GateKind.H, q) for q in range(n) if q not in anc])
    qc.append_layer([gate(GateKind.PAULI_X, anc[v]) for v in sel])
    got = outcome_distribution(qc, ["Z"] * total, input_bits=inputs, keep=range(n))
    keys = set(want) | set(got)
    return all(abs(want.get(k, 0.0) - got.get(k, 0.0)) <= tol for k in keys)


def success_probability_dense(
    c: LayeredCircuit,
    valid: set[tuple[int, ...]],
    faults: Mapping[tuple[int, int], int] | None = None,
) -> float:
    """Probability that the (faulted) circuit's Z readout lands in ``valid``.

    ``c`` must already end in Z measurements; faults use ``PauliOp`` codes
    (1 = X, 2 = Z, 3 = Y) injected right after the given layer.
    """
    codes = {1: GateKind.PAULI_X, 2: GateKind.PAULI_Z, 3: GateKind.PAULI_Y}
    layers: list[list[Gate]] = []
    for i, layer in enumerate(c.layers):
        layers.append(list(layer))
        extra = [gate(codes[int(p)], q) for (li, q), p in (faults or {}).items() if li == i and int(p)]
        if extra:
            layers.append(extra)
    dist = outcome_distribution(LayeredCircuit(c.qubit_count, layers), ["Z"] * c.qubit_count)
    return float(sum(p for y, p in dist.items() if y in valid))
