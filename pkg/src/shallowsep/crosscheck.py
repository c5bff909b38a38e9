"""Stabilizer engine vs dense oracle on small random circuits."""

from __future__ import annotations

import numpy as np

from .circuit import BASES, GateKind, LayeredCircuit, gate
from .oracle import graph_state_circuit, outcome_distribution, quantum_input_equivalence_check
from .stabcore import extract_affine_subspace, simulate

ONE_QUBIT = (GateKind.H, GateKind.S, GateKind.S_DAGGER, GateKind.PAULI_X, GateKind.PAULI_Y, GateKind.PAULI_Z)
TWO_QUBIT = (GateKind.CZ, GateKind.CNOT)


def random_clifford_circuit(m: int, depth: int, rng: np.random.Generator, bases: bool = True) -> LayeredCircuit:
    c = LayeredCircuit(m)
    for _ in range(depth):
        qs = [int(q) for q in rng.permutation(m)]
        layer = []
        while qs:
            if len(qs) >= 2 and rng.random() < 0.5:
                layer.append(gate(TWO_QUBIT[rng.integers(2)], qs.pop(), qs.pop()))
            elif rng.random() < 0.85:
                layer.append(gate(ONE_QUBIT[rng.integers(len(ONE_QUBIT))], qs.pop()))
            else:
                qs.pop()
        c.append_layer(layer)
    if bases:
        c.measure = tuple(BASES[i] for i in rng.integers(0, 3, size=m))
    return c


def random_graph(n: int, rng: np.random.Generator, density: float = 0.4) -> list[tuple[int, int]]:
    return [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < density]


def stabilizer_distribution(c: LayeredCircuit) -> dict[tuple[int, ...], float]:
    """Uniform ``2^(r-m)`` over the extracted affine support."""
    s = extract_affine_subspace(simulate(c))
    p = 2.0 ** (s.r - s.m)
    return {tuple(int(v) for v in y): p for y in s.enumerate()}


def compare(c: LayeredCircuit) -> tuple[int, float]:
    """``(support size, max per-outcome |difference|)`` between both simulators."""
    stab = stabilizer_distribution(c)
    dense = outcome_distribution(c)
    keys = set(stab) | set(dense)
    return len(stab), max(abs(stab.get(k, 0.0) - dense.get(k, 0.0)) for k in keys)


def run_suite(n_circuits: int, rng: np.random.Generator, max_qubits: int = 10, tol: float = 1e-9) -> list[dict]:
    """Random Clifford circuits, graph states with X/Y bases, and quantum-input checks.

    ``n_circuits`` random Clifford circuits plus a quarter as many graph
    states and a tenth as many quantum-input comparisons.
    """
    rows = []
    for case in range(n_circuits):
        m = int(rng.integers(1, max_qubits + 1))
        c = random_clifford_circuit(m, int(rng.integers(1, 9)), rng)
        size, err = compare(c)
        rows.append({"case": case, "kind": "clifford", "qubits": m, "outcomes": size, "max_abs_err": err, "ok": err <= tol})
    for case in range(max(1, n_circuits // 4)):
        n = int(rng.integers(2, max_qubits + 1))
        c = graph_state_circuit(n, random_graph(n, rng))
        c.measure = tuple("XY"[i] for i in rng.integers(0, 2, size=n))
        size, err = compare(c)
        rows.append({"case": case, "kind": "graph_state", "qubits": n, "outcomes": size, "max_abs_err": err, "ok": err <= tol})
    for case in range(max(1, n_circuits // 10)):
        n = int(rng.integers(2, 6))
        k = int(rng.integers(1, n + 1))
        sel = sorted(int(v) for v in rng.choice(n, size=k, replace=False))
        controls = {v: int(rng.integers(0, 2)) for v in sel}
        ok = quantum_input_equivalence_check(n, random_graph(n, rng, 0.5), controls, tol=tol)
        rows.append({"case": case, "kind": "quantum_input", "qubits": n + k, "outcomes": None, "max_abs_err": None, "ok": ok})
    return rows
