"""Gate vocabulary and the layered circuit container shared by all simulators."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple, Sequence


class GateKind(Enum):
    H = "H"
    S = "S"
    S_DAGGER = "S_DAG"
    CZ = "CZ"
    CNOT = "CNOT"
    PAULI_X = "X"
    PAULI_Y = "Y"
    PAULI_Z = "Z"
    # Dense-oracle only: R = (1/sqrt2)[[1,-i],[1,i]] and its controlled forms.
    R = "R"
    CR = "CR"
    CH = "CH"

    @property
    def arity(self) -> int:
        return 2 if self in TWO_QUBIT else 1

    @property
    def clifford(self) -> bool:
        return self not in (GateKind.CR, GateKind.CH)


TWO_QUBIT = frozenset({GateKind.CZ, GateKind.CNOT, GateKind.CR, GateKind.CH})


class Gate(NamedTuple):
    kind: GateKind
    qubits: tuple[int, ...]


def gate(kind: GateKind, *qubits: int) -> Gate:
    qubits = tuple(int(q) for q in qubits)
    if len(qubits) != kind.arity:
        raise ValueError(f"{kind.name} takes {kind.arity} qubit(s), got {len(qubits)}")
    if len(set(qubits)) != len(qubits):
        raise ValueError(f"{kind.name} needs distinct qubits, got {qubits}")
    return Gate(kind, qubits)


BASES = ("X", "Y", "Z")


@dataclass
class LayeredCircuit:
    """Gates partitioned into depth layers followed by one measurement layer.

    ``measure`` holds the per-qubit measurement basis (``"X"``, ``"Y"`` or
    ``"Z"``).  Noise models attach after every entry of ``layers``.
    """

    qubit_count: int
    layers: list[list[Gate]] = field(default_factory=list)
    measure: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.qubit_count < 1:
            raise ValueError("qubit_count must be positive")
        if self.measure is None:
            self.measure = ("Z",) * self.qubit_count
        self.measure = tuple(self.measure)
        if len(self.measure) != self.qubit_count:
            raise ValueError("measurement layer must name a basis per qubit")
        if any(b not in BASES for b in self.measure):
            raise ValueError(f"unknown basis in {set(self.measure)}")
        for layer in self.layers:
            self._check_layer(layer)

    def _check_layer(self, layer: Sequence[Gate]) -> None:
        seen: set[int] = set()
        for g in layer:
            for q in g.qubits:
                if not 0 <= q < self.qubit_count:
                    raise ValueError(f"qubit {q} out of range for {self.qubit_count} qubits")
                if q in seen:
                    raise ValueError(f"qubit {q} appears twice in one layer")
                seen.add(q)

    def append_layer(self, layer: Sequence[Gate]) -> None:
        layer = list(layer)
        self._check_layer(layer)
        self.layers.append(layer)

    @property
    def depth(self) -> int:
        return len(self.layers)

    def with_basis_change(self) -> "LayeredCircuit":
        """Compile X/Y measurements into two trailing layers plus Z readout.

        Y-basis qubits get S-dagger in the first added layer; every X or Y
        qubit gets H in the second.  Both layers are always emitted so the
        depth does not depend on which bases are requested.
        """
        sdg = [gate(GateKind.S_DAGGER, q) for q, b in enumerate(self.measure) if b == "Y"]
        had = [gate(GateKind.H, q) for q, b in enumerate(self.measure) if b != "Z"]
        return LayeredCircuit(
            self.qubit_count,
            [list(layer) for layer in self.layers] + [sdg, had],
            ("Z",) * self.qubit_count,
        )

    def gates(self):
        for layer in self.layers:
            yield from layer
