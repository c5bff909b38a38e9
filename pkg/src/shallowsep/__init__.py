"""Stabilizer simulation of a shallow-circuit relation problem under noise."""

from .circuit import Gate, GateKind, LayeredCircuit, gate
from .geometry import GridSpec, extended_gd
from .noise import NoiseModel
from .relation import RelationInstance, make_instance, random_input
from .stabcore import AffineSubspace, PauliOp, Tableau, extract_affine_subspace, new_tableau, simulate

__version__ = "0.1.0"
