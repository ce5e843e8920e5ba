from .base import GateFailure, GateKind, GateOp, GateResult
from .collection import GateCollection
from .exact import (
    CrzGate,
    PauliXGate,
    PauliYGate,
    PauliZGate,
    RzGate,
    apply_crz,
    apply_pauli_x,
    apply_pauli_y,
    apply_pauli_z,
    apply_rz,
    crz_parameters,
)

__ALL__ = [
    CrzGate,
    GateCollection,
    GateFailure,
    GateKind,
    GateOp,
    GateResult,
    PauliXGate,
    PauliYGate,
    PauliZGate,
    RzGate,
    apply_crz,
    apply_pauli_x,
    apply_pauli_y,
    apply_pauli_z,
    apply_rz,
    crz_parameters,
]
