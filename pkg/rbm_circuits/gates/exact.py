"""
Closed-form parameter updates for the gates an RBM can absorb exactly.

Every rule holds up to a global constant, which is dropped: the amplitudes
are unnormalised throughout.
"""

import cmath
import math
from typing import Literal

import numpy as np

from ..errors import StructuralError
from ..state import RbmState, add_hidden_unit
from .base import BaseGate, GateKind, GateOp, GateResult


def _check_qubit(state: RbmState, qubit: int):
    if not 0 <= qubit < state.n_visible:
        raise StructuralError(f"qubit {qubit} out of range for {state.n_visible} qubits")


def complex_arccosh(z: complex) -> complex:
    """Principal branch, log(z + sqrt(z + 1) * sqrt(z - 1))."""
    return cmath.log(z + cmath.sqrt(z + 1) * cmath.sqrt(z - 1))


def crz_parameters(phi: float) -> tuple[complex, complex, complex, complex]:
    """(W_control, W_target, delta_a_control, delta_a_target) for CRZ(phi).

    With A = arccosh(exp(-i phi / 2)):
        W_c = -2A, W_t = 2A, delta_a_c = i phi/2 + A, delta_a_t = i phi/2 - A
    so that exp(da_c B_c + da_t B_t) (1 + exp(W_c B_c + W_t B_t)) = 2 exp(i phi B_c B_t).
    """
    a = complex_arccosh(cmath.exp(-0.5j * phi))
    return -2 * a, 2 * a, 0.5j * phi + a, 0.5j * phi - a


def apply_rz(state: RbmState, qubit: int, phi: float) -> RbmState:
    _check_qubit(state, qubit)
    a = state.visible_bias.copy()
    a[qubit] += 1j * phi
    return state.replace(visible_bias=a)


def apply_crz(state: RbmState, control: int, target: int, phi: float) -> RbmState:
    _check_qubit(state, control)
    _check_qubit(state, target)
    if control == target:
        raise StructuralError(f"CRZ needs two distinct qubits, got {control} twice")
    w_c, w_t, da_c, da_t = crz_parameters(phi)
    a = state.visible_bias.copy()
    a[control] += da_c
    a[target] += da_t
    return add_hidden_unit(state.replace(visible_bias=a), {control: w_c, target: w_t})


def _flip(state: RbmState, qubit: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    w = state.weights.copy()
    b = state.hidden_bias + state.weights[qubit]
    w[qubit] = -w[qubit]
    a = state.visible_bias.copy()
    a[qubit] = -a[qubit]
    return a, b, w


def apply_pauli_x(state: RbmState, qubit: int) -> RbmState:
    _check_qubit(state, qubit)
    a, b, w = _flip(state, qubit)
    return RbmState(visible_bias=a, hidden_bias=b, weights=w)


def apply_pauli_y(state: RbmState, qubit: int) -> RbmState:
    _check_qubit(state, qubit)
    a, b, w = _flip(state, qubit)
    a[qubit] += 1j * math.pi
    return RbmState(visible_bias=a, hidden_bias=b, weights=w)


def apply_pauli_z(state: RbmState, qubit: int) -> RbmState:
    _check_qubit(state, qubit)
    a = state.visible_bias.copy()
    a[qubit] += 1j * math.pi
    return state.replace(visible_bias=a)


class ExactGate(BaseGate):
    """Gate applied through a closed-form weight update."""

    method: Literal["exact"] = "exact"

    def __call__(self, state: RbmState, op: GateOp, *, seed: int = 0) -> GateResult:
        if op.kind != self.kind:
            raise StructuralError(f"{type(self).__name__} cannot apply {op.kind}")
        op.check_qubits(state.n_visible)
        return GateResult(state=self.apply(state, op), method=self.method)

    def apply(self, state: RbmState, op: GateOp) -> RbmState:
        raise NotImplementedError


class RzGate(ExactGate):
    kind = GateKind.RZ

    def apply(self, state: RbmState, op: GateOp) -> RbmState:
        return apply_rz(state, op.qubits[0], op.angle)


class CrzGate(ExactGate):
    kind = GateKind.CRZ

    def apply(self, state: RbmState, op: GateOp) -> RbmState:
        return apply_crz(state, op.qubits[0], op.qubits[1], op.angle)


class PauliXGate(ExactGate):
    kind = GateKind.X

    def apply(self, state: RbmState, op: GateOp) -> RbmState:
        return apply_pauli_x(state, op.qubits[0])


class PauliYGate(ExactGate):
    kind = GateKind.Y

    def apply(self, state: RbmState, op: GateOp) -> RbmState:
        return apply_pauli_y(state, op.qubits[0])


class PauliZGate(ExactGate):
    kind = GateKind.Z

    def apply(self, state: RbmState, op: GateOp) -> RbmState:
        return apply_pauli_z(state, op.qubits[0])
