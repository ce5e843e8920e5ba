"""
Tests for the closed-form gate rules against the statevector oracle.
"""

import math

import numpy as np
import pytest

from rbm_circuits import verify
from rbm_circuits.errors import StructuralError
from rbm_circuits.gates import (
    GateFailure,
    GateKind,
    GateOp,
    apply_crz,
    apply_pauli_x,
    apply_pauli_y,
    apply_pauli_z,
    apply_rz,
    crz_parameters,
    exact,
)
from rbm_circuits.gates.groups import build_collection
from rbm_circuits.oracle import StateVector, apply_gate_exact, expand_rbm, ratio_to_scalar
from rbm_circuits.state import RbmState

GATES = [
    GateOp.rz(0, 0.7),
    GateOp.rz(3, -2.9),
    GateOp.crz(0, 2, math.pi / 2),
    GateOp.crz(3, 1, -5.1),
    GateOp.x(1),
    GateOp.y(2),
    GateOp.z(0),
]


@pytest.mark.parametrize("op", GATES, ids=lambda op: op.to_line())
def test_exact_gate_matches_oracle(small_state, op):
    result = build_collection("exact").run(small_state, op)
    assert result
    assert result.method == "exact"
    expected = apply_gate_exact(expand_rbm(small_state), op)
    assert ratio_to_scalar(expand_rbm(result.state), expected) < 1e-10


def test_random_gates_match_oracle():
    assert verify._exact_gate_equivalence(seed=3, n_instances=50)


def test_only_crz_adds_hidden_units(small_state):
    m = small_state.n_hidden
    assert apply_rz(small_state, 0, 0.4).n_hidden == m
    assert apply_pauli_x(small_state, 1).n_hidden == m
    assert apply_pauli_z(small_state, 2).n_hidden == m
    assert apply_crz(small_state, 0, 1, 0.4).n_hidden == m + 1


@pytest.mark.parametrize("phi", -2 * math.pi + 4 * math.pi * np.arange(1, 33) / 32)
def test_crz_four_assignments(phi):
    w_c, w_t, da_c, da_t = crz_parameters(phi)
    factors = [
        np.exp(da_c * bc + da_t * bt) * (1 + np.exp(w_c * bc + w_t * bt))
        for bc, bt in ((0, 0), (0, 1), (1, 0), (1, 1))
    ]
    ratios = np.array(factors) / factors[0]
    np.testing.assert_allclose(ratios, [1, 1, 1, np.exp(1j * phi)], atol=1e-12)


def test_crz_at_zero_angle_is_identity(small_state):
    grown = apply_crz(small_state, 1, 2, 0.0)
    assert ratio_to_scalar(expand_rbm(grown), expand_rbm(small_state)) < 1e-12


def test_x_twice_is_identity(small_state):
    twice = apply_pauli_x(apply_pauli_x(small_state, 2), 2)
    assert ratio_to_scalar(expand_rbm(twice), expand_rbm(small_state)) < 1e-12


def test_z_equals_rz_pi(small_state):
    z = expand_rbm(apply_pauli_z(small_state, 1))
    rz = expand_rbm(apply_rz(small_state, 1, math.pi))
    assert ratio_to_scalar(z, rz) < 1e-12


def test_y_takes_zero_to_i_one():
    pinned = RbmState(visible_bias=[-40.0], hidden_bias=[], weights=np.zeros((1, 0)))
    flipped = expand_rbm(apply_pauli_y(pinned, 0))
    assert ratio_to_scalar(flipped, StateVector(np.array([0.0, 1j]))) < 1e-12
    exact_y = apply_gate_exact(StateVector.basis(1, 0), GateOp.y(0))
    np.testing.assert_allclose(exact_y.amplitudes, [0.0, 1j])


def test_y_twice_is_identity(small_state):
    twice = apply_pauli_y(apply_pauli_y(small_state, 3), 3)
    assert ratio_to_scalar(expand_rbm(twice), expand_rbm(small_state)) < 1e-12


def test_rz_angles_add(small_state):
    composed = apply_rz(apply_rz(small_state, 2, 0.4), 2, -1.3)
    np.testing.assert_allclose(composed.visible_bias, apply_rz(small_state, 2, -0.9).visible_bias)
    assert ratio_to_scalar(expand_rbm(composed), expand_rbm(apply_rz(small_state, 2, -0.9))) < 1e-12


@pytest.mark.parametrize("phi", [0.3, math.pi / 2, -2.5, math.pi])
def test_crz_is_symmetric_in_its_qubits(small_state, phi):
    forward = expand_rbm(apply_crz(small_state, 0, 2, phi))
    backward = expand_rbm(apply_crz(small_state, 2, 0, phi))
    assert ratio_to_scalar(forward, backward) < 1e-10


def test_exact_gates_check_qubits(small_state):
    with pytest.raises(StructuralError):
        apply_rz(small_state, 4, 0.1)
    with pytest.raises(StructuralError):
        apply_crz(small_state, 1, 1, 0.1)


def test_collection_rejects_unsupported_gate(small_state):
    result = build_collection("exact").run(small_state, GateOp.h(0))
    assert isinstance(result, GateFailure)
    assert not result
    assert "not supported" in result.error
    assert result.state is small_state


def test_collection_reports_gate_errors(small_state):
    result = build_collection("exact").run(small_state, GateOp.rz(9, 0.1))
    assert isinstance(result, GateFailure)
    assert result.state is small_state


def test_gate_op_validation():
    with pytest.raises(StructuralError):
        GateOp(kind=GateKind.RZ, qubits=(0,))
    with pytest.raises(StructuralError):
        GateOp(kind=GateKind.H, qubits=(0,), angle=1.0)
    with pytest.raises(StructuralError):
        GateOp(kind=GateKind.CRZ, qubits=(2, 2), angle=1.0)
    with pytest.raises(StructuralError):
        GateOp(kind=GateKind.X, qubits=(0, 1))


def test_corrupted_crz_sign_is_caught(monkeypatch):
    original = exact.crz_parameters
    monkeypatch.setattr(exact, "crz_parameters", lambda phi: original(-phi))
    assert not verify._crz_assignments(seed=0)


def test_corrupted_crz_breaks_oracle_equivalence(monkeypatch, small_state):
    original = exact.crz_parameters
    monkeypatch.setattr(exact, "crz_parameters", lambda phi: original(-phi))
    op = GateOp.crz(0, 1, 1.0)
    grown = apply_crz(small_state, 0, 1, 1.0)
    assert ratio_to_scalar(expand_rbm(grown), apply_gate_exact(expand_rbm(small_state), op)) > 1e-3


def test_exact_gates_keep_state_immutable(small_state):
    before = small_state.parameters()
    apply_crz(small_state, 0, 3, 0.3)
    apply_pauli_x(small_state, 0)
    np.testing.assert_array_equal(small_state.parameters(), before)
