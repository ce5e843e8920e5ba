"""
Tests for the statevector oracle, trajectory noise and the worker-thread helper.
"""

import math

import numpy as np
import pytest

from rbm_circuits.circuits import Circuit, build_hadamard_transform
from rbm_circuits.errors import ConfigError, NumericError, StructuralError
from rbm_circuits.gates import GateOp
from rbm_circuits.oracle import (
    NoiseConfig,
    StateVector,
    apply_circuit_exact,
    apply_gate_exact,
    effective_noise_rate,
    expand_rbm,
    noisy_transform_overlap,
    noisy_transform_overlap_async,
    oracle_limit,
    overlap_exact,
    ratio_to_scalar,
)
from rbm_circuits.parallel import chunks, run_grouped
from rbm_circuits.state import RbmState


def test_statevector_validation():
    with pytest.raises(StructuralError):
        StateVector(np.ones(3))
    with pytest.raises(StructuralError):
        StateVector(np.ones(1))
    with pytest.raises(NumericError):
        StateVector(np.array([np.inf, 0.0]))
    assert StateVector(np.ones(8)).n_qubits == 3


def test_oracle_limit_can_only_be_lowered(monkeypatch):
    monkeypatch.setenv("RBMQC_ORACLE_LIMIT", "3")
    assert oracle_limit() == 3
    with pytest.raises(StructuralError):
        StateVector(np.ones(16))
    with pytest.raises(StructuralError):
        expand_rbm(RbmState.zeros(4))
    monkeypatch.setenv("RBMQC_ORACLE_LIMIT", "50")
    assert oracle_limit() == 20


def test_hadamard_twice_is_identity(rng):
    v = StateVector(rng.normal(size=8) + 1j * rng.normal(size=8)).normalize()
    twice = apply_gate_exact(apply_gate_exact(v, GateOp.h(1)), GateOp.h(1))
    np.testing.assert_allclose(twice.amplitudes, v.amplitudes, atol=1e-14)


def test_little_endian_qubit_order():
    flipped = apply_gate_exact(StateVector.basis(3, 0), GateOp.x(1))
    assert np.argmax(np.abs(flipped.amplitudes)) == 2


@pytest.mark.parametrize("qubits", [(0, 1), (1, 0)])
def test_crz_phase_sits_on_both_ones(qubits):
    v = StateVector(np.full(4, 0.5))
    out = apply_gate_exact(v, GateOp.crz(*qubits, 0.8))
    np.testing.assert_allclose(out.amplitudes, 0.5 * np.array([1, 1, 1, np.exp(0.8j)]))


def test_expanded_zero_state_is_uniform():
    v = expand_rbm(RbmState.zeros(3, 2))
    np.testing.assert_allclose(v.amplitudes, np.full(8, 1 / math.sqrt(8)))


def test_overlap_and_ratio_ignore_global_phase(rng):
    v = StateVector(rng.normal(size=4) + 1j * rng.normal(size=4))
    assert ratio_to_scalar(v, StateVector(2j * v.amplitudes)) < 1e-14
    assert overlap_exact(v, StateVector(-3 * v.amplitudes)) == pytest.approx(1.0)
    assert overlap_exact(StateVector.basis(2, 0), StateVector.basis(2, 3)) == 0.0


def test_binary_layout(tmp_path, rng):
    v = StateVector(rng.normal(size=8) + 1j * rng.normal(size=8))
    path = v.save(tmp_path / "psi.bin")
    raw = path.read_bytes()
    assert len(raw) == 4 + 16 * 8
    assert int.from_bytes(raw[:4], "little") == 3
    np.testing.assert_array_equal(StateVector.load(path).amplitudes, v.amplitudes)


def test_corrupt_binary_is_rejected(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes((3).to_bytes(4, "little") + b"\x00" * 10)
    with pytest.raises(ConfigError):
        StateVector.load(path)
    path.write_bytes(b"\x01")
    with pytest.raises(ConfigError):
        StateVector.load(path)


def test_circuit_size_must_match_vector():
    with pytest.raises(StructuralError):
        apply_circuit_exact(StateVector.basis(2), build_hadamard_transform(3))


NOISY_CIRCUIT = Circuit(
    n_qubits=3,
    gates=(GateOp.h(0), GateOp.h(1), GateOp.crz(0, 1, 0.9), GateOp.h(2)),
)


def test_noiseless_rate_is_exact():
    assert noisy_transform_overlap(StateVector.basis(3), NOISY_CIRCUIT, NoiseConfig(rate=0.0)) == (1.0, 0.0)


def test_more_noise_means_lower_overlap():
    low, low_se = noisy_transform_overlap(StateVector.basis(3), NOISY_CIRCUIT, NoiseConfig(rate=0.01, seed=6))
    high, high_se = noisy_transform_overlap(StateVector.basis(3), NOISY_CIRCUIT, NoiseConfig(rate=0.5, seed=6))
    assert low > 0.9
    assert high < low
    assert low_se >= 0 and high_se > 0


def test_noise_does_not_depend_on_thread_count():
    noise = NoiseConfig(rate=0.2, trajectories=40, seed=1)
    single = noisy_transform_overlap(StateVector.basis(3), NOISY_CIRCUIT, noise, n_threads=1)
    threaded = noisy_transform_overlap(StateVector.basis(3), NOISY_CIRCUIT, noise, n_threads=3)
    assert single == threaded


@pytest.mark.asyncio
async def test_async_noise_matches_sync():
    noise = NoiseConfig(rate=0.2, trajectories=20, seed=2)
    result = await noisy_transform_overlap_async(StateVector.basis(3), NOISY_CIRCUIT, noise, n_threads=2)
    assert result == noisy_transform_overlap(StateVector.basis(3), NOISY_CIRCUIT, noise)


def test_invalid_noise_config():
    with pytest.raises(StructuralError):
        NoiseConfig(rate=1.5)
    with pytest.raises(StructuralError):
        NoiseConfig(rate=0.1, trajectories=0)


def test_effective_noise_rate():
    rates = [0.0, 0.001, 0.01, 0.1]
    overlaps = [1.0, 0.99, 0.9, 0.5]
    assert effective_noise_rate(rates, overlaps, 0.9) == pytest.approx(0.01)
    assert effective_noise_rate(rates, overlaps, 0.945) == pytest.approx(math.sqrt(1e-5))
    assert effective_noise_rate(rates, overlaps, 0.2) is None


def test_chunks_keep_order():
    assert chunks(list(range(7)), 3) == [[0, 1, 2], [3, 4], [5, 6]]
    assert chunks([1], 4) == [[1]]
    assert run_grouped(lambda group: [x * x for x in group], list(range(10)), n_threads=4) == [
        x * x for x in range(10)
    ]
