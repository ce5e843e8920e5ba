"""
Tests for RBM parameters, amplitudes, look-up tables and the parameter file format.
"""

import json
import math

import numpy as np
import pytest

from rbm_circuits.errors import ConfigError, NumericError, StructuralError
from rbm_circuits.state import (
    RbmState,
    ThetaTable,
    add_hidden_unit,
    all_bitstrings,
    bits_to_index,
    flip_log_ratio,
    log1pexp,
    log_amplitude,
    log_amplitudes,
    log_derivatives,
    load_state,
    save_state,
    update_theta,
    variational_derivatives,
)


def direct_amplitudes(state: RbmState, bits: np.ndarray) -> np.ndarray:
    return np.exp(bits @ state.visible_bias) * np.prod(
        1 + np.exp(state.hidden_bias + bits @ state.weights), axis=-1
    )


def test_zero_state_is_uniform():
    state = RbmState.zeros(3, 2)
    logs = log_amplitudes(state, all_bitstrings(3))
    np.testing.assert_allclose(logs, 2 * math.log(2))


def test_log_amplitudes_match_direct_product(small_state):
    bits = all_bitstrings(small_state.n_visible)
    np.testing.assert_allclose(
        np.exp(log_amplitudes(small_state, bits)), direct_amplitudes(small_state, bits), rtol=1e-12
    )


def test_single_and_batched_agree(small_state):
    bits = all_bitstrings(small_state.n_visible)
    batched = log_amplitudes(small_state, bits)
    for row, expected in zip(bits, batched):
        assert np.exp(log_amplitude(small_state, row)) == pytest.approx(np.exp(expected), rel=1e-12)


def test_bitstrings_are_little_endian():
    bits = all_bitstrings(3)
    assert bits[1].tolist() == [1, 0, 0]
    assert bits[6].tolist() == [0, 1, 1]
    np.testing.assert_array_equal(bits_to_index(bits), np.arange(8))


def test_log1pexp_is_stable():
    values = log1pexp(np.array([1000.0 + 0.5j, -1000.0, 0.0]))
    assert values[0] == pytest.approx(1000.0 + 0.5j)
    assert abs(values[1]) < 1e-300
    assert values[2] == pytest.approx(math.log(2))


@pytest.mark.parametrize("re_theta", [700.0, -700.0])
def test_single_amplitude_at_extreme_theta(re_theta):
    state = RbmState(visible_bias=[0.2], hidden_bias=[re_theta + 0.3j], weights=[[0.1]])
    for bit in (0, 1):
        value = log_amplitude(state, np.array([bit], dtype=np.int8))
        assert math.isfinite(value.real) and math.isfinite(value.imag)
        if re_theta > 0:
            assert value == pytest.approx(0.2 * bit + re_theta + 0.1 * bit + 0.3j, rel=1e-12)
        else:
            assert value == pytest.approx(0.2 * bit, abs=1e-12)


def test_parameters_use_canonical_order(small_state):
    n, m = small_state.n_visible, small_state.n_hidden
    params = small_state.parameters()
    assert params.shape == (n + m + n * m,)
    np.testing.assert_array_equal(params[:n], small_state.visible_bias)
    np.testing.assert_array_equal(params[n : n + m], small_state.hidden_bias)
    np.testing.assert_array_equal(params[n + m :].reshape(n, m), small_state.weights)
    rebuilt = small_state.with_parameters(params)
    np.testing.assert_array_equal(rebuilt.weights, small_state.weights)


def test_with_parameters_rejects_wrong_length(small_state):
    with pytest.raises(StructuralError):
        small_state.with_parameters(np.zeros(3))


def test_non_finite_parameters_are_rejected():
    with pytest.raises(NumericError):
        RbmState(visible_bias=[np.nan], hidden_bias=[], weights=np.zeros((1, 0)))


def test_bad_bitstrings_are_rejected(small_state):
    with pytest.raises(StructuralError):
        log_amplitudes(small_state, np.array([[0, 1, 2, 0]]))
    with pytest.raises(StructuralError):
        log_amplitudes(small_state, np.zeros((2, 3), dtype=np.int8))


def test_theta_table_follows_flips(small_state, rng):
    table = ThetaTable.build(small_state, rng.integers(0, 2, small_state.n_visible))
    for _ in range(200):
        q = int(rng.integers(small_state.n_visible))
        before = log_amplitude(small_state, table.bits)
        ratio = flip_log_ratio(small_state, table, q)
        table = update_theta(table, small_state, q)
        after = log_amplitude(small_state, table.bits)
        assert np.exp(ratio) == pytest.approx(np.exp(after - before), rel=1e-10)
    assert table.is_consistent(small_state, rtol=1e-10)


def test_theta_table_after_a_thousand_flips(rng):
    state = RbmState.random(6, 12, rng)
    table = ThetaTable.build(state, rng.integers(0, 2, 6))
    for q in rng.integers(0, 6, 1000):
        table = update_theta(table, state, int(q))
    fresh = ThetaTable.build(state, table.bits)
    np.testing.assert_allclose(table.theta, fresh.theta, rtol=1e-9, atol=1e-12)


def test_log_derivatives_match_finite_differences(small_state):
    bits = all_bitstrings(small_state.n_visible)
    analytic = log_derivatives(small_state, bits)
    params = small_state.parameters()
    eps = 1e-6
    base = direct_amplitudes(small_state, bits)
    for k in range(params.size):
        shift = np.zeros_like(params)
        shift[k] = eps
        up = direct_amplitudes(small_state.with_parameters(params + shift), bits)
        down = direct_amplitudes(small_state.with_parameters(params - shift), bits)
        np.testing.assert_allclose(analytic[:, k], (up - down) / (2 * eps * base), atol=1e-7)


def test_single_sample_derivatives_agree(small_state):
    b = np.array([1, 0, 1, 1], dtype=np.int8)
    single = variational_derivatives(small_state, b, ThetaTable.build(small_state, b))
    np.testing.assert_allclose(single, log_derivatives(small_state, b[None, :])[0])


def test_zero_coupled_hidden_unit_scales_amplitudes_by_two(small_state):
    bits = all_bitstrings(small_state.n_visible)
    grown = add_hidden_unit(small_state, {})
    assert grown.n_hidden == small_state.n_hidden + 1
    np.testing.assert_allclose(
        log_amplitudes(grown, bits) - log_amplitudes(small_state, bits), math.log(2), atol=1e-12
    )


def test_hidden_unit_coupling_out_of_range(small_state):
    with pytest.raises(StructuralError):
        add_hidden_unit(small_state, {7: 1.0})


def test_parameter_file_is_bit_faithful(small_state, tmp_path):
    path = save_state(tmp_path / "rbm.json", small_state, {"origin": "test"})
    loaded, metadata = load_state(path)
    np.testing.assert_array_equal(loaded.parameters(), small_state.parameters())
    assert metadata == {"origin": "test"}
    data = json.loads(path.read_text())
    assert data["n_visible"] == 4
    assert data["weights"][0][0] == [small_state.weights[0, 0].real, small_state.weights[0, 0].imag]


def test_parameter_file_without_hidden_units(tmp_path):
    state = RbmState(visible_bias=[0.1 + 0.2j, -0.3], hidden_bias=[], weights=np.zeros((2, 0)))
    loaded, _ = load_state(save_state(tmp_path / "rbm.json", state))
    assert loaded.n_hidden == 0
    np.testing.assert_array_equal(loaded.visible_bias, state.visible_bias)


def test_malformed_parameter_file(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"n_visible": 2}))
    with pytest.raises(ConfigError):
        load_state(path)

    path.write_text('{"n_visible": 2,\n  "n_hidden": }')
    with pytest.raises(ConfigError) as excinfo:
        load_state(path)
    assert excinfo.value.line == 2


def test_missing_parameter_file(tmp_path):
    with pytest.raises(ConfigError):
        load_state(tmp_path / "absent.json")
