"""
Tests for circuit builders, the circuit text format and gate-by-gate execution.
"""

import math

import numpy as np
import pytest

from rbm_circuits.circuits import (
    Circuit,
    build_hadamard_transform,
    build_truncated_fourier,
    format_circuit,
    load_circuit,
    parse_circuit,
    save_circuit,
)
from rbm_circuits.engine import ExecutionTrace, GateRecord, execute
from rbm_circuits.errors import ConfigError, ExecutionAborted, StructuralError
from rbm_circuits.gates import GateKind, GateOp
from rbm_circuits.gates.groups import build_collection
from rbm_circuits.learner import LearnerConfig
from rbm_circuits.oracle import apply_circuit_exact, expand_rbm, overlap_exact, ratio_to_scalar
from rbm_circuits.sampler import SamplerConfig
from rbm_circuits.state import RbmState


def test_hadamard_transform_layout():
    circuit = build_hadamard_transform(5)
    assert len(circuit) == 5
    assert [g.qubits for g in circuit] == [(q,) for q in range(5)]
    assert circuit.count(GateKind.H) == 5


def test_truncated_fourier_layout():
    circuit = build_truncated_fourier(12)
    assert circuit.count(GateKind.H) == 12
    assert circuit.count(GateKind.CRZ) == 11 + 10
    crz = [g for g in circuit if g.kind == GateKind.CRZ]
    assert {g.angle for g in crz} == {math.pi / 2, math.pi / 4}
    assert all(g.qubits[1] - g.qubits[0] == (1 if g.angle == math.pi / 2 else 2) for g in crz)
    assert [g.to_line() for g in circuit.gates[:3]] == [
        "H 0",
        f"CRZ 0 1 {math.pi / 2!r}",
        f"CRZ 0 2 {math.pi / 4!r}",
    ]


def test_truncated_fourier_on_two_qubits():
    assert [g.kind for g in build_truncated_fourier(2)] == [GateKind.H, GateKind.CRZ, GateKind.H]


def test_text_format_is_lossless(tmp_path):
    circuit = build_truncated_fourier(4)
    assert parse_circuit(format_circuit(circuit)) == circuit
    path = save_circuit(tmp_path / "qft.txt", circuit)
    assert load_circuit(path) == circuit


def test_parse_comments_and_header():
    text = """
    # qubits: 4
    h 0          # lower case is fine
    RZ 3 0.25

    CRZ 1 2 -1.5
    """
    circuit = parse_circuit(text)
    assert circuit.n_qubits == 4
    assert [g.kind for g in circuit] == [GateKind.H, GateKind.RZ, GateKind.CRZ]
    assert circuit.gates[2].angle == -1.5


def test_register_size_defaults_to_largest_index():
    assert parse_circuit("X 2\n").n_qubits == 3
    assert parse_circuit("X 2\n", n_qubits=5).n_qubits == 5


@pytest.mark.parametrize(
    "text, line",
    [
        ("H 0\nFOO 1\n", 2),
        ("RZ 0\n", 1),
        ("H 0\nCRZ 0 0 1.0\n", 2),
        ("H 0\nH 1\nRZ 1 abc\n", 3),
    ],
)
def test_parse_errors_report_the_line(text, line):
    with pytest.raises(ConfigError) as excinfo:
        parse_circuit(text)
    assert excinfo.value.line == line
    assert f"line {line}" in excinfo.value.message


def test_qubit_beyond_declared_register():
    with pytest.raises(ConfigError):
        parse_circuit("# qubits: 2\nH 2\n")


def test_declared_register_must_match_state():
    with pytest.raises(ConfigError):
        parse_circuit("# qubits: 2\nH 0\n", n_qubits=3)


def test_missing_circuit_file(tmp_path):
    with pytest.raises(ConfigError):
        load_circuit(tmp_path / "absent.txt")


def test_exact_circuit_matches_oracle(small_state):
    circuit = Circuit(
        n_qubits=4,
        gates=(GateOp.crz(0, 1, 0.3), GateOp.x(2), GateOp.rz(3, 1.1), GateOp.crz(2, 3, -2.0), GateOp.y(0)),
    )
    records = []
    final, trace = execute(
        circuit, small_state, collection=build_collection("exact"), gate_callback=lambda r, s: records.append(r)
    )
    assert final.n_hidden == small_state.n_hidden + 2
    assert len(trace) == 5 and len(records) == 5
    assert all(r.method == "exact" and r.overlap is None for r in trace)
    assert trace.fidelity_product() == 1.0
    assert trace.min_overlap() is None
    expected = apply_circuit_exact(expand_rbm(small_state), circuit)
    assert ratio_to_scalar(expand_rbm(final), expected) < 1e-10


def test_learned_gate_in_circuit(exact_learner):
    state = RbmState.zeros(2, 2)
    circuit = Circuit(n_qubits=2, gates=(GateOp.rz(1, 0.4), GateOp.h(0)))
    final, trace = execute(circuit, state, exact_learner, SamplerConfig())
    [learned] = trace.learned()
    assert learned.method == "learned"
    assert learned.iterations is not None
    assert learned.overlap > 0.99
    assert trace.fidelity_product() <= trace.min_overlap() <= 1.0
    expected = apply_circuit_exact(expand_rbm(state), circuit)
    assert overlap_exact(expand_rbm(final), expected) > 0.99


def test_execution_is_deterministic(small_state):
    cfg = LearnerConfig(n_iterations=4, samples_per_iteration=128, overlap_check_interval=2, seed=21)
    scfg = SamplerConfig(n_chains=4, burn_in_sweeps=5)
    circuit = build_hadamard_transform(4)
    first, _ = execute(circuit, small_state, cfg, scfg)
    second, _ = execute(circuit, small_state, cfg, scfg)
    np.testing.assert_array_equal(first.parameters(), second.parameters())


def test_failing_gate_aborts_with_partial_trace(small_state):
    circuit = Circuit(n_qubits=4, gates=(GateOp.rz(0, 0.5), GateOp.crz(1, 2, 0.7), GateOp.h(3)))
    with pytest.raises(ExecutionAborted) as excinfo:
        execute(circuit, small_state, collection=build_collection("exact"))
    aborted = excinfo.value
    assert len(aborted.trace) == 2
    assert aborted.state.n_hidden == small_state.n_hidden + 1
    assert "gate 2" in aborted.message


def test_circuit_and_state_sizes_must_agree(small_state):
    with pytest.raises(StructuralError):
        execute(build_hadamard_transform(3), small_state)


def test_fidelity_product_caps_estimates():
    def record(index, overlap):
        return GateRecord(
            index=index, gate=GateOp.h(0), method="learned", wall_time=0.0, hidden_units_after=1, overlap=overlap
        )

    trace = ExecutionTrace() + record(0, 1.02) + record(1, 0.97) + record(2, 0.99)
    assert trace.fidelity_product() == pytest.approx(0.97 * 0.99)
    assert trace.min_overlap() == 0.97
    assert trace.fidelity_product() <= trace.min_overlap()


def test_circuit_rejects_out_of_range_gates():
    with pytest.raises(StructuralError):
        Circuit(n_qubits=2, gates=(GateOp.x(2),))
