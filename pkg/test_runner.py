"""
Tests for experiment configs, the experiment pipelines and the command-line front end.
"""

import csv
import json
import math

import numpy as np
import pytest

from rbm_circuits import cli
from rbm_circuits.circuits import build_truncated_fourier, save_circuit
from rbm_circuits.config import ExperimentKind, config_from_dict, load_config, template
from rbm_circuits.errors import ConfigError, LearnerFailure
from rbm_circuits.experiments import ExperimentCallbacks, run_experiment
from rbm_circuits.oracle import StateVector, expand_rbm
from rbm_circuits.recorder import EVENTS_FILE, NOISE_FILE, TIMINGS_FILE, TRACE_FILE, ResultRecord
from rbm_circuits.seeding import derive_seed
from rbm_circuits.state import RbmState, load_state, save_state
from rbm_circuits.verify import verify_suite

EXACT_LEARNER = {
    "n_iterations": 300,
    "learning_rate": 0.05,
    "adamax_beta2": 0.9,
    "overlap_check_interval": 10,
    "exact_enumeration": True,
}


def read_rows(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


# config


@pytest.mark.parametrize("kind", [k for k in ExperimentKind if k != ExperimentKind.RUN_CIRCUIT_FILE])
def test_templates_are_valid_configs(kind, tmp_path):
    config = config_from_dict(template(kind), tmp_path)
    assert config.experiment == kind
    assert config.output.dir == tmp_path / "runs" / kind.value


def test_circuit_file_template_needs_its_files(tmp_path):
    with pytest.raises(ConfigError) as excinfo:
        config_from_dict(template("run_circuit_file"), tmp_path)
    assert excinfo.value.field == "circuit_file"


def test_noise_sweep_template_has_only_what_it_reads():
    data = template("noise_sweep")
    for unused in ("alpha", "sampler", "vmc", "refine_with_fit", "learner", "oracle"):
        assert unused not in data
    assert data["output"] == {"dir": "runs/noise_sweep"}
    assert data["noise"]["rates"] == [1e-4, 3e-4, 1e-3, 3e-3, 1e-2]


def test_unknown_key_names_its_section(tmp_path):
    with pytest.raises(ConfigError) as excinfo:
        config_from_dict({"experiment": "prepare_ground_state", "learner": {"bogus": 1}}, tmp_path)
    assert excinfo.value.field == "learner"


def test_sections_cannot_carry_seeds(tmp_path):
    with pytest.raises(ConfigError):
        config_from_dict({"experiment": "prepare_ground_state", "sampler": {"seed": 3}}, tmp_path)


def test_invalid_json_reports_the_line(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "experiment": "noise_sweep",\n  "seed": ,\n}\n')
    with pytest.raises(ConfigError) as excinfo:
        load_config(path)
    assert excinfo.value.line == 3


def test_section_seeds_derive_from_the_run_seed(tmp_path):
    config = config_from_dict(
        {"$comment": "seeded", "experiment": "prepare_ground_state", "seed": 7, "vmc": {"$comment": "x"}},
        tmp_path,
    )
    assert config.learner.seed == derive_seed(7, "learner")
    assert config.sampler.seed == derive_seed(7, "sampler")
    assert config.vmc.seed == derive_seed(7, "vmc")
    assert len({config.learner.seed, config.sampler.seed, config.vmc.seed}) == 3


def test_output_paths_resolve_against_the_output_dir(tmp_path):
    config = config_from_dict(
        {
            "experiment": "prepare_ground_state",
            "output": {"dir": "out", "state_file": "gs.json", "checkpoint_dir": "ckpt"},
        },
        tmp_path,
    )
    assert config.output.dir == tmp_path / "out"
    assert config.output.state_file == tmp_path / "out" / "gs.json"
    assert config.output.checkpoint_dir == tmp_path / "out" / "ckpt"


def test_lattice_errors_are_config_errors(tmp_path):
    with pytest.raises(ConfigError) as excinfo:
        config_from_dict(
            {"experiment": "prepare_ground_state", "lattice": {"kind": "chain_open", "extent": [2, 2]}},
            tmp_path,
        )
    assert excinfo.value.field == "lattice"


# experiments


def circuit_file_config(tmp_path, state, circuit_text, **extra):
    save_state(tmp_path / "initial.json", state)
    (tmp_path / "circuit.txt").write_text(circuit_text)
    return config_from_dict(
        {
            "experiment": "run_circuit_file",
            "circuit_file": "circuit.txt",
            "initial_state": "initial.json",
            "output": {"dir": "out", "state_file": "final.json"},
            **extra,
        },
        tmp_path,
    )


def test_empty_circuit_keeps_the_state(tmp_path, small_state):
    outcome = run_experiment(circuit_file_config(tmp_path, small_state, "# qubits: 4\n"))
    assert outcome
    assert outcome.summary["status"] == "ok"
    assert outcome.summary["gates_applied"] == 0
    assert outcome.summary["fidelity_product"] == 1.0
    final, metadata = load_state(outcome.summary["state_file"])
    np.testing.assert_array_equal(final.parameters(), small_state.parameters())
    assert metadata["gates_applied"] == 0
    assert read_rows(outcome.paths[TRACE_FILE]) == []


def test_exact_circuit_records_oracle_overlaps(tmp_path, small_state):
    config = circuit_file_config(
        tmp_path,
        small_state,
        "RZ 0 0.3\nCRZ 1 2 1.2\nX 3\n",
        output={"dir": "out", "checkpoint_dir": "ckpt"},
    )
    outcome = run_experiment(config)
    rows = read_rows(outcome.paths[TRACE_FILE])
    assert [r["gate_kind"] for r in rows] == ["RZ", "CRZ", "X"]
    assert [int(r["hidden_units"]) for r in rows] == [4, 5, 5]
    assert all(float(r["exact_overlap"]) == pytest.approx(1.0) for r in rows)
    assert all(r["overlap_estimate"] == "" for r in rows)
    assert list(rows[0]) == ResultRecord.header()
    assert outcome.summary["hidden_units_added"] == 1
    assert sorted(p.name for p in (tmp_path / "out" / "ckpt").iterdir()) == [
        "gate_000.json",
        "gate_001.json",
        "gate_002.json",
    ]
    assert len(read_rows(outcome.paths[TIMINGS_FILE])) == 3


def test_failing_gate_writes_partial_results(tmp_path, small_state, monkeypatch):
    def stalled(*args, **kwargs):
        raise LearnerFailure("overlap stalled")

    monkeypatch.setattr("rbm_circuits.gates.learned.learn_hadamard", stalled)
    outcome = run_experiment(circuit_file_config(tmp_path, small_state, "RZ 0 0.3\nH 1\nX 2\n"))
    assert outcome.status == 1
    assert not outcome
    assert outcome.summary["status"] == "failed"
    assert "overlap stalled" in outcome.error
    assert outcome.summary["gates_applied"] == 1
    assert len(read_rows(outcome.paths[TRACE_FILE])) == 1
    _, metadata = load_state(outcome.summary["state_file"])
    assert metadata["partial"] is True
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert summary["error"] == outcome.error


def test_prepare_ground_state_of_two_sites(tmp_path):
    config = config_from_dict(
        {
            "experiment": "prepare_ground_state",
            "seed": 3,
            "lattice": {"kind": "chain_open", "extent": [2]},
            "alpha": 2.0,
            "vmc": {
                "n_iterations": 800,
                "learning_rate": 0.02,
                "adamax_beta2": 0.9,
                "patience": 200,
                "exact_enumeration": True,
            },
            "refine_with_fit": False,
            "output": {"dir": "gs", "state_file": "ground.json"},
        },
        tmp_path,
    )
    energies = []
    outcome = run_experiment(config, ExperimentCallbacks(energy=energies.append))
    assert outcome
    assert len(energies) == outcome.summary["vmc_iterations"] == 800
    assert outcome.summary["exact_energy"] == pytest.approx(-math.sqrt(5))
    assert outcome.summary["energy_relative_error"] < 5e-3
    assert outcome.summary["state_source"] == "vmc"
    assert outcome.summary["vmc_energy_relative_error"] < 5e-3
    assert outcome.summary["energy_std_error"] == 0.0
    state, metadata = load_state(tmp_path / "gs" / "ground.json")
    assert state.n_hidden == 4
    assert metadata["alpha"] == 2.0
    assert metadata["source"] == "vmc"


def test_refined_ground_state_says_so(tmp_path):
    config = config_from_dict(
        {
            "experiment": "prepare_ground_state",
            "seed": 4,
            "lattice": {"kind": "chain_periodic", "extent": [3]},
            "vmc": {"n_iterations": 50, "exact_enumeration": True},
            "learner": EXACT_LEARNER,
            "refine_with_fit": True,
            "output": {"dir": "gs"},
        },
        tmp_path,
    )
    outcome = run_experiment(config)
    assert outcome
    assert outcome.summary["state_source"] == "fit"
    assert outcome.summary["ground_state_overlap"] > 0.99
    assert "vmc_energy_relative_error" in outcome.summary


def hadamard_config(tmp_path, out):
    save_state(tmp_path / "plus.json", RbmState.zeros(3, 3))
    return config_from_dict(
        {
            "experiment": "hadamard_transform",
            "seed": 11,
            "lattice": {"kind": "chain_periodic", "extent": [3]},
            "learner": EXACT_LEARNER,
            "initial_state": "plus.json",
            "output": {"dir": out, "state_file": "final.json"},
        },
        tmp_path,
    )


def test_hadamard_transform_is_learned_and_reproducible(tmp_path):
    gates = []
    first = run_experiment(
        hadamard_config(tmp_path, "a"), ExperimentCallbacks(gate=lambda r, e: gates.append((r.index, e)))
    )
    second = run_experiment(hadamard_config(tmp_path, "b"))
    assert first and second
    assert [i for i, _ in gates] == [0, 1, 2]
    assert first.summary["learned_gates"] == 3
    assert first.summary["min_overlap"] > 0.96
    assert first.summary["final_exact_overlap"] > 0.96
    assert first.summary["final_exact_overlap"] >= first.summary["fidelity_product"] - 0.02
    assert all(e > 0.96 for _, e in gates)
    assert first.paths[TRACE_FILE].read_bytes() == second.paths[TRACE_FILE].read_bytes()
    final = expand_rbm(load_state(first.summary["state_file"])[0])
    assert abs(final.amplitudes[0]) > 0.98
    events = json.loads(first.paths[EVENTS_FILE].read_text())["events"]
    steps = [e["content"] for e in events if e["type"] == "learner_step"]
    checks = [e["content"] for e in events if e["type"] == "overlap_check"]
    assert steps and checks
    assert all(not s["checked"] for s in steps)
    assert {s["gate_index"] for s in steps} == {0, 1, 2}
    assert all(c["iteration"] % 10 == 0 or c["iteration"] == 300 for c in checks)


def test_noise_sweep_writes_the_curve(tmp_path):
    config = config_from_dict(
        {
            "experiment": "noise_sweep",
            "lattice": {"kind": "chain_periodic", "extent": [3]},
            "circuit": "hadamard_transform",
            "noise": {"rates": [0.0, 0.05, 0.5], "trajectories": 50, "nqs_overlap": 0.9},
            "output": {"dir": "noise"},
        },
        tmp_path,
    )
    seen = []
    outcome = run_experiment(config, ExperimentCallbacks(noise=lambda r, m, s: seen.append(r)))
    assert outcome
    assert seen == [0.0, 0.05, 0.5]
    assert outcome.summary["mean_overlaps"][0] == 1.0
    assert outcome.summary["monotone"] is True
    assert "effective_rate" in outcome.summary
    rows = read_rows(outcome.paths[NOISE_FILE])
    assert [float(r["rate"]) for r in rows] == [0.0, 0.05, 0.5]
    assert rows[2]["experiment_id"] == "noise_sweep"


# command line


def test_cli_init_refuses_to_overwrite(tmp_path, capsys):
    path = tmp_path / "sweep.json"
    assert cli.main(["init", "noise_sweep", "-o", str(path)]) == 0
    assert json.loads(path.read_text())["experiment"] == "noise_sweep"
    assert cli.main(["init", "noise_sweep", "-o", str(path)]) == 1
    assert "already exists" in capsys.readouterr().err
    assert cli.main(["init", "prepare_ground_state", "-o", str(path), "--force"]) == 0


def test_cli_circuit_check(tmp_path, capsys):
    path = save_circuit(tmp_path / "qft.txt", build_truncated_fourier(12))
    assert cli.main(["circuit-check", str(path)]) == 0
    out = capsys.readouterr().out
    assert "33 gates on 12 qubits" in out
    assert "Hidden units added: 21" in out
    assert "Learned gates: 12" in out


def test_cli_reports_bad_input(tmp_path, capsys):
    assert cli.main(["run", str(tmp_path / "missing.json")]) == 2
    assert "Error:" in capsys.readouterr().err
    bad = tmp_path / "bad.txt"
    bad.write_text("H 0\nSWAP 0 1\n")
    assert cli.main(["circuit-check", str(bad)]) == 2
    assert "line 2" in capsys.readouterr().err


def test_cli_expand(tmp_path, small_state):
    path = save_state(tmp_path / "psi.json", small_state, {"note": "test"})
    assert cli.main(["expand", str(path)]) == 0
    vector = StateVector.load(tmp_path / "psi.bin")
    np.testing.assert_array_equal(vector.amplitudes, expand_rbm(small_state).amplitudes)


def test_cli_run(tmp_path, small_state, capsys):
    config = circuit_file_config(tmp_path, small_state, "Z 1\n")
    path = tmp_path / "run.json"
    path.write_text(
        json.dumps(
            {
                "experiment": "run_circuit_file",
                "circuit_file": "circuit.txt",
                "initial_state": "initial.json",
                "output": {"dir": "out"},
            }
        )
    )
    assert cli.main(["run", str(path), "--quiet"]) == 0
    assert "Results written" in capsys.readouterr().out
    assert (config.output.dir / "summary.json").is_file()


def test_verification_suite_passes():
    results = verify_suite(0)
    assert results and all(results), [r.detail for r in results if not r]


@pytest.mark.slow
@pytest.mark.parametrize("seed", [1, 2, 3])
def test_verification_suite_passes_for_other_seeds(seed):
    assert all(verify_suite(seed))
