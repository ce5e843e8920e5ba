"""
End-to-end experiment pipelines: prepare -> transform -> compare.

`run_experiment` never raises for module failures. It flushes whatever trace
it has, writes a summary with `"status": "failed"` and returns a nonzero
status, leaving presentation to the caller.
"""

import json
import math
from collections.abc import Callable
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .circuits import BUILDERS, Circuit, load_circuit
from .config import ExperimentConfig, ExperimentKind
from .engine import GateRecord, execute
from .errors import ExecutionAborted, SimulationError
from .groundstate import (
    EnergyRecord,
    estimate_energy,
    exact_ground_state,
    fit_to_statevector,
    tfim_hamiltonian,
    vmc_ground_state,
)
from .learner import OverlapRecord
from .oracle import (
    NoiseConfig,
    StateVector,
    apply_gate_exact,
    effective_noise_rate,
    expand_rbm,
    noisy_transform_overlap,
    oracle_limit,
    overlap_exact,
)
from .recorder import ExperimentRecorder
from .seeding import derive_seed
from .sources import RbmTarget
from .state import RbmState, load_state, save_state


@dataclass(frozen=True, kw_only=True)
class ExperimentCallbacks:
    """Progress hooks; every one is optional."""

    stage: Callable[[str], None] | None = None
    gate: Callable[[GateRecord, float | None], None] | None = None
    learner: Callable[[OverlapRecord], None] | None = None
    energy: Callable[[EnergyRecord], None] | None = None
    noise: Callable[[float, float, float], None] | None = None


@dataclass(frozen=True, kw_only=True)
class ExperimentOutcome:
    status: int
    summary: dict[str, Any]
    paths: dict[str, Path] = field(default_factory=dict)
    error: str | None = None

    def __bool__(self):
        return self.status == 0


def config_document(config: ExperimentConfig) -> dict[str, Any]:
    """JSON-safe copy of a resolved config, as stored in events.json."""
    return json.loads(json.dumps(asdict(config), default=str))


class _Experiment:
    def __init__(
        self, config: ExperimentConfig, callbacks: ExperimentCallbacks, n_threads: int | None
    ):
        self.config = config
        self.callbacks = callbacks
        self.n_threads = n_threads
        self.recorder = ExperimentRecorder(config.experiment_id, config.seed)
        self.summary: dict[str, Any] = {"experiment": config.experiment.value}
        self.gates_done = 0

    def stage(self, message: str):
        if self.callbacks.stage:
            self.callbacks.stage(message)

    def oracle_on(self, n_qubits: int) -> bool:
        return self.config.oracle and n_qubits <= oracle_limit()

    def on_learner(self, record: OverlapRecord, gate_index: int | None):
        self.recorder.record_learner(record, gate_index)
        if self.callbacks.learner:
            self.callbacks.learner(record)

    def on_energy(self, record: EnergyRecord):
        self.recorder.record_energy(record)
        if self.callbacks.energy:
            self.callbacks.energy(record)

    def save_final(self, state: RbmState, **metadata: Any) -> Path | None:
        path = self.config.output.state_file
        if path is None:
            return None
        save_state(
            path,
            state,
            {"experiment_id": self.config.experiment_id, "seed": self.config.seed, **metadata},
        )
        self.summary["state_file"] = str(path)
        return path

    # ground state

    def prepare_ground_state(self) -> RbmState:
        cfg = self.config
        self.stage(f"VMC ground state on {cfg.lattice.describe()}, alpha={cfg.alpha}")
        state, energies = vmc_ground_state(
            cfg.lattice, cfg.tfim, cfg.alpha, cfg.vmc, cfg.sampler, self.on_energy, self.n_threads
        )
        self.summary["vmc_iterations"] = len(energies)
        self.summary["vmc_final_energy"] = energies[-1].energy
        self.summary["state_source"] = "vmc"

        e0 = None
        if self.oracle_on(cfg.n_qubits):
            e0, ground = exact_ground_state(cfg.lattice, cfg.tfim)
            self.summary["exact_energy"] = e0
            self.summary["vmc_energy_relative_error"] = abs(energies[-1].energy - e0) / abs(e0)
            if cfg.refine_with_fit:
                self.stage("refining against the exact ground state")
                state = fit_to_statevector(
                    ground,
                    cfg.alpha,
                    cfg.learner.replace(seed=derive_seed(cfg.seed, "fit")),
                    cfg.sampler,
                    lambda record: self.on_learner(record, None),
                    initial=state,
                    n_threads=self.n_threads,
                )
                self.summary["state_source"] = "fit"
            self.summary["ground_state_overlap"] = overlap_exact(expand_rbm(state), ground)
        self.report_energy(state, e0)
        return state

    def report_energy(self, state: RbmState, e0: float | None):
        cfg = self.config
        source = RbmTarget(state)
        if cfg.vmc.exact_enumeration:
            batch = source.enumerate()
        else:
            batch = source.draw(
                cfg.sampler.sized(cfg.vmc.samples_per_iteration, derive_seed(cfg.seed, "energy")),
                self.n_threads,
            )
        energy, se = estimate_energy(state, cfg.lattice, cfg.tfim, batch, cfg.vmc.lookup_tables)
        self.summary["energy"] = energy.real
        self.summary["energy_std_error"] = se
        if e0 is not None:
            v = expand_rbm(state).amplitudes
            h = tfim_hamiltonian(cfg.lattice, cfg.tfim)
            self.summary["energy_expectation_exact"] = float(np.vdot(v, h @ v).real)
            self.summary["energy_relative_error"] = abs(energy.real - e0) / abs(e0)

    def initial_state(self) -> RbmState:
        if self.config.initial_state is not None:
            self.stage(f"loading initial state from {self.config.initial_state}")
            state, _ = load_state(self.config.initial_state)
            return state
        return self.prepare_ground_state()

    # circuits

    def run_circuit(self, circuit: Circuit, state: RbmState) -> RbmState:
        cfg = self.config
        checkpoints = cfg.output.checkpoint_dir
        exact: list[StateVector] = []
        if self.oracle_on(circuit.n_qubits):
            exact.append(expand_rbm(state))

        def on_gate(record: GateRecord, new_state: RbmState):
            exact_overlap = None
            if exact:
                exact[0] = apply_gate_exact(exact[0], record.gate)
                exact_overlap = overlap_exact(expand_rbm(new_state), exact[0])
            self.recorder.record_gate(record, exact_overlap)
            self.gates_done = record.index + 1
            if checkpoints is not None:
                save_state(
                    checkpoints / f"gate_{record.index:03d}.json",
                    new_state,
                    {"gate_index": record.index, "gate": record.gate.to_line()},
                )
            if self.callbacks.gate:
                self.callbacks.gate(record, exact_overlap)

        self.summary["total_gates"] = len(circuit)
        self.summary["hidden_units_before"] = state.n_hidden
        self.stage(f"running {len(circuit)} gates on {circuit.n_qubits} qubits")
        try:
            final, trace = execute(
                circuit,
                state,
                cfg.learner,
                cfg.sampler,
                gate_callback=on_gate,
                learner_callback=lambda record: self.on_learner(record, self.gates_done),
                n_threads=self.n_threads,
            )
        except ExecutionAborted as e:
            self.summarise_trace(e.trace, e.state)
            self.save_final(e.state, gates_applied=len(e.trace), partial=True)
            raise

        self.summarise_trace(trace, final)
        if exact:
            self.summary["final_exact_overlap"] = overlap_exact(expand_rbm(final), exact[0])
        return final

    def summarise_trace(self, trace, state: RbmState):
        self.summary["gates_applied"] = len(trace)
        self.summary["learned_gates"] = len(trace.learned())
        self.summary["fidelity_product"] = trace.fidelity_product()
        self.summary["min_overlap"] = trace.min_overlap()
        self.summary["hidden_units_after"] = state.n_hidden
        self.summary["hidden_units_added"] = state.n_hidden - self.summary["hidden_units_before"]

    def transform(self, name: str) -> RbmState:
        state = self.initial_state()
        circuit = BUILDERS[name](state.n_visible)
        final = self.run_circuit(circuit, state)
        self.save_final(final, circuit=name, gates_applied=len(circuit))
        return final

    def circuit_file(self) -> RbmState:
        cfg = self.config
        state, _ = load_state(cfg.initial_state)
        circuit = load_circuit(cfg.circuit_file, state.n_visible)
        final = self.run_circuit(circuit, state)
        self.save_final(final, circuit=str(cfg.circuit_file), gates_applied=len(circuit))
        return final

    # noise

    def noise_sweep(self):
        cfg = self.config
        if cfg.initial_state is not None:
            state, _ = load_state(cfg.initial_state)
            initial = expand_rbm(state)
        else:
            self.stage(f"exact ground state on {cfg.lattice.describe()}")
            e0, initial = exact_ground_state(cfg.lattice, cfg.tfim)
            self.summary["exact_energy"] = e0
        circuit = BUILDERS[cfg.circuit](initial.n_qubits)
        self.summary["circuit"] = cfg.circuit
        self.summary["total_gates"] = len(circuit)

        seed = derive_seed(cfg.seed, "noise")
        means, errors = [], []
        for rate in cfg.noise.rates:
            self.stage(f"rate {rate:g}: {cfg.noise.trajectories} trajectories")
            mean, se = noisy_transform_overlap(
                initial,
                circuit,
                NoiseConfig(rate=rate, trajectories=cfg.noise.trajectories, seed=seed),
                self.n_threads,
            )
            self.recorder.record_noise(rate, mean, se)
            if self.callbacks.noise:
                self.callbacks.noise(rate, mean, se)
            means.append(mean)
            errors.append(se)

        order = np.argsort(cfg.noise.rates)
        sorted_means = np.asarray(means)[order]
        sorted_errors = np.asarray(errors)[order]
        tolerance = 2 * np.hypot(sorted_errors[1:], sorted_errors[:-1])
        self.summary["rates"] = list(cfg.noise.rates)
        self.summary["mean_overlaps"] = means
        self.summary["std_errors"] = errors
        self.summary["monotone"] = bool(np.all(np.diff(sorted_means) <= tolerance))
        if cfg.noise.nqs_overlap is not None:
            self.summary["nqs_overlap"] = cfg.noise.nqs_overlap
            self.summary["effective_rate"] = effective_noise_rate(
                list(cfg.noise.rates), means, cfg.noise.nqs_overlap
            )

    # dispatch

    def run(self):
        cfg = self.config
        match cfg.experiment:
            case ExperimentKind.PREPARE_GROUND_STATE:
                state = self.prepare_ground_state()
                self.save_final(
                    state,
                    lattice=cfg.lattice.describe(),
                    alpha=cfg.alpha,
                    source=self.summary["state_source"],
                )
            case ExperimentKind.HADAMARD_TRANSFORM | ExperimentKind.TRUNCATED_FOURIER:
                self.transform(cfg.experiment.value)
            case ExperimentKind.RUN_CIRCUIT_FILE:
                self.circuit_file()
            case ExperimentKind.NOISE_SWEEP:
                self.noise_sweep()


def run_experiment(
    config: ExperimentConfig,
    callbacks: ExperimentCallbacks | None = None,
    n_threads: int | None = None,
) -> ExperimentOutcome:
    """Execute the configured pipeline and write its result files to `config.output.dir`.

    Returns status 0 on success. On any SimulationError the partial trace and
    a summary with the diagnostic are still written and the status is 1.
    """
    experiment = _Experiment(config, callbacks or ExperimentCallbacks(), n_threads)
    experiment.recorder.record_config(config_document(config))
    error = None
    try:
        experiment.run()
    except SimulationError as e:
        error = e.message
        experiment.recorder.record_failure(error)

    summary = {
        "status": "failed" if error else "ok",
        **experiment.summary,
        **({"error": error} if error else {}),
    }
    summary = {k: _json_value(v) for k, v in summary.items()}
    paths = experiment.recorder.save(config.output.dir, summary)
    return ExperimentOutcome(status=1 if error else 0, summary=summary, paths=paths, error=error)


def _json_value(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, np.generic):
        return value.item()
    return value
