"""
Command-line front end.

Usage:
    python -m rbm_circuits.cli run <config.json> [--threads N]
    python -m rbm_circuits.cli init <experiment> [-o config.json]
    python -m rbm_circuits.cli verify [--seed S]
    python -m rbm_circuits.cli expand <rbm.json> [-o state.bin]
    python -m rbm_circuits.cli circuit-check <circuit.txt> [--qubits N]
"""

import argparse
import json
import sys
from pathlib import Path

from tqdm import tqdm

from .circuits import load_circuit
from .config import ExperimentKind, load_config, template
from .engine import GateRecord
from .errors import SimulationError
from .experiments import ExperimentCallbacks, run_experiment
from .gates import GateKind
from .groundstate import EnergyRecord
from .learner import OverlapRecord
from .oracle import expand_rbm
from .state import load_state
from .verify import PropertyResult, verify_suite


class _Progress:
    """tqdm bars for VMC iterations and circuit gates, plus console lines."""

    def __init__(self, quiet: bool = False):
        self.quiet = quiet
        self.energy_bar: tqdm | None = None
        self.gate_bar: tqdm | None = None

    def write(self, message: str):
        if not self.quiet:
            tqdm.write(message)

    def stage(self, message: str):
        self.close()
        self.write(f"\n{message}")

    def energy(self, record: EnergyRecord):
        if self.quiet:
            return
        if self.energy_bar is None:
            self.energy_bar = tqdm(desc="VMC", unit="it", leave=False)
        self.energy_bar.update(1)
        self.energy_bar.set_postfix(E=f"{record.energy:.6f}", se=f"{record.std_error:.1e}")

    def learner(self, record: OverlapRecord):
        if self.gate_bar is not None:
            self.gate_bar.set_postfix(it=record.iteration, overlap=f"{record.overlap:.4f}")

    def gate(self, record: GateRecord, exact_overlap: float | None):
        if self.quiet:
            return
        if self.gate_bar is None:
            self.gate_bar = tqdm(desc="gates", unit="gate", leave=False)
        self.gate_bar.update(1)
        if record.overlap is not None:
            line = f"  {record.index:3d} {record.gate.to_line():<28} overlap {record.overlap:.4f} ± {record.std_error:.1e}"
            if exact_overlap is not None:
                line += f"  exact {exact_overlap:.4f}"
            self.write(line)

    def noise(self, rate: float, mean: float, std_error: float):
        self.write(f"  r={rate:<8g} overlap {mean:.4f} ± {std_error:.1e}")

    def close(self):
        for bar in (self.energy_bar, self.gate_bar):
            if bar is not None:
                bar.close()
        self.energy_bar = self.gate_bar = None

    def callbacks(self) -> ExperimentCallbacks:
        return ExperimentCallbacks(
            stage=self.stage,
            gate=self.gate,
            learner=self.learner,
            energy=self.energy,
            noise=self.noise,
        )


def _run(args) -> int:
    config = load_config(args.config)
    progress = _Progress(args.quiet)
    print("=" * 60)
    print(f"Experiment: {config.experiment_id} ({config.experiment})")
    print(f"Seed: {config.seed}   Output: {config.output.dir}")
    print("=" * 60)
    try:
        outcome = run_experiment(config, progress.callbacks(), args.threads)
    finally:
        progress.close()

    print("\n" + "=" * 60)
    for key, value in outcome.summary.items():
        if isinstance(value, float):
            value = f"{value:.6g}"
        print(f"  {key}: {value}")
    print("=" * 60)
    if not outcome:
        print(f"✗ {outcome.error}", file=sys.stderr)
        return outcome.status
    print(f"✓ Results written to {config.output.dir}")
    return 0


def _init(args) -> int:
    output = Path(args.output or f"{args.experiment}.json")
    if output.exists() and not args.force:
        print(f"✗ {output} already exists; use --force to overwrite", file=sys.stderr)
        return 1
    output.write_text(json.dumps(template(args.experiment), indent=2) + "\n")
    print(f"✓ Template written to {output}")
    return 0


def _verify(args) -> int:
    print("=" * 60)
    print(f"Verification suite (seed {args.seed})")
    print("=" * 60)

    def report(result: PropertyResult):
        mark = "✓" if result else "✗"
        print(f"{mark} {result.name}: {result.detail}")

    results = verify_suite(args.seed, report)
    failed = [r for r in results if not r]
    print("-" * 60)
    if failed:
        print(f"✗ {len(failed)} of {len(results)} properties failed")
        return 1
    print(f"✓ All {len(results)} properties passed")
    return 0


def _expand(args) -> int:
    state, metadata = load_state(args.rbm_file)
    vector = expand_rbm(state)
    output = Path(args.output or Path(args.rbm_file).with_suffix(".bin"))
    vector.save(output)
    print(f"✓ {vector.n_qubits}-qubit statevector written to {output}")
    if metadata:
        print(f"  - Metadata: {json.dumps(metadata)}")
    return 0


def _circuit_check(args) -> int:
    circuit = load_circuit(args.circuit_file, args.qubits)
    print(f"✓ {args.circuit_file}: {len(circuit)} gates on {circuit.n_qubits} qubits")
    for kind in GateKind:
        if count := circuit.count(kind):
            print(f"  - {kind}: {count}")
    print(f"  - Hidden units added: {circuit.count(GateKind.CRZ)}")
    print(f"  - Learned gates: {circuit.count(GateKind.H)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="python -m rbm_circuits.cli",
        description="Simulate quantum circuits on RBM wave functions",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Run the experiment described by a config file")
    run.add_argument("config", type=str, help="Experiment config (JSON)")
    run.add_argument(
        "--threads",
        type=int,
        default=None,
        help="Worker threads for sampling and noise trajectories (default: $RBMQC_THREADS or 1)",
    )
    run.add_argument("--quiet", action="store_true", help="Only print the summary")
    run.set_defaults(handler=_run)

    init = sub.add_parser("init", help="Write a config template with every default spelled out")
    init.add_argument("experiment", choices=[k.value for k in ExperimentKind])
    init.add_argument("-o", "--output", type=str, default=None, help="Output file (default: <experiment>.json)")
    init.add_argument("--force", action="store_true", help="Overwrite an existing file")
    init.set_defaults(handler=_init)

    verify = sub.add_parser("verify", help="Run the invariant battery")
    verify.add_argument("--seed", type=int, default=0, help="Seed for the random instances (default: 0)")
    verify.set_defaults(handler=_verify)

    expand = sub.add_parser("expand", help="Dump an RBM file as a binary statevector")
    expand.add_argument("rbm_file", type=str)
    expand.add_argument("-o", "--output", type=str, default=None, help="Output file (default: <rbm_file>.bin)")
    expand.set_defaults(handler=_expand)

    check = sub.add_parser("circuit-check", help="Parse a circuit file and summarise it")
    check.add_argument("circuit_file", type=str)
    check.add_argument("--qubits", type=int, default=None, help="Register size if the file has no header")
    check.set_defaults(handler=_circuit_check)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except SimulationError as e:
        print(f"Error: {e.message}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
