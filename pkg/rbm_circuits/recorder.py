"""
Experiment recording: structured events, per-gate result rows and the run summary.
"""

import csv
import json
from dataclasses import asdict, dataclass, fields
from datetime import datetime
from pathlib import Path
from typing import Any

from .engine import GateRecord
from .groundstate import EnergyRecord
from .learner import OverlapRecord

TRACE_FILE = "trace.csv"
TIMINGS_FILE = "timings.csv"
EVENTS_FILE = "events.json"
SUMMARY_FILE = "summary.json"
NOISE_FILE = "noise.csv"


@dataclass(frozen=True, kw_only=True)
class ResultRecord:
    """One row of trace.csv. Wall times go to timings.csv so rows stay reproducible."""

    experiment_id: str
    gate_index: int
    gate_kind: str
    qubits: str
    overlap_estimate: float | None
    std_error: float | None
    exact_overlap: float | None
    hidden_units: int
    seed: int

    @classmethod
    def header(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def row(self) -> list[str]:
        return [_cell(getattr(self, name)) for name in self.header()]


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


class ExperimentRecorder:
    """Records events of one experiment run and writes them to an output directory."""

    def __init__(self, experiment_id: str, seed: int):
        self.experiment_id = experiment_id
        self.seed = seed
        self.events: list[dict[str, Any]] = []
        self.rows: list[ResultRecord] = []
        self.timings: list[tuple[int, float]] = []
        self.noise_rows: list[tuple[float, float, float]] = []
        self.session_id = datetime.now().isoformat()

    def record_config(self, config: dict[str, Any]):
        self.events.append({"type": "config", "content": config})

    def record_gate(self, record: GateRecord, exact_overlap: float | None = None):
        """Record a finished gate; `exact_overlap` is the oracle fidelity when available."""
        self.rows.append(
            ResultRecord(
                experiment_id=self.experiment_id,
                gate_index=record.index,
                gate_kind=str(record.gate.kind),
                qubits=" ".join(str(q) for q in record.gate.qubits),
                overlap_estimate=record.overlap,
                std_error=record.std_error,
                exact_overlap=exact_overlap,
                hidden_units=record.hidden_units_after,
                seed=self.seed,
            )
        )
        self.timings.append((record.index, record.wall_time))
        self.events.append({
            "type": "gate",
            "content": {
                "index": record.index,
                "gate": record.gate.to_line(),
                "method": record.method,
                "overlap": record.overlap,
                "std_error": record.std_error,
                "exact_overlap": exact_overlap,
                "iterations": record.iterations,
                "hidden_units": record.hidden_units_after,
            },
        })

    def record_learner(self, record: OverlapRecord, gate_index: int | None = None):
        """Every learner step is recorded; `overlap_check` events are the ones that pick the best state."""
        self.events.append({
            "type": "overlap_check" if record.checked else "learner_step",
            "content": {"gate_index": gate_index, **asdict(record)},
        })

    def record_energy(self, record: EnergyRecord):
        self.events.append({"type": "energy", "content": asdict(record)})

    def record_noise(self, rate: float, mean: float, std_error: float):
        self.noise_rows.append((rate, mean, std_error))
        self.events.append({
            "type": "noise",
            "content": {"rate": rate, "mean_overlap": mean, "std_error": std_error},
        })

    def record_failure(self, message: str):
        self.events.append({"type": "failure", "content": {"error": message}})

    def save(self, output_dir: str | Path, summary: dict[str, Any]) -> dict[str, Path]:
        """Write trace.csv, timings.csv, events.json, summary.json and, after a sweep, noise.csv."""
        out = Path(output_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {name: out / name for name in (TRACE_FILE, TIMINGS_FILE, EVENTS_FILE, SUMMARY_FILE)}

        with open(paths[TRACE_FILE], "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(ResultRecord.header())
            writer.writerows(r.row() for r in self.rows)

        with open(paths[TIMINGS_FILE], "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["experiment_id", "gate_index", "wall_time_s"])
            writer.writerows([self.experiment_id, i, repr(t)] for i, t in self.timings)

        if self.noise_rows:
            paths[NOISE_FILE] = out / NOISE_FILE
            with open(paths[NOISE_FILE], "w", newline="") as f:
                writer = csv.writer(f, lineterminator="\n")
                writer.writerow(["experiment_id", "rate", "mean_overlap", "std_error", "seed"])
                writer.writerows(
                    [self.experiment_id, repr(r), repr(m), repr(s), self.seed]
                    for r, m, s in self.noise_rows
                )

        with open(paths[EVENTS_FILE], "w") as f:
            json.dump(
                {
                    "experiment_id": self.experiment_id,
                    "session_id": self.session_id,
                    "recorded_at": datetime.now().isoformat(),
                    "events": self.events,
                },
                f,
                indent=2,
            )

        with open(paths[SUMMARY_FILE], "w") as f:
            json.dump({"experiment_id": self.experiment_id, "seed": self.seed, **summary}, f, indent=2)

        return paths
