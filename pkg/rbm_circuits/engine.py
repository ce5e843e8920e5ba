"""
Gate-by-gate circuit execution on RBM states.
"""

import math
import time
from collections.abc import Callable, Iterator
from dataclasses import dataclass

from .circuits import Circuit
from .errors import ExecutionAborted, StructuralError
from .gates import GateCollection, GateFailure, GateOp
from .gates.base import Method
from .gates.groups import build_collection
from .learner import LearnerCallback, LearnerConfig
from .sampler import SamplerConfig
from .seeding import derive_seed
from .state import RbmState


@dataclass(frozen=True, kw_only=True)
class GateRecord:
    index: int
    gate: GateOp
    method: Method
    wall_time: float
    hidden_units_after: int
    overlap: float | None = None
    std_error: float | None = None
    iterations: int | None = None


@dataclass(frozen=True)
class ExecutionTrace:
    records: tuple[GateRecord, ...] = ()

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[GateRecord]:
        return iter(self.records)

    def __add__(self, other: "ExecutionTrace | GateRecord") -> "ExecutionTrace":
        if isinstance(other, GateRecord):
            return ExecutionTrace(self.records + (other,))
        return ExecutionTrace(self.records + other.records)

    def learned(self) -> list[GateRecord]:
        return [r for r in self.records if r.overlap is not None]

    def fidelity_product(self) -> float:
        """Product of the learned-gate overlap estimates, each capped at 1."""
        return math.prod(min(1.0, r.overlap) for r in self.learned())

    def min_overlap(self) -> float | None:
        return min((r.overlap for r in self.learned()), default=None)


GateCallback = Callable[[GateRecord, RbmState], None]


def execute(
    circuit: Circuit,
    state: RbmState,
    lcfg: LearnerConfig | None = None,
    scfg: SamplerConfig | None = None,
    *,
    gate_callback: GateCallback | None = None,
    learner_callback: LearnerCallback | None = None,
    collection: GateCollection | None = None,
    n_threads: int | None = None,
) -> tuple[RbmState, ExecutionTrace]:
    """Apply the gates of `circuit` in order.

    Gate i runs with seed derive_seed(lcfg.seed, "gate", i). A failing gate
    raises ExecutionAborted carrying the last good state and the trace so far.
    """
    if circuit.n_qubits != state.n_visible:
        raise StructuralError(
            f"circuit acts on {circuit.n_qubits} qubits, state has {state.n_visible}"
        )
    lcfg = lcfg or LearnerConfig()
    collection = collection or build_collection(
        "universal", lcfg, scfg, learner_callback, n_threads
    )
    trace = ExecutionTrace()
    for index, gate in enumerate(circuit):
        start = time.perf_counter()
        result = collection.run(state, gate, seed=derive_seed(lcfg.seed, "gate", index))
        if isinstance(result, GateFailure):
            raise ExecutionAborted(
                f"gate {index} ({gate.to_line()}) failed: {result.error}",
                state=state,
                trace=trace,
            )
        state = result.state
        record = GateRecord(
            index=index,
            gate=gate,
            method=result.method,
            wall_time=time.perf_counter() - start,
            hidden_units_after=state.n_hidden,
            overlap=result.overlap,
            std_error=result.std_error,
            iterations=result.report.iterations_run if result.report else None,
        )
        trace = trace + record
        if gate_callback:
            gate_callback(record, state)
    return state, trace
