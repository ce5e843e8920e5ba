"""Collection classes for dispatching gates to their appliers."""

from ..errors import LearnerFailure, SimulationError
from ..state import RbmState
from .base import BaseGate, GateFailure, GateKind, GateOp, GateResult


class GateCollection:
    """A collection of gate appliers, one per gate kind."""

    def __init__(self, *gates: BaseGate):
        self.gates = gates
        self.gate_map: dict[GateKind, BaseGate] = {gate.kind: gate for gate in gates}

    def kinds(self) -> list[GateKind]:
        return list(self.gate_map)

    def run(self, state: RbmState, op: GateOp, *, seed: int = 0) -> GateResult:
        gate = self.gate_map.get(op.kind)
        if not gate:
            return GateFailure(state=state, method="exact", error=f"Gate {op.kind} is not supported")
        try:
            return gate(state, op, seed=seed)
        except LearnerFailure as e:
            overlaps = [r.overlap for r in e.trace]
            best = max(overlaps, default=None)
            return GateFailure(state=state, method=gate.method, overlap=best, error=e.message)
        except SimulationError as e:
            return GateFailure(state=state, method=gate.method, error=e.message)
