from typing import Literal

from ..errors import StructuralError
from ..learner import LearnerCallback, LearnerConfig, learn_hadamard
from ..sampler import SamplerConfig
from ..state import RbmState
from .base import BaseGate, GateKind, GateOp, GateResult


class HadamardGate(BaseGate):
    """
    Applies H approximately by fitting a same-shape RBM to H|Psi>.
    The gate's seed overrides the learner seed so every gate in a circuit
    gets its own stream.
    """

    kind = GateKind.H
    method: Literal["learned"] = "learned"

    def __init__(
        self,
        lcfg: LearnerConfig,
        scfg: SamplerConfig,
        callback: LearnerCallback | None = None,
        n_threads: int | None = None,
    ):
        self.lcfg = lcfg
        self.scfg = scfg
        self.callback = callback
        self.n_threads = n_threads

    def __call__(self, state: RbmState, op: GateOp, *, seed: int = 0) -> GateResult:
        if op.kind != GateKind.H:
            raise StructuralError(f"HadamardGate cannot apply {op.kind}")
        op.check_qubits(state.n_visible)
        learned, report = learn_hadamard(
            state,
            op.qubits[0],
            self.lcfg.replace(seed=seed),
            self.scfg,
            self.callback,
            self.n_threads,
        )
        return GateResult(
            state=learned,
            method=self.method,
            overlap=report.final_overlap,
            std_error=report.final_std_error,
            report=report,
        )
