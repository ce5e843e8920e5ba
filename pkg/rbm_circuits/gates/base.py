import math
from abc import ABCMeta, abstractmethod
from dataclasses import dataclass, replace
from enum import StrEnum
from typing import TYPE_CHECKING, ClassVar, Literal

from ..errors import StructuralError
from ..state import RbmState

if TYPE_CHECKING:
    from ..learner import LearnReport

Method = Literal["exact", "learned"]


class GateKind(StrEnum):
    RZ = "RZ"
    CRZ = "CRZ"
    H = "H"
    X = "X"
    Y = "Y"
    Z = "Z"


ARITY: dict[GateKind, int] = {
    GateKind.RZ: 1,
    GateKind.CRZ: 2,
    GateKind.H: 1,
    GateKind.X: 1,
    GateKind.Y: 1,
    GateKind.Z: 1,
}

ANGLED = frozenset({GateKind.RZ, GateKind.CRZ})


@dataclass(frozen=True, kw_only=True)
class GateOp:
    """A gate descriptor: kind, qubit indices (0-based) and, for RZ/CRZ, an angle in radians."""

    kind: GateKind
    qubits: tuple[int, ...]
    angle: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", GateKind(self.kind))
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        if len(self.qubits) != ARITY[self.kind]:
            raise StructuralError(
                f"{self.kind} acts on {ARITY[self.kind]} qubit(s), got {len(self.qubits)}"
            )
        if len(set(self.qubits)) != len(self.qubits):
            raise StructuralError(f"{self.kind} needs distinct qubits, got {self.qubits}")
        if any(q < 0 for q in self.qubits):
            raise StructuralError(f"negative qubit index in {self.qubits}")
        if self.kind in ANGLED:
            if self.angle is None or not math.isfinite(self.angle):
                raise StructuralError(f"{self.kind} needs a finite angle")
            object.__setattr__(self, "angle", float(self.angle))
        elif self.angle is not None:
            raise StructuralError(f"{self.kind} takes no angle")

    @classmethod
    def rz(cls, qubit: int, phi: float) -> "GateOp":
        return cls(kind=GateKind.RZ, qubits=(qubit,), angle=phi)

    @classmethod
    def crz(cls, control: int, target: int, phi: float) -> "GateOp":
        return cls(kind=GateKind.CRZ, qubits=(control, target), angle=phi)

    @classmethod
    def h(cls, qubit: int) -> "GateOp":
        return cls(kind=GateKind.H, qubits=(qubit,))

    @classmethod
    def x(cls, qubit: int) -> "GateOp":
        return cls(kind=GateKind.X, qubits=(qubit,))

    @classmethod
    def y(cls, qubit: int) -> "GateOp":
        return cls(kind=GateKind.Y, qubits=(qubit,))

    @classmethod
    def z(cls, qubit: int) -> "GateOp":
        return cls(kind=GateKind.Z, qubits=(qubit,))

    def check_qubits(self, n_qubits: int):
        if max(self.qubits) >= n_qubits:
            raise StructuralError(f"{self.to_line()} addresses a qubit beyond {n_qubits} qubits")

    def to_line(self) -> str:
        """Render in the circuit text format; angles use repr so parsing is lossless."""
        parts = [str(self.kind), *(str(q) for q in self.qubits)]
        if self.angle is not None:
            parts.append(repr(self.angle))
        return " ".join(parts)


@dataclass(kw_only=True, frozen=True)
class GateResult:
    """Represents the outcome of applying one gate to an RBM state."""

    state: RbmState
    method: Method
    overlap: float | None = None
    std_error: float | None = None
    report: "LearnReport | None" = None
    error: str | None = None

    def __bool__(self):
        return self.error is None

    def replace(self, **kwargs):
        """Returns a new GateResult with the given fields replaced."""
        return replace(self, **kwargs)


class GateFailure(GateResult):
    """A GateResult whose `state` is the unchanged input state."""


class BaseGate(metaclass=ABCMeta):
    """Abstract base class for gate appliers."""

    kind: ClassVar[GateKind]
    method: ClassVar[Method]

    @abstractmethod
    def __call__(self, state: RbmState, op: GateOp, *, seed: int = 0) -> GateResult:
        """Applies `op` to `state`."""
        ...
