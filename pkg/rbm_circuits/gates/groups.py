from dataclasses import dataclass
from typing import Literal

from ..learner import LearnerCallback, LearnerConfig
from ..sampler import SamplerConfig
from .base import BaseGate
from .collection import GateCollection
from .exact import CrzGate, PauliXGate, PauliYGate, PauliZGate, RzGate
from .learned import HadamardGate

GateSet = Literal["exact", "universal"]


@dataclass(frozen=True, kw_only=True)
class GateGroup:
    name: GateSet
    gates: list[type[BaseGate]]


GATE_GROUPS: list[GateGroup] = [
    GateGroup(
        name="exact",
        gates=[RzGate, CrzGate, PauliXGate, PauliYGate, PauliZGate],
    ),
    GateGroup(
        name="universal",
        gates=[RzGate, CrzGate, PauliXGate, PauliYGate, PauliZGate, HadamardGate],
    ),
]

GATE_GROUPS_BY_NAME = {group.name: group for group in GATE_GROUPS}


def build_collection(
    name: GateSet,
    lcfg: LearnerConfig | None = None,
    scfg: SamplerConfig | None = None,
    callback: LearnerCallback | None = None,
    n_threads: int | None = None,
) -> GateCollection:
    gates = []
    for gate in GATE_GROUPS_BY_NAME[name].gates:
        if gate.method == "learned":
            gates.append(
                gate(lcfg or LearnerConfig(), scfg or SamplerConfig(), callback, n_threads)
            )
        else:
            gates.append(gate())
    return GateCollection(*gates)
