"""
Circuit representation, transform builders and the one-gate-per-line text format.

    # qubits: 3
    H 0
    CRZ 0 1 1.5707963267948966
    RZ 2 0.3

Qubits are 0-based. A `# qubits: N` comment fixes the register size;
without one, the size is one more than the largest index used.
"""

import math
import re
from collections.abc import Iterator
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError, StructuralError
from .gates.base import ARITY, ANGLED, GateKind, GateOp

_QUBITS_HEADER = re.compile(r"#\s*qubits\s*:\s*(\d+)\s*$", re.IGNORECASE)


@dataclass(frozen=True, kw_only=True)
class Circuit:
    n_qubits: int
    gates: tuple[GateOp, ...] = ()

    def __post_init__(self):
        if self.n_qubits < 1:
            raise StructuralError("a circuit needs at least one qubit")
        object.__setattr__(self, "gates", tuple(self.gates))
        for gate in self.gates:
            gate.check_qubits(self.n_qubits)

    def __len__(self) -> int:
        return len(self.gates)

    def __iter__(self) -> Iterator[GateOp]:
        return iter(self.gates)

    def count(self, kind: GateKind) -> int:
        return sum(1 for g in self.gates if g.kind == kind)


def build_hadamard_transform(n: int) -> Circuit:
    return Circuit(n_qubits=n, gates=tuple(GateOp.h(q) for q in range(n)))


def build_truncated_fourier(n: int) -> Circuit:
    """H on each qubit i, then CRZ(pi/2) to i+1 and CRZ(pi/4) to i+2 where those exist."""
    gates: list[GateOp] = []
    for i in range(n):
        gates.append(GateOp.h(i))
        if i + 1 < n:
            gates.append(GateOp.crz(i, i + 1, math.pi / 2))
        if i + 2 < n:
            gates.append(GateOp.crz(i, i + 2, math.pi / 4))
    return Circuit(n_qubits=n, gates=tuple(gates))


BUILDERS = {
    "hadamard_transform": build_hadamard_transform,
    "truncated_fourier": build_truncated_fourier,
}


def _parse_line(line: str, lineno: int) -> GateOp:
    tokens = line.split()
    try:
        kind = GateKind(tokens[0].upper())
    except ValueError:
        raise ConfigError(f"unknown gate '{tokens[0]}'", line=lineno) from None
    expected = ARITY[kind] + (1 if kind in ANGLED else 0)
    if len(tokens) - 1 != expected:
        raise ConfigError(
            f"{kind} takes {expected} argument(s), got {len(tokens) - 1}", line=lineno
        )
    try:
        qubits = tuple(int(t) for t in tokens[1 : 1 + ARITY[kind]])
        angle = float(tokens[-1]) if kind in ANGLED else None
    except ValueError as e:
        raise ConfigError(f"bad gate argument: {e}", line=lineno) from None
    try:
        return GateOp(kind=kind, qubits=qubits, angle=angle)
    except StructuralError as e:
        raise ConfigError(e.message, line=lineno) from None


def parse_circuit(text: str, n_qubits: int | None = None) -> Circuit:
    gates: list[GateOp] = []
    declared = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if header := _QUBITS_HEADER.match(stripped):
            declared = int(header.group(1))
            continue
        body = stripped.split("#", 1)[0].strip()
        if body:
            gates.append(_parse_line(body, lineno))
    if n_qubits is not None and declared is not None and n_qubits != declared:
        raise ConfigError(f"circuit declares {declared} qubits, the state has {n_qubits}")
    n = n_qubits or declared or (max((max(g.qubits) for g in gates), default=0) + 1)
    try:
        return Circuit(n_qubits=n, gates=tuple(gates))
    except StructuralError as e:
        raise ConfigError(e.message) from None


def format_circuit(circuit: Circuit) -> str:
    lines = [f"# qubits: {circuit.n_qubits}", *(g.to_line() for g in circuit.gates)]
    return "\n".join(lines) + "\n"


def load_circuit(path: str | Path, n_qubits: int | None = None) -> Circuit:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e.strerror}") from None
    return parse_circuit(text, n_qubits)


def save_circuit(path: str | Path, circuit: Circuit) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_circuit(circuit))
    return path
