"""
Dense statevector backend used as ground truth at desk scale.

Amplitude index i holds bitstring B with B_j = (i >> j) & 1 (little-endian):
qubit 0 is the least significant bit. Reshaped to [2] * N in C order, qubit q
lives on axis N - 1 - q.
"""

import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .circuits import Circuit
from .errors import ConfigError, NumericError, StructuralError
from .gates.base import GateKind, GateOp
from .parallel import gather_groups, run_grouped
from .seeding import substream
from .state import RbmState, log_amplitudes

ORACLE_LIMIT_ENV = "RBMQC_ORACLE_LIMIT"
DEFAULT_ORACLE_LIMIT = 20
EXPAND_BLOCK = 1 << 14


def oracle_limit() -> int:
    """Largest qubit count the oracle accepts; `RBMQC_ORACLE_LIMIT` can only lower it."""
    return min(DEFAULT_ORACLE_LIMIT, int(os.getenv(ORACLE_LIMIT_ENV) or DEFAULT_ORACLE_LIMIT))


def check_oracle_size(n_qubits: int):
    if n_qubits > oracle_limit():
        raise StructuralError(
            f"{n_qubits} qubits exceed the statevector limit of {oracle_limit()}"
        )


@dataclass(frozen=True, eq=False)
class StateVector:
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=np.complex128).reshape(-1)
        n = amps.size.bit_length() - 1
        if amps.size < 2 or amps.size != 1 << n:
            raise StructuralError(f"statevector length {amps.size} is not 2^N with N >= 1")
        check_oracle_size(n)
        if not np.isfinite(np.linalg.norm(amps)):
            raise NumericError("statevector norm is not finite")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def n_qubits(self) -> int:
        return self.amplitudes.size.bit_length() - 1

    @classmethod
    def basis(cls, n_qubits: int, index: int = 0) -> "StateVector":
        amps = np.zeros(1 << n_qubits, dtype=np.complex128)
        amps[index] = 1.0
        return cls(amps)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalize(self) -> "StateVector":
        norm = self.norm()
        if norm == 0:
            raise NumericError("cannot normalise the zero vector")
        return StateVector(self.amplitudes / norm)

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape([2] * self.n_qubits)

    def save(self, path: str | Path) -> Path:
        """Binary dump: little-endian int32 N, then 2^N little-endian complex128."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "wb") as f:
            f.write(np.array([self.n_qubits], dtype="<i4").tobytes())
            f.write(self.amplitudes.astype("<c16").tobytes())
        return path

    @classmethod
    def load(cls, path: str | Path) -> "StateVector":
        raw = Path(path).read_bytes()
        if len(raw) < 4:
            raise ConfigError(f"{path} is too short for a statevector header")
        n = int(np.frombuffer(raw[:4], dtype="<i4")[0])
        if not 1 <= n <= oracle_limit() or len(raw) != 4 + 16 * (1 << n):
            raise ConfigError(f"{path}: header says {n} qubits, payload has {len(raw) - 4} bytes")
        return cls(np.frombuffer(raw[4:], dtype="<c16"))


SQRT1_2 = 1 / math.sqrt(2)
PAULI = {
    "I": np.eye(2, dtype=np.complex128),
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}
HADAMARD = SQRT1_2 * np.array([[1, 1], [1, -1]], dtype=np.complex128)

SINGLE_QUBIT_PAULIS = ("X", "Y", "Z")
TWO_QUBIT_PAULIS = tuple((p, q) for p in "IXYZ" for q in "IXYZ" if (p, q) != ("I", "I"))


def gate_matrix(g: GateOp) -> np.ndarray:
    """Dense matrix of `g`; two-qubit matrices use basis index 2*B_first + B_second."""
    match g.kind:
        case GateKind.H:
            return HADAMARD
        case GateKind.X | GateKind.Y | GateKind.Z:
            return PAULI[str(g.kind)]
        case GateKind.RZ:
            return np.diag([1.0, np.exp(1j * g.angle)])
        case GateKind.CRZ:
            return np.diag([1.0, 1.0, 1.0, np.exp(1j * g.angle)])
    raise StructuralError(f"no matrix for {g.kind}")


def _apply_matrix(v: StateVector, matrix: np.ndarray, qubits: tuple[int, ...]) -> StateVector:
    n = v.n_qubits
    for q in qubits:
        if not 0 <= q < n:
            raise StructuralError(f"qubit {q} out of range for {n} qubits")
    k = len(qubits)
    axes = [n - 1 - q for q in qubits]
    op = matrix.reshape([2] * (2 * k))
    out = np.tensordot(op, v.tensor(), axes=(list(range(k, 2 * k)), axes))
    out = np.moveaxis(out, list(range(k)), axes)
    return StateVector(out.reshape(-1))


def apply_gate_exact(v: StateVector, g: GateOp) -> StateVector:
    return _apply_matrix(v, gate_matrix(g), g.qubits)


def apply_pauli(v: StateVector, label: str, qubit: int) -> StateVector:
    if label == "I":
        return v
    return _apply_matrix(v, PAULI[label], (qubit,))


def apply_circuit_exact(v: StateVector, circuit: Circuit) -> StateVector:
    if circuit.n_qubits != v.n_qubits:
        raise StructuralError(
            f"circuit acts on {circuit.n_qubits} qubits, vector has {v.n_qubits}"
        )
    for g in circuit:
        v = apply_gate_exact(v, g)
    return v


def expand_rbm(state: RbmState) -> StateVector:
    """Normalised statevector of an RBM, evaluated block by block in log space."""
    n = state.n_visible
    check_oracle_size(n)
    logs = np.empty(1 << n, dtype=np.complex128)
    shifts = np.arange(n)
    for start in range(0, 1 << n, EXPAND_BLOCK):
        idx = np.arange(start, min(start + EXPAND_BLOCK, 1 << n))
        bits = ((idx[:, None] >> shifts) & 1).astype(np.int8)
        logs[start : start + idx.size] = log_amplitudes(state, bits)
    finite = np.isfinite(logs.real)
    if not np.any(finite):
        raise NumericError("RBM amplitude vanishes on every bitstring")
    shift = logs.real[finite].max()
    with np.errstate(under="ignore"):
        amps = np.where(finite, np.exp(logs - shift), 0.0)
    return StateVector(amps).normalize()


def overlap_exact(u: StateVector, v: StateVector) -> float:
    """|<u|v>| / (|u| |v|)."""
    if u.n_qubits != v.n_qubits:
        raise StructuralError(f"overlap of {u.n_qubits}- and {v.n_qubits}-qubit vectors")
    denom = u.norm() * v.norm()
    if denom == 0:
        raise NumericError("overlap with a zero vector")
    return float(min(1.0, abs(np.vdot(u.amplitudes, v.amplitudes)) / denom))


def ratio_to_scalar(u: StateVector, v: StateVector) -> float:
    """Largest |u_i - c v_i| over max |u_i|, with c the least-squares scalar."""
    c = np.vdot(v.amplitudes, u.amplitudes) / np.vdot(v.amplitudes, v.amplitudes)
    return float(np.max(np.abs(u.amplitudes - c * v.amplitudes)) / np.max(np.abs(u.amplitudes)))


@dataclass(frozen=True, kw_only=True)
class NoiseConfig:
    rate: float
    trajectories: int = 200
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.rate <= 1.0:
            raise StructuralError(f"noise rate {self.rate} outside [0, 1]")
        if self.trajectories < 1:
            raise StructuralError("at least one trajectory is needed")


def noisy_trajectory(initial: StateVector, circuit: Circuit, noise: NoiseConfig, index: int) -> StateVector:
    """One pure-state realisation of the circuit under Pauli noise.

    A uniform and a Pauli choice are drawn after every gate whatever the rate,
    so trajectory t sees the same random numbers at every noise level.
    """
    rng = substream(noise.seed, "noise", index)
    v = initial
    for g in circuit:
        v = apply_gate_exact(v, g)
        hit = rng.random() < noise.rate
        if len(g.qubits) == 1:
            label = SINGLE_QUBIT_PAULIS[rng.integers(len(SINGLE_QUBIT_PAULIS))]
            if hit:
                v = apply_pauli(v, label, g.qubits[0])
        else:
            first, second = TWO_QUBIT_PAULIS[rng.integers(len(TWO_QUBIT_PAULIS))]
            if hit:
                v = apply_pauli(apply_pauli(v, first, g.qubits[0]), second, g.qubits[1])
    return v


def _overlaps_fn(initial: StateVector, circuit: Circuit, noise: NoiseConfig, exact: StateVector):
    def run(indices: list[int]) -> list[float]:
        return [
            overlap_exact(exact, noisy_trajectory(initial, circuit, noise, t)) for t in indices
        ]

    return run


def _summarise(overlaps: list[float]) -> tuple[float, float]:
    values = np.asarray(overlaps)
    if values.size < 2:
        return float(values.mean()), 0.0
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(values.size))


def noisy_transform_overlap(
    initial: StateVector,
    circuit: Circuit,
    noise: NoiseConfig,
    n_threads: int | None = None,
) -> tuple[float, float]:
    """Trajectory mean and standard error of |<exact final|noisy final>|."""
    exact = apply_circuit_exact(initial, circuit)
    if noise.rate == 0.0:
        return 1.0, 0.0
    overlaps = run_grouped(
        _overlaps_fn(initial, circuit, noise, exact), range(noise.trajectories), n_threads
    )
    return _summarise(overlaps)


async def noisy_transform_overlap_async(
    initial: StateVector,
    circuit: Circuit,
    noise: NoiseConfig,
    n_threads: int | None = None,
) -> tuple[float, float]:
    exact = apply_circuit_exact(initial, circuit)
    if noise.rate == 0.0:
        return 1.0, 0.0
    overlaps = await gather_groups(
        _overlaps_fn(initial, circuit, noise, exact), range(noise.trajectories), n_threads
    )
    return _summarise(overlaps)


def effective_noise_rate(
    rates: list[float], overlaps: list[float], target: float
) -> float | None:
    """Rate at which the noisy overlap crosses `target`, interpolated linearly in log(rate).

    Returns None when no pair of neighbouring rates brackets the target.
    """
    pairs = sorted((r, o) for r, o in zip(rates, overlaps, strict=True) if r > 0)
    for (r0, o0), (r1, o1) in zip(pairs, pairs[1:]):
        if o0 >= target >= o1 and o0 != o1:
            frac = (o0 - target) / (o0 - o1)
            return float(math.exp(math.log(r0) + frac * (math.log(r1) - math.log(r0))))
        if o0 == target:
            return r0
    if pairs and pairs[-1][1] == target:
        return pairs[-1][0]
    return None
