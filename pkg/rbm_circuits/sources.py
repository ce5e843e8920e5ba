"""
Amplitude sources the overlap learner can be pointed at.

A source knows how to evaluate log-amplitudes on a batch of bitstrings and
how to draw a batch from its own |A|^2.
"""

from abc import ABCMeta, abstractmethod

import numpy as np

from .errors import StructuralError
from .oracle import StateVector
from .sampler import (
    SampleBatch,
    SamplerConfig,
    SampleTarget,
    enumerate_batch,
    hadamard_log_amplitudes,
    run_chains,
)
from .seeding import substream
from .state import RbmState, bits_to_index, log_amplitudes


class AmplitudeSource(metaclass=ABCMeta):
    """Unnormalised amplitudes over the 2^N computational basis."""

    n_qubits: int

    @property
    @abstractmethod
    def label(self) -> str: ...

    @abstractmethod
    def log_amplitudes(self, bits: np.ndarray) -> np.ndarray:
        """log A(B) for a (S, N) batch; -inf marks A(B) = 0."""
        ...

    @abstractmethod
    def draw(self, cfg: SamplerConfig, n_threads: int | None = None) -> SampleBatch:
        """Sample `cfg.total_samples` bitstrings from |A|^2."""
        ...

    def enumerate(self) -> SampleBatch:
        return enumerate_batch(self.log_amplitudes, self.n_qubits, self.label)


class RbmTarget(AmplitudeSource):
    """The RBM itself, i.e. the identity gate."""

    def __init__(self, state: RbmState):
        self.state = state
        self.n_qubits = state.n_visible

    @property
    def label(self) -> str:
        return "Psi"

    def log_amplitudes(self, bits: np.ndarray) -> np.ndarray:
        return log_amplitudes(self.state, bits)

    def draw(self, cfg: SamplerConfig, n_threads: int | None = None) -> SampleBatch:
        return run_chains(self.state, SampleTarget.psi(), cfg, n_threads)


class HadamardTarget(AmplitudeSource):
    """Phi = H_qubit Psi for an RBM Psi."""

    def __init__(self, state: RbmState, qubit: int):
        if not 0 <= qubit < state.n_visible:
            raise StructuralError(f"qubit {qubit} out of range for {state.n_visible} qubits")
        self.state = state
        self.qubit = qubit
        self.n_qubits = state.n_visible

    @property
    def label(self) -> str:
        return f"HPhi({self.qubit})"

    def log_amplitudes(self, bits: np.ndarray) -> np.ndarray:
        return hadamard_log_amplitudes(self.state, self.qubit, bits)

    def draw(self, cfg: SamplerConfig, n_threads: int | None = None) -> SampleBatch:
        return run_chains(self.state, SampleTarget.hphi(self.qubit), cfg, n_threads)


class VectorTarget(AmplitudeSource):
    """An explicitly stored statevector, sampled exactly rather than by MCMC.

    Each chain is an independent draw of `samples_per_chain` indices from
    |v|^2 using its own substream, so batches keep the chain structure the
    jackknife needs.
    """

    def __init__(self, vector: StateVector):
        self.vector = vector
        self.n_qubits = vector.n_qubits
        p = np.abs(vector.amplitudes) ** 2
        total = p.sum()
        if not total > 0:
            raise StructuralError("target statevector is identically zero")
        self._p = p / total

    @property
    def label(self) -> str:
        return "Vector"

    def log_amplitudes(self, bits: np.ndarray) -> np.ndarray:
        bits = np.asarray(bits)
        if bits.ndim != 2 or bits.shape[1] != self.n_qubits:
            raise StructuralError(
                f"bitstring array has shape {bits.shape}, expected (S, {self.n_qubits})"
            )
        with np.errstate(divide="ignore"):
            return np.log(self.vector.amplitudes[bits_to_index(bits)])

    def draw(self, cfg: SamplerConfig, n_threads: int | None = None) -> SampleBatch:
        shifts = np.arange(self.n_qubits)
        rows = []
        for chain in range(cfg.n_chains):
            rng = substream(cfg.seed, "vector", chain)
            idx = rng.choice(self._p.size, size=cfg.samples_per_chain, p=self._p)
            rows.append(((idx[:, None] >> shifts) & 1).astype(np.int8))
        bits = np.concatenate(rows)
        return SampleBatch(
            bitstrings=bits,
            log_amps=self.log_amplitudes(bits),
            source=self.label,
            chain_ids=np.repeat(np.arange(cfg.n_chains), cfg.samples_per_chain),
        )
