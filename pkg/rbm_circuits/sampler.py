"""
Metropolis-Hastings sampling of bitstrings from |Psi|^2 or |H_l Psi|^2.

Chains advance in lockstep as numpy rows. Every chain owns a random
substream derived from (seed, "sampler", chain index) and pre-draws all of
its proposals, so the merged batch does not depend on how chains are grouped
over threads.
"""

import math
from dataclasses import dataclass, replace
from enum import StrEnum

import numpy as np

from .errors import SamplerError, StructuralError
from .parallel import gather_groups, run_grouped
from .seeding import substream
from .state import ZERO_LOG, RbmState, all_bitstrings, check_bits, log1pexp, log_amplitudes, thetas

MAX_INIT_ATTEMPTS = 64
LOG_SQRT2 = 0.5 * math.log(2.0)


class TargetKind(StrEnum):
    PSI = "psi"
    HPHI = "hphi"


@dataclass(frozen=True, kw_only=True)
class SampleTarget:
    kind: TargetKind
    qubit: int | None = None

    @classmethod
    def psi(cls) -> "SampleTarget":
        return cls(kind=TargetKind.PSI)

    @classmethod
    def hphi(cls, qubit: int) -> "SampleTarget":
        return cls(kind=TargetKind.HPHI, qubit=qubit)

    @property
    def label(self) -> str:
        return "Psi" if self.kind == TargetKind.PSI else f"HPhi({self.qubit})"


@dataclass(frozen=True, kw_only=True)
class SamplerConfig:
    n_chains: int = 16
    burn_in_sweeps: int = 200
    sweeps_between_samples: int = 1
    samples_per_chain: int = 256
    seed: int = 0
    lookup_tables: bool = True

    def __post_init__(self):
        if self.n_chains < 1 or self.sweeps_between_samples < 1 or self.samples_per_chain < 1:
            raise StructuralError(
                "n_chains, sweeps_between_samples and samples_per_chain must be positive"
            )
        if self.burn_in_sweeps < 0:
            raise StructuralError("burn_in_sweeps must be non-negative")

    @property
    def total_samples(self) -> int:
        return self.n_chains * self.samples_per_chain

    def replace(self, **kwargs) -> "SamplerConfig":
        return replace(self, **kwargs)

    def sized(self, total_samples: int, seed: int) -> "SamplerConfig":
        """Same chains, enough samples per chain for `total_samples` draws, new seed."""
        return replace(self, samples_per_chain=math.ceil(total_samples / self.n_chains), seed=seed)


@dataclass(frozen=True, kw_only=True, eq=False)
class SampleBatch:
    """Bitstrings with cached target log-amplitudes.

    Monte Carlo batches have `weights=None`; exact enumeration batches carry
    normalised |A|^2 weights over all 2^N bitstrings.
    """

    bitstrings: np.ndarray
    log_amps: np.ndarray
    source: str
    chain_ids: np.ndarray
    weights: np.ndarray | None = None
    acceptance_rate: float | None = None

    @property
    def size(self) -> int:
        return self.bitstrings.shape[0]

    @property
    def n_chains(self) -> int:
        return int(self.chain_ids.max()) + 1 if self.size else 0

    @property
    def exact(self) -> bool:
        return self.weights is not None

    def mean(self, values: np.ndarray) -> np.ndarray:
        """Average over samples (axis 0), weighted for exact batches."""
        values = np.asarray(values)
        if self.weights is None:
            return values.mean(axis=0)
        return np.tensordot(self.weights, values, axes=(0, 0))

    def chain_sums(self, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Per-chain sums of `values` and per-chain sample counts."""
        values = np.asarray(values)
        sums = np.zeros((self.n_chains, *values.shape[1:]), dtype=values.dtype)
        np.add.at(sums, self.chain_ids, values)
        return sums, np.bincount(self.chain_ids, minlength=self.n_chains)


def log_sum_pair(l0: np.ndarray, l1: np.ndarray, sign: np.ndarray) -> np.ndarray:
    """log(exp(l0) + sign * exp(l1)) with the larger magnitude factored out."""
    m = np.maximum(l0.real, l1.real)
    finite = np.isfinite(m)
    shift = np.where(finite, m, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.exp(l0 - shift) + sign * np.exp(l1 - shift)
        out = shift + np.log(s)
    vanished = ~finite | (s == 0)
    return np.where(vanished, ZERO_LOG, out)


def hadamard_log_amplitudes(
    state: RbmState, qubit: int, bits: np.ndarray, theta: np.ndarray | None = None
) -> np.ndarray:
    """log Phi(B) for Phi = H_qubit Psi over a (S, N) batch; -inf marks Phi(B) = 0.

    `theta` may carry the look-up table of each row of `bits`.
    """
    if not 0 <= qubit < state.n_visible:
        raise StructuralError(f"qubit {qubit} out of range for {state.n_visible} qubits")
    bits = check_bits(state, bits, ndim=2)
    if theta is None:
        theta = thetas(state, bits)
    own = bits[:, qubit]
    theta0 = theta - own[:, None] * state.weights[qubit]
    theta1 = theta0 + state.weights[qubit]
    vis0 = _visible_rows(state, bits) - own * state.visible_bias[qubit]
    l0 = vis0 + log1pexp(theta0).sum(axis=-1)
    l1 = vis0 + state.visible_bias[qubit] + log1pexp(theta1).sum(axis=-1)
    return log_sum_pair(l0, l1, 1.0 - 2.0 * own) - LOG_SQRT2


def hadamard_amplitude(state: RbmState, qubit: int, b: np.ndarray) -> complex:
    """Phi(B) = (Psi(B|B_l=0) + (-1)^B_l Psi(B|B_l=1)) / sqrt(2)."""
    b = check_bits(state, b, ndim=1)
    return complex(np.exp(hadamard_log_amplitudes(state, qubit, b[None, :])[0]))


def _visible_rows(state: RbmState, bits: np.ndarray) -> np.ndarray:
    return (bits * state.visible_bias).sum(axis=-1)


def target_log_amplitudes(
    state: RbmState, target: SampleTarget, bits: np.ndarray, theta: np.ndarray | None = None
) -> np.ndarray:
    if target.kind == TargetKind.HPHI:
        return hadamard_log_amplitudes(state, target.qubit, bits, theta)
    if theta is None:
        return log_amplitudes(state, bits)
    return _visible_rows(state, bits) + log1pexp(theta).sum(axis=-1)


def _row_log_amplitudes(
    state: RbmState, target: SampleTarget, bits: np.ndarray, theta: np.ndarray
) -> np.ndarray:
    # row-wise reductions only, so values never depend on how many chains share a group
    if target.kind == TargetKind.PSI:
        return _visible_rows(state, bits) + log1pexp(theta).sum(axis=-1)
    return hadamard_log_amplitudes(state, target.qubit, bits, theta)


def _fresh_thetas(state: RbmState, bits: np.ndarray) -> np.ndarray:
    return np.stack([state.hidden_bias + row.astype(np.float64) @ state.weights for row in bits])


def _init_chain(
    state: RbmState, target: SampleTarget, rng: np.random.Generator, chain: int
) -> np.ndarray:
    n = state.n_visible
    for _ in range(MAX_INIT_ATTEMPTS):
        b = rng.integers(0, 2, n).astype(np.int8)
        theta = _fresh_thetas(state, b[None, :])
        if np.isfinite(_row_log_amplitudes(state, target, b[None, :], theta)[0].real):
            return b
    raise SamplerError(
        f"chain {chain}: target {target.label} vanished on {MAX_INIT_ATTEMPTS} random initial bitstrings"
    )


def _run_group(
    state: RbmState, target: SampleTarget, cfg: SamplerConfig, chains: list[int]
) -> list[tuple[np.ndarray, int]]:
    """Advance a group of chains; returns (samples, accepted moves) per chain."""
    n = state.n_visible
    n_steps = n * (cfg.burn_in_sweeps + cfg.sweeps_between_samples * cfg.samples_per_chain)
    bits, flips, uniforms = [], [], []
    for chain in chains:
        rng = substream(cfg.seed, "sampler", chain)
        bits.append(_init_chain(state, target, rng, chain))
        flips.append(rng.integers(0, n, n_steps))
        uniforms.append(rng.random(n_steps))
    bits = np.stack(bits)
    flips = np.stack(flips)
    log_u = np.log(np.stack(uniforms))

    rows = np.arange(len(chains))
    theta = _fresh_thetas(state, bits)
    current = _row_log_amplitudes(state, target, bits, theta)
    accepted = np.zeros(len(chains), dtype=np.int64)
    record_every = n * cfg.sweeps_between_samples
    first_record = n * cfg.burn_in_sweeps + record_every - 1
    samples = np.empty((len(chains), cfg.samples_per_chain, n), dtype=np.int8)

    for step in range(n_steps):
        site = flips[:, step]
        proposed = bits.copy()
        proposed[rows, site] ^= 1
        if cfg.lookup_tables:
            sign = np.where(bits[rows, site] == 0, 1.0, -1.0)
            proposed_theta = theta + sign[:, None] * state.weights[site]
        else:
            proposed_theta = _fresh_thetas(state, proposed)
        candidate = _row_log_amplitudes(state, target, proposed, proposed_theta)
        with np.errstate(invalid="ignore"):
            accept = log_u[:, step] < 2.0 * (candidate.real - current.real)
        if np.any(accept):
            bits[accept] = proposed[accept]
            theta[accept] = proposed_theta[accept]
            current[accept] = candidate[accept]
            accepted += accept
        if step >= first_record and (step - first_record) % record_every == 0:
            samples[:, (step - first_record) // record_every] = bits

    return [(samples[i], int(accepted[i])) for i in range(len(chains))]


def _assemble(
    state: RbmState,
    target: SampleTarget,
    cfg: SamplerConfig,
    per_chain: list[tuple[np.ndarray, int]],
) -> SampleBatch:
    bitstrings = np.concatenate([s for s, _ in per_chain])
    n_steps = state.n_visible * (cfg.burn_in_sweeps + cfg.sweeps_between_samples * cfg.samples_per_chain)
    return SampleBatch(
        bitstrings=bitstrings,
        log_amps=target_log_amplitudes(state, target, bitstrings),
        source=target.label,
        chain_ids=np.repeat(np.arange(cfg.n_chains), cfg.samples_per_chain),
        acceptance_rate=sum(a for _, a in per_chain) / (cfg.n_chains * n_steps),
    )


def run_chains(
    state: RbmState,
    target: SampleTarget,
    cfg: SamplerConfig,
    n_threads: int | None = None,
) -> SampleBatch:
    """Draw `cfg.total_samples` bitstrings from |A|^2, A the target amplitude."""
    per_chain = run_grouped(
        lambda group: _run_group(state, target, cfg, group), range(cfg.n_chains), n_threads
    )
    return _assemble(state, target, cfg, per_chain)


async def run_chains_async(
    state: RbmState,
    target: SampleTarget,
    cfg: SamplerConfig,
    n_threads: int | None = None,
) -> SampleBatch:
    per_chain = await gather_groups(
        lambda group: _run_group(state, target, cfg, group), range(cfg.n_chains), n_threads
    )
    return _assemble(state, target, cfg, per_chain)


def enumerate_batch(log_amplitude_fn, n_qubits: int, source: str) -> SampleBatch:
    """All 2^N bitstrings weighted by the exact normalised |A|^2."""
    bits = all_bitstrings(n_qubits)
    logs = log_amplitude_fn(bits)
    finite = np.isfinite(logs.real)
    if not np.any(finite):
        raise SamplerError(f"{source} vanishes on every bitstring")
    shift = logs.real[finite].max()
    with np.errstate(under="ignore"):
        p = np.where(finite, np.exp(2.0 * (logs.real - shift)), 0.0)
    return SampleBatch(
        bitstrings=bits,
        log_amps=logs,
        source=source,
        chain_ids=np.zeros(bits.shape[0], dtype=np.int64),
        weights=p / p.sum(),
    )
