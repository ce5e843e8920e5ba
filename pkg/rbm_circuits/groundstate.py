"""
Transverse-field Ising ground states as RBMs.

    H = -gamma * sum_i X_i + j * sum_<i,k> Z_i Z_k

with Z|B> = (-1)^B |B>. Bonds are undirected pairs, each counted once.
"""

import math
from collections.abc import Callable
from dataclasses import dataclass, field, replace
from enum import StrEnum
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh

from .errors import LearnerFailure, NumericError, StructuralError
from .learner import LearnerCallback, LearnerConfig, OptimizerState, adamax_step, learn_state
from .oracle import StateVector, check_oracle_size
from .sampler import SampleBatch, SamplerConfig
from .seeding import derive_seed, substream
from .sources import RbmTarget, VectorTarget
from .state import RbmState, ThetaTable, check_bits, log1pexp, log_amplitudes, log_derivatives, thetas

DENSE_ED_LIMIT = 6


class LatticeKind(StrEnum):
    CHAIN_PERIODIC = "chain_periodic"
    CHAIN_OPEN = "chain_open"
    SQUARE_PERIODIC = "square_periodic"


@dataclass(frozen=True, kw_only=True)
class Lattice:
    kind: LatticeKind
    extent: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "kind", LatticeKind(self.kind))
        object.__setattr__(self, "extent", tuple(int(e) for e in self.extent))
        dims = 2 if self.kind == LatticeKind.SQUARE_PERIODIC else 1
        if self.kind == LatticeKind.SQUARE_PERIODIC and len(self.extent) == 1:
            object.__setattr__(self, "extent", self.extent * 2)
        if len(self.extent) != dims or any(e < 1 for e in self.extent):
            raise StructuralError(f"{self.kind} needs {dims} positive extent(s), got {self.extent}")

    @classmethod
    def chain(cls, length: int, periodic: bool = True) -> "Lattice":
        kind = LatticeKind.CHAIN_PERIODIC if periodic else LatticeKind.CHAIN_OPEN
        return cls(kind=kind, extent=(length,))

    @classmethod
    def square(cls, lx: int, ly: int | None = None) -> "Lattice":
        return cls(kind=LatticeKind.SQUARE_PERIODIC, extent=(lx, ly or lx))

    @property
    def n_sites(self) -> int:
        return math.prod(self.extent)

    @cached_property
    def bonds(self) -> tuple[tuple[int, int], ...]:
        pairs: set[tuple[int, int]] = set()

        def add(i: int, k: int):
            if i != k:
                pairs.add((min(i, k), max(i, k)))

        if self.kind == LatticeKind.SQUARE_PERIODIC:
            lx, ly = self.extent
            for y in range(ly):
                for x in range(lx):
                    site = x + lx * y
                    add(site, (x + 1) % lx + lx * y)
                    add(site, x + lx * ((y + 1) % ly))
        else:
            (length,) = self.extent
            for i in range(length - 1):
                add(i, i + 1)
            if self.kind == LatticeKind.CHAIN_PERIODIC:
                add(length - 1, 0)
        return tuple(sorted(pairs))

    def describe(self) -> str:
        return f"{self.kind}({'x'.join(str(e) for e in self.extent)})"


@dataclass(frozen=True, kw_only=True)
class TfimParams:
    gamma: float
    j: float

    def __post_init__(self):
        if not (math.isfinite(self.gamma) and math.isfinite(self.j)):
            raise StructuralError("gamma and j must be finite")


def _bond_arrays(lattice: Lattice) -> tuple[np.ndarray, np.ndarray]:
    if not lattice.bonds:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    left, right = np.array(lattice.bonds).T
    return left, right


def _zz(bits: np.ndarray, lattice: Lattice) -> np.ndarray:
    """(-1)^(B_i + B_k) per bond, shape (S, n_bonds)."""
    left, right = _bond_arrays(lattice)
    return 1 - 2 * (bits[:, left] ^ bits[:, right]).astype(np.int64)


def flip_log_ratios(
    state: RbmState, bits: np.ndarray, theta: np.ndarray | None = None, lookup_tables: bool = True
) -> np.ndarray:
    """log Psi(B with bit i flipped) - log Psi(B) for every sample and site, shape (S, N)."""
    bits = check_bits(state, bits, ndim=2)
    if theta is None:
        theta = thetas(state, bits)
    base_hidden = log1pexp(theta).sum(axis=-1)
    if np.any(np.isneginf(base_hidden.real)):
        raise NumericError("local energy requested on a bitstring where Psi(B) = 0")
    out = np.empty(bits.shape, dtype=np.complex128)
    if lookup_tables:
        for i in range(state.n_visible):
            sign = 1.0 - 2.0 * bits[:, i]
            flipped = log1pexp(theta + sign[:, None] * state.weights[i]).sum(axis=-1)
            out[:, i] = sign * state.visible_bias[i] + flipped - base_hidden
    else:
        base = log_amplitudes(state, bits)
        for i in range(state.n_visible):
            flipped = bits.copy()
            flipped[:, i] ^= 1
            out[:, i] = log_amplitudes(state, flipped) - base
    return out


def local_energies(
    state: RbmState,
    bits: np.ndarray,
    lattice: Lattice,
    p: TfimParams,
    lookup_tables: bool = True,
) -> np.ndarray:
    """E_loc(B) = j sum_bonds (-1)^(B_i+B_k) - gamma sum_i Psi(B^i)/Psi(B) over a batch."""
    if lattice.n_sites != state.n_visible:
        raise StructuralError(f"lattice has {lattice.n_sites} sites, state {state.n_visible}")
    bits = check_bits(state, bits, ndim=2)
    ratios = np.exp(flip_log_ratios(state, bits, lookup_tables=lookup_tables))
    return p.j * _zz(bits, lattice).sum(axis=-1) - p.gamma * ratios.sum(axis=-1)


def local_energy(
    state: RbmState,
    b: np.ndarray,
    lattice: Lattice,
    p: TfimParams,
    table: ThetaTable | None = None,
) -> complex:
    """Single-sample local energy, flip ratios taken from the look-up table."""
    if lattice.n_sites != state.n_visible:
        raise StructuralError(f"lattice has {lattice.n_sites} sites, state {state.n_visible}")
    b = check_bits(state, b, ndim=1)
    table = table or ThetaTable.build(state, b)
    bits = table.bits[None, :]
    ratios = np.exp(flip_log_ratios(state, bits, table.theta[None, :]))
    return complex(p.j * _zz(bits, lattice).sum() - p.gamma * ratios.sum())


def tfim_hamiltonian(lattice: Lattice, p: TfimParams) -> sp.csr_matrix:
    """Sparse Hamiltonian in the little-endian computational basis."""
    n = lattice.n_sites
    check_oracle_size(n)
    dim = 1 << n
    index = np.arange(dim)
    bits = ((index[:, None] >> np.arange(n)) & 1).astype(np.int8)
    diagonal = p.j * _zz(bits, lattice).sum(axis=-1).astype(np.float64)
    rows = [index]
    cols = [index]
    data = [diagonal]
    for i in range(n):
        rows.append(index ^ (1 << i))
        cols.append(index)
        data.append(np.full(dim, -p.gamma))
    return sp.csr_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))), shape=(dim, dim)
    )


def exact_ground_state(lattice: Lattice, p: TfimParams) -> tuple[float, StateVector]:
    """(E0, ground state) by dense eigh up to 6 sites, Lanczos beyond."""
    h = tfim_hamiltonian(lattice, p)
    if lattice.n_sites <= DENSE_ED_LIMIT:
        values, vectors = np.linalg.eigh(h.toarray())
        energy, vector = values[0], vectors[:, 0]
    else:
        v0 = np.full(h.shape[0], 1 / math.sqrt(h.shape[0]))
        values, vectors = eigsh(h, k=1, which="SA", v0=v0)
        energy, vector = values[0], vectors[:, 0]
    pivot = vector[np.argmax(np.abs(vector))]
    return float(energy), StateVector(vector * (abs(pivot) / pivot)).normalize()


@dataclass(frozen=True, kw_only=True)
class VmcConfig:
    n_iterations: int = 1000
    samples_per_iteration: int = 4096
    learning_rate: float = 1e-2
    adamax_beta1: float = 0.9
    adamax_beta2: float = 0.999
    init_noise_sigma: float = 0.01
    patience: int = 50
    seed: int = 0
    exact_enumeration: bool = False
    lookup_tables: bool = True

    def __post_init__(self):
        if self.n_iterations < 1 or self.samples_per_iteration < 1 or self.patience < 1:
            raise StructuralError("n_iterations, samples_per_iteration and patience must be positive")
        if not self.learning_rate > 0:
            raise StructuralError("learning_rate must be positive")
        for name in ("adamax_beta1", "adamax_beta2"):
            if not 0 < getattr(self, name) < 1:
                raise StructuralError(f"{name} must lie in (0, 1)")

    def replace(self, **kwargs) -> "VmcConfig":
        return replace(self, **kwargs)


@dataclass(frozen=True, kw_only=True)
class EnergyRecord:
    iteration: int
    energy: float
    std_error: float
    imag: float = 0.0


@dataclass(frozen=True, kw_only=True, eq=False)
class Observables:
    x: np.ndarray = field(repr=False)
    zz: np.ndarray = field(repr=False)
    bonds: tuple[tuple[int, int], ...] = ()


EnergyCallback = Callable[[EnergyRecord], None]


def _chain_error(batch: SampleBatch, values: np.ndarray) -> float:
    """Standard error from per-chain means; 0 for exact batches."""
    if batch.exact or batch.n_chains < 2:
        return 0.0
    sums, counts = batch.chain_sums(values)
    means = sums / counts
    return float(means.std(ddof=1) / math.sqrt(means.size))


def estimate_energy(
    state: RbmState, lattice: Lattice, p: TfimParams, batch: SampleBatch, lookup_tables: bool = True
) -> tuple[complex, float]:
    """Mean local energy over a |Psi|^2 batch and the standard error of its real part."""
    e_loc = local_energies(state, batch.bitstrings, lattice, p, lookup_tables)
    return complex(batch.mean(e_loc)), _chain_error(batch, e_loc.real)


def estimate_observables(state: RbmState, batch: SampleBatch, lattice: Lattice) -> Observables:
    """<X_i> from flip ratios and <Z_i Z_k> per bond."""
    ratios = np.exp(flip_log_ratios(state, batch.bitstrings))
    return Observables(
        x=np.real(batch.mean(ratios)),
        zz=np.asarray(batch.mean(_zz(batch.bitstrings, lattice).astype(np.float64))),
        bonds=lattice.bonds,
    )


def _hidden_count(n_sites: int, alpha: float) -> int:
    m = alpha * n_sites
    if m < 0 or abs(m - round(m)) > 1e-9:
        raise StructuralError(f"alpha={alpha} gives a non-integral hidden count on {n_sites} sites")
    return int(round(m))


def vmc_ground_state(
    lattice: Lattice,
    p: TfimParams,
    alpha: float,
    cfg: VmcConfig,
    scfg: SamplerConfig,
    callback: EnergyCallback | None = None,
    n_threads: int | None = None,
) -> tuple[RbmState, tuple[EnergyRecord, ...]]:
    """Minimise <E_loc> with AdaMax on the gradient 2(<O* E_loc> - <O*><E_loc>).

    Returns the final state and one energy record per iteration. Raises
    LearnerFailure if the estimate rises for `cfg.patience` consecutive
    iterations or stops being finite.
    """
    n = lattice.n_sites
    m = _hidden_count(n, alpha)
    rng = substream(cfg.seed, "vmc-init")
    size = n + m + n * m
    params = cfg.init_noise_sigma * (rng.standard_normal(size) + 1j * rng.standard_normal(size))
    state = RbmState.zeros(n, m).with_parameters(params)
    opt = OptimizerState.zeros(size)
    trace: list[EnergyRecord] = []
    rising = 0
    for iteration in range(cfg.n_iterations):
        source = RbmTarget(state)
        if cfg.exact_enumeration:
            batch = source.enumerate()
        else:
            batch = source.draw(
                scfg.sized(cfg.samples_per_iteration, derive_seed(cfg.seed, "vmc", iteration)),
                n_threads,
            )
        e_loc = local_energies(state, batch.bitstrings, lattice, p, cfg.lookup_tables)
        energy = complex(batch.mean(e_loc))
        record = EnergyRecord(
            iteration=iteration,
            energy=energy.real,
            std_error=_chain_error(batch, e_loc.real),
            imag=energy.imag,
        )
        if not math.isfinite(record.energy):
            raise LearnerFailure(f"energy became non-finite at iteration {iteration}", tuple(trace))
        if trace and record.energy > trace[-1].energy:
            rising += 1
            if rising >= cfg.patience:
                raise LearnerFailure(
                    f"energy rose for {rising} consecutive iterations (now {record.energy:.6g})",
                    tuple(trace + [record]),
                )
        else:
            rising = 0
        trace.append(record)
        if callback:
            callback(record)

        o_conj = log_derivatives(state, batch.bitstrings).conj()
        grad = 2 * (batch.mean(o_conj * e_loc[:, None]) - batch.mean(o_conj) * energy)
        opt, new_params = adamax_step(
            opt, state.parameters(), grad, cfg.learning_rate, cfg.adamax_beta1, cfg.adamax_beta2
        )
        try:
            state = state.with_parameters(new_params)
        except NumericError as e:
            raise LearnerFailure(e.message, tuple(trace)) from None
    return state, tuple(trace)


def fit_to_statevector(
    target: StateVector,
    alpha: float,
    cfg: LearnerConfig,
    scfg: SamplerConfig,
    callback: LearnerCallback | None = None,
    initial: RbmState | None = None,
    n_threads: int | None = None,
) -> RbmState:
    """Best-overlap RBM for an explicitly stored state, starting from `initial` or zeros."""
    n = target.n_qubits
    m = _hidden_count(n, alpha)
    if initial is None:
        initial = RbmState.zeros(n, m)
    elif initial.n_visible != n:
        raise StructuralError(f"initial state has {initial.n_visible} qubits, target {n}")
    state, _ = learn_state(initial, VectorTarget(target), cfg, scfg, callback, n_threads)
    return state
