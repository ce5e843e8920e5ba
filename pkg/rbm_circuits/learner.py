"""
Stochastic log-overlap minimisation.

The learner fits an RBM Psi to a target amplitude source Phi by minimising

    L = -log O,   O = |<Psi|Phi>| / (|Psi| |Phi|)

with AdaMax. Complex parameters are optimised as independent real and
imaginary parts: the complex vector G = <O*> - <rho O*> / <rho>, with
rho = Phi / Psi and O_k = d log Psi / d p_k, packs dL/dRe(p) in its real part
and dL/dIm(p) in its imaginary part.
"""

import math
from collections.abc import Callable
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DegenerateOverlapError, LearnerFailure, NumericError, StructuralError
from .sampler import SampleBatch, SamplerConfig
from .seeding import derive_seed, substream
from .sources import AmplitudeSource, HadamardTarget, RbmTarget
from .state import RbmState, log_amplitudes, log_derivatives

DEGENERACY_THRESHOLD = 1e-12
U_FLOOR = 1e-12


@dataclass(frozen=True, kw_only=True)
class LearnerConfig:
    n_iterations: int = 500
    samples_per_iteration: int = 4096
    learning_rate: float = 5e-3
    adamax_beta1: float = 0.9
    adamax_beta2: float = 0.999
    init_noise_sigma: float = 0.01
    overlap_check_interval: int = 25
    target_infidelity: float = 1e-3
    seed: int = 0
    max_reinitializations: int = 3
    exact_enumeration: bool = False

    def __post_init__(self):
        if self.n_iterations < 1 or self.samples_per_iteration < 1:
            raise StructuralError("n_iterations and samples_per_iteration must be positive")
        if not self.learning_rate > 0:
            raise StructuralError("learning_rate must be positive")
        for name in ("adamax_beta1", "adamax_beta2"):
            if not 0 < getattr(self, name) < 1:
                raise StructuralError(f"{name} must lie in (0, 1)")
        if self.init_noise_sigma < 0 or self.target_infidelity < 0:
            raise StructuralError("init_noise_sigma and target_infidelity must be non-negative")
        if self.overlap_check_interval < 1 or self.max_reinitializations < 0:
            raise StructuralError("overlap_check_interval must be >= 1 and max_reinitializations >= 0")

    def replace(self, **kwargs) -> "LearnerConfig":
        return replace(self, **kwargs)

    def sampler_for(self, scfg: SamplerConfig, salt: str, *index: int) -> SamplerConfig:
        """Sampler settings for one batch of `samples_per_iteration` draws."""
        return scfg.sized(self.samples_per_iteration, derive_seed(self.seed, salt, *index))


@dataclass(frozen=True, kw_only=True, eq=False)
class OptimizerState:
    """AdaMax moments over the interleaved (re, im) view of the parameters."""

    first_moment: np.ndarray
    inf_norm_accumulator: np.ndarray
    step_count: int = 0

    @classmethod
    def zeros(cls, n_params: int) -> "OptimizerState":
        return cls(
            first_moment=np.zeros(2 * n_params), inf_norm_accumulator=np.zeros(2 * n_params)
        )


@dataclass(frozen=True, kw_only=True)
class OverlapRecord:
    iteration: int
    loss: float
    overlap: float
    std_error: float
    checked: bool = True


@dataclass(frozen=True, kw_only=True)
class LearnReport:
    final_overlap: float
    final_std_error: float
    iterations_run: int
    overlap_trace: tuple[OverlapRecord, ...] = field(default_factory=tuple)
    reinitializations: int = 0
    converged: bool = False


LearnerCallback = Callable[[OverlapRecord], None]


def _real_view(z: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(z, dtype=np.complex128).view(np.float64)


def adamax_step(
    opt: OptimizerState,
    params: np.ndarray,
    grad: np.ndarray,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
) -> tuple[OptimizerState, np.ndarray]:
    """One AdaMax update; each complex entry is two real parameters."""
    p = _real_view(params)
    g = _real_view(grad)
    if p.shape != g.shape or p.shape != opt.first_moment.shape:
        raise StructuralError(
            f"parameter, gradient and optimiser sizes differ: {p.size}, {g.size}, {opt.first_moment.size}"
        )
    t = opt.step_count + 1
    m = beta1 * opt.first_moment + (1 - beta1) * g
    u = np.maximum(beta2 * opt.inf_norm_accumulator, np.abs(g))
    p = p - (lr / (1 - beta1**t)) * m / np.maximum(u, U_FLOOR)
    return (
        OptimizerState(first_moment=m, inf_norm_accumulator=u, step_count=t),
        p.view(np.complex128),
    )


def _offset_ratios(log_ratio: np.ndarray) -> tuple[float, np.ndarray]:
    """(c, exp(log_ratio - c)) with c the largest finite real part; zero ratios stay 0."""
    finite = np.isfinite(log_ratio.real)
    if not np.any(finite):
        return -math.inf, np.zeros(log_ratio.shape, dtype=np.complex128)
    c = float(log_ratio.real[finite].max())
    with np.errstate(under="ignore"):
        values = np.where(finite, np.exp(log_ratio - c), 0.0)
    if not np.all(np.isfinite(values)):
        raise NumericError(f"amplitude ratio overflowed after subtracting offset {c:.3g}")
    return c, values


def _jackknife_variance(batch: SampleBatch, values: np.ndarray, combine) -> float:
    """Leave-one-chain-out variance of combine(mean of values); 0 for exact batches."""
    if batch.exact or batch.n_chains < 2:
        return 0.0
    sums, counts = batch.chain_sums(values)
    total, n = sums.sum(axis=0), counts.sum()
    replicates = np.array([combine((total - s) / (n - k)) for s, k in zip(sums, counts)])
    k = replicates.size
    return float((k - 1) / k * np.sum((replicates - replicates.mean()) ** 2))


def overlap_from_batches(
    psi_batch: SampleBatch,
    phi_on_psi: np.ndarray,
    phi_batch: SampleBatch,
    psi_on_phi: np.ndarray,
) -> tuple[float, float]:
    """O = sqrt(|<Phi/Psi>_Psi| |<Psi/Phi>_Phi|) and its jackknife standard error.

    `phi_on_psi` holds log Phi on the Psi samples, `psi_on_phi` log Psi on the
    Phi samples.
    """
    c, r1 = _offset_ratios(phi_on_psi - psi_batch.log_amps)
    d, r2 = _offset_ratios(psi_on_phi - phi_batch.log_amps)
    if math.isinf(c) or math.isinf(d):
        return 0.0, 0.0

    def overlap(m1: complex, m2: complex) -> float:
        if m1 == 0 or m2 == 0:
            return 0.0
        log_o = 0.5 * (c + d + math.log(abs(m1)) + math.log(abs(m2)))
        if log_o > 700:
            raise NumericError(f"overlap estimate overflowed (offsets {c:.3g}, {d:.3g})")
        return math.exp(log_o)

    m1, m2 = complex(psi_batch.mean(r1)), complex(phi_batch.mean(r2))
    estimate = overlap(m1, m2)
    variance = _jackknife_variance(psi_batch, r1, lambda m: overlap(complex(m), m2))
    variance += _jackknife_variance(phi_batch, r2, lambda m: overlap(m1, complex(m)))
    return estimate, math.sqrt(variance)


def estimate_overlap(
    psi: RbmState,
    target: AmplitudeSource,
    cfg: SamplerConfig,
    *,
    exact: bool = False,
    n_threads: int | None = None,
) -> tuple[float, float]:
    """Overlap of `psi` with `target` from two independent batches.

    With `exact=True` both batches enumerate all 2^N bitstrings and the
    standard error is 0.
    """
    if target.n_qubits != psi.n_visible:
        raise StructuralError(f"target has {target.n_qubits} qubits, state {psi.n_visible}")
    source = RbmTarget(psi)
    if exact:
        psi_batch, phi_batch = source.enumerate(), target.enumerate()
    else:
        psi_batch = source.draw(cfg.replace(seed=derive_seed(cfg.seed, "overlap-psi")), n_threads)
        phi_batch = target.draw(cfg.replace(seed=derive_seed(cfg.seed, "overlap-phi")), n_threads)
    return overlap_from_batches(
        psi_batch,
        target.log_amplitudes(psi_batch.bitstrings),
        phi_batch,
        log_amplitudes(psi, phi_batch.bitstrings),
    )


def overlap_gradient(
    psi: RbmState,
    target: AmplitudeSource,
    batch: SampleBatch,
    phi_on_psi: np.ndarray | None = None,
) -> np.ndarray:
    """<O*> - <rho O*> / <rho> over a batch drawn from |Psi|^2, canonical order.

    `phi_on_psi` may carry log Phi on the batch when the caller already has it.
    """
    if phi_on_psi is None:
        phi_on_psi = target.log_amplitudes(batch.bitstrings)
    c, rho = _offset_ratios(phi_on_psi - batch.log_amps)
    if math.isinf(c):
        raise DegenerateOverlapError("target vanishes on every sample: states are orthogonal")
    mean_rho = complex(batch.mean(rho))
    if abs(mean_rho) < DEGENERACY_THRESHOLD * float(batch.mean(np.abs(rho))):
        raise DegenerateOverlapError(
            f"|<Phi/Psi>| = {abs(mean_rho):.3g} (relative to <|Phi/Psi|>): states nearly orthogonal"
        )
    o_conj = log_derivatives(psi, batch.bitstrings).conj()
    return batch.mean(o_conj) - batch.mean(rho[:, None] * o_conj) / mean_rho


def loss_of(overlap: float) -> float:
    return -math.log(overlap) if overlap > 0 else math.inf


class _Run:
    """One optimisation attempt from a fixed initialisation."""

    def __init__(
        self,
        target: AmplitudeSource,
        cfg: LearnerConfig,
        scfg: SamplerConfig,
        attempt: int,
        callback: LearnerCallback | None,
        n_threads: int | None,
    ):
        self.target = target
        self.cfg = cfg
        self.scfg = scfg
        self.attempt = attempt
        self.callback = callback
        self.n_threads = n_threads
        self.trace: list[OverlapRecord] = []
        self.best: tuple[float, float, RbmState] | None = None
        self.iteration = 0
        self._phi_exact = target.enumerate() if cfg.exact_enumeration else None
        self._phi_steps: SampleBatch | None = None

    def psi_batch(self, state: RbmState, iteration: int) -> SampleBatch:
        if self.cfg.exact_enumeration:
            return RbmTarget(state).enumerate()
        cfg = self.cfg.sampler_for(self.scfg, "learner-psi", self.attempt, iteration)
        return RbmTarget(state).draw(cfg, self.n_threads)

    def phi_steps(self) -> SampleBatch:
        """Target batch shared by every step record of this attempt; Phi does not move."""
        if self._phi_exact is not None:
            return self._phi_exact
        if self._phi_steps is None:
            cfg = self.cfg.sampler_for(self.scfg, "learner-phi", self.attempt)
            self._phi_steps = self.target.draw(cfg, self.n_threads)
        return self._phi_steps

    def emit(self, record: OverlapRecord):
        self.trace.append(record)
        if self.callback:
            self.callback(record)

    def step(self, state: RbmState, batch: SampleBatch, phi_on_psi: np.ndarray, iteration: int):
        """Overlap of the state entering step `iteration`, from its own gradient batch."""
        phi = self.phi_steps()
        estimate, se = overlap_from_batches(batch, phi_on_psi, phi, log_amplitudes(state, phi.bitstrings))
        self.emit(
            OverlapRecord(
                iteration=iteration,
                loss=loss_of(estimate),
                overlap=estimate,
                std_error=se,
                checked=False,
            )
        )

    def check(self, state: RbmState, iteration: int) -> bool:
        if self._phi_exact is not None:
            psi_batch = RbmTarget(state).enumerate()
            estimate, se = overlap_from_batches(
                psi_batch,
                self.target.log_amplitudes(psi_batch.bitstrings),
                self._phi_exact,
                log_amplitudes(state, self._phi_exact.bitstrings),
            )
        else:
            cfg = self.cfg.sampler_for(self.scfg, "learner-check", self.attempt, iteration)
            estimate, se = estimate_overlap(state, self.target, cfg, n_threads=self.n_threads)
        self.emit(OverlapRecord(iteration=iteration, loss=loss_of(estimate), overlap=estimate, std_error=se))
        if self.best is None or estimate > self.best[0]:
            self.best = (estimate, se, state)
        return self.reached_target()

    def reached_target(self) -> bool:
        return self.best is not None and self.best[0] >= 1 - self.cfg.target_infidelity

    def optimise(self, state: RbmState) -> bool:
        """Run until the target overlap or the iteration budget; True when converged."""
        cfg = self.cfg
        if self.check(state, 0):
            return True
        opt = OptimizerState.zeros(state.n_params)
        for iteration in range(1, cfg.n_iterations + 1):
            self.iteration = iteration
            batch = self.psi_batch(state, iteration)
            phi_on_psi = self.target.log_amplitudes(batch.bitstrings)
            grad = overlap_gradient(state, self.target, batch, phi_on_psi)
            self.step(state, batch, phi_on_psi, iteration)
            opt, params = adamax_step(
                opt, state.parameters(), grad, cfg.learning_rate, cfg.adamax_beta1, cfg.adamax_beta2
            )
            state = state.with_parameters(params)
            if iteration % cfg.overlap_check_interval == 0 or iteration == cfg.n_iterations:
                if self.check(state, iteration):
                    return True
        return False


def learn_state(
    state: RbmState,
    target: AmplitudeSource,
    cfg: LearnerConfig,
    scfg: SamplerConfig,
    callback: LearnerCallback | None = None,
    n_threads: int | None = None,
) -> tuple[RbmState, LearnReport]:
    """Fit an RBM with the shape of `state` to `target`, starting from `state` plus noise.

    Returns the best-overlap parameters seen over all attempts. A degenerate or
    non-finite iteration restarts from fresh noise, up to
    `cfg.max_reinitializations` times; the best state of a failed attempt
    still competes with the later ones.
    """
    if target.n_qubits != state.n_visible:
        raise StructuralError(f"target has {target.n_qubits} qubits, state {state.n_visible}")
    base = state.parameters()
    trace: list[OverlapRecord] = []
    best: tuple[float, float, RbmState] | None = None
    last_error: NumericError | None = None

    def report(run: _Run, attempt: int) -> LearnReport:
        estimate, se, _ = best
        return LearnReport(
            final_overlap=estimate,
            final_std_error=se,
            iterations_run=run.iteration,
            overlap_trace=tuple(trace),
            reinitializations=attempt,
            converged=estimate >= 1 - cfg.target_infidelity,
        )

    for attempt in range(cfg.max_reinitializations + 1):
        rng = substream(cfg.seed, "learner-init", attempt)
        noise = cfg.init_noise_sigma * (
            rng.standard_normal(base.size) + 1j * rng.standard_normal(base.size)
        )
        run = _Run(target, cfg, scfg, attempt, callback, n_threads)
        failed = False
        try:
            run.optimise(state.with_parameters(base + noise))
        except NumericError as e:
            last_error, failed = e, True
        trace.extend(run.trace)
        if run.best is not None and (best is None or run.best[0] > best[0]):
            best = run.best
        if failed:
            continue
        return best[2], report(run, attempt)
    raise LearnerFailure(
        f"gave up after {cfg.max_reinitializations + 1} initialisations: {last_error.message}",
        trace=tuple(trace),
    )


def learn_hadamard(
    state: RbmState,
    qubit: int,
    cfg: LearnerConfig,
    scfg: SamplerConfig,
    callback: LearnerCallback | None = None,
    n_threads: int | None = None,
) -> tuple[RbmState, LearnReport]:
    """Approximate H_qubit applied to `state` with the same number of hidden units."""
    return learn_state(state, HadamardTarget(state, qubit), cfg, scfg, callback, n_threads)
