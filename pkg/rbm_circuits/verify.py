"""
Invariant battery run by `python -m rbm_circuits.cli verify`.

Each check returns a PropertyResult instead of raising, so one broken
property never hides the others.
"""

import math
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import SimulationError
from .gates import GateFailure, GateKind, GateOp, exact
from .gates.groups import build_collection
from .learner import overlap_gradient
from .oracle import StateVector, apply_gate_exact, expand_rbm, ratio_to_scalar
from .sampler import (
    SamplerConfig,
    SampleTarget,
    hadamard_log_amplitudes,
    run_chains,
    target_log_amplitudes,
)
from .seeding import derive_seed, substream
from .sources import AmplitudeSource, HadamardTarget, RbmTarget
from .state import (
    RbmState,
    ThetaTable,
    all_bitstrings,
    bits_to_index,
    flip_log_ratio,
    log_amplitude,
    log_amplitudes,
    update_theta,
)

EQUIVALENCE_TOLERANCE = 1e-10
CRZ_TOLERANCE = 1e-12
GRADIENT_TOLERANCE = 1e-6
FD_STEP = 1e-5
CHI2_SIGNIFICANCE = 0.01


@dataclass(frozen=True, kw_only=True)
class PropertyResult:
    name: str
    passed: bool
    detail: str = ""

    def __bool__(self):
        return self.passed


def _exact_gate_equivalence(seed: int, n_instances: int = 200) -> PropertyResult:
    rng = substream(seed, "verify-exact-gates")
    collection = build_collection("exact")
    kinds = [GateKind.RZ, GateKind.CRZ, GateKind.X, GateKind.Y, GateKind.Z]
    worst = 0.0
    for i in range(n_instances):
        n = int(rng.integers(2, 9))
        state = RbmState.random(n, n * int(rng.integers(1, 3)), rng, scale=0.3)
        kind = kinds[int(rng.integers(len(kinds)))]
        qubits = tuple(int(q) for q in rng.choice(n, size=2 if kind == GateKind.CRZ else 1, replace=False))
        angle = float(rng.uniform(-2 * math.pi, 2 * math.pi)) if kind in (GateKind.RZ, GateKind.CRZ) else None
        op = GateOp(kind=kind, qubits=qubits, angle=angle)
        result = collection.run(state, op)
        if isinstance(result, GateFailure):
            return PropertyResult(name="exact gates match the oracle", passed=False, detail=result.error)
        error = ratio_to_scalar(expand_rbm(result.state), apply_gate_exact(expand_rbm(state), op))
        worst = max(worst, error)
        if error > EQUIVALENCE_TOLERANCE:
            return PropertyResult(
                name="exact gates match the oracle",
                passed=False,
                detail=f"instance {i}: {op.to_line()} on N={n} deviates by {error:.3g}",
            )
    return PropertyResult(
        name="exact gates match the oracle",
        passed=True,
        detail=f"{n_instances} random instances, worst deviation {worst:.2g}",
    )


def _crz_assignments(seed: int, n_angles: int = 32) -> PropertyResult:
    """exp(da_c B_c + da_t B_t)(1 + exp(W_c B_c + W_t B_t)) is proportional to (1, 1, 1, e^{i phi})."""
    rng = substream(seed, "verify-crz")
    grid = -2 * math.pi + 4 * math.pi * np.arange(1, n_angles + 1) / n_angles
    angles = np.concatenate([grid, rng.uniform(-2 * math.pi, 2 * math.pi, n_angles // 2)])
    worst = 0.0
    for phi in angles:
        w_c, w_t, da_c, da_t = exact.crz_parameters(float(phi))
        factors = np.array([
            np.exp(da_c * bc + da_t * bt) * (1 + np.exp(w_c * bc + w_t * bt))
            for bc, bt in ((0, 0), (0, 1), (1, 0), (1, 1))
        ])
        expected = np.array([1, 1, 1, np.exp(1j * phi)])
        error = float(np.max(np.abs(factors / factors[0] - expected)))
        worst = max(worst, error)
        if not error <= CRZ_TOLERANCE:
            return PropertyResult(
                name="CRZ closed form",
                passed=False,
                detail=f"phi={phi:.6g}: assignments off by {error:.3g}",
            )
    return PropertyResult(
        name="CRZ closed form", passed=True, detail=f"{angles.size} angles, worst {worst:.2g}"
    )


def exact_loss(psi: RbmState, target: AmplitudeSource) -> float:
    """-log |<Psi|Phi>| / (|Psi| |Phi|) by enumeration."""
    bits = all_bitstrings(psi.n_visible)
    lp, lt = log_amplitudes(psi, bits), target.log_amplitudes(bits)
    shift_p, shift_t = lp.real.max(), lt.real.max()
    with np.errstate(under="ignore"):
        p, t = np.exp(lp - shift_p), np.exp(lt - shift_t)
    overlap = abs(np.vdot(p, t)) / (np.linalg.norm(p) * np.linalg.norm(t))
    return -math.log(overlap)


def finite_difference_gradient(psi: RbmState, target: AmplitudeSource, step: float = FD_STEP) -> np.ndarray:
    """Central differences of `exact_loss`; real part d/dRe p, imaginary part d/dIm p."""
    params = psi.parameters()
    grad = np.empty(params.size, dtype=np.complex128)
    for k in range(params.size):
        parts = []
        for direction in (1.0, 1j):
            shift = np.zeros_like(params)
            shift[k] = step * direction
            up = exact_loss(psi.with_parameters(params + shift), target)
            down = exact_loss(psi.with_parameters(params - shift), target)
            parts.append((up - down) / (2 * step))
        grad[k] = parts[0] + 1j * parts[1]
    return grad


def _gradient_check(seed: int, n_instances: int = 50) -> PropertyResult:
    rng = substream(seed, "verify-gradient")
    worst = 0.0
    for i in range(n_instances):
        n = int(rng.integers(2, 7))
        m = n * int(rng.integers(1, 3))
        psi = RbmState.random(n, m, rng, scale=0.3)
        target = HadamardTarget(RbmState.random(n, m, rng, scale=0.3), int(rng.integers(n)))
        analytic = overlap_gradient(psi, target, RbmTarget(psi).enumerate())
        numeric = finite_difference_gradient(psi, target)
        error = float(np.max(np.abs(analytic - numeric)))
        worst = max(worst, error)
        if error > GRADIENT_TOLERANCE:
            return PropertyResult(
                name="overlap gradient vs finite differences",
                passed=False,
                detail=f"instance {i} (N={n}, M={m}): max deviation {error:.3g}",
            )
    return PropertyResult(
        name="overlap gradient vs finite differences",
        passed=True,
        detail=f"{n_instances} instances, worst {worst:.2g}",
    )


def _chi_square(state: RbmState, target: SampleTarget, seed: int) -> float:
    cfg = SamplerConfig(
        n_chains=64, burn_in_sweeps=100, sweeps_between_samples=10, samples_per_chain=512, seed=seed
    )
    batch = run_chains(state, target, cfg)
    bits = all_bitstrings(state.n_visible)
    logs = target_log_amplitudes(state, target, bits)
    p = np.exp(2 * (logs.real - logs.real.max()))
    expected = batch.size * p / p.sum()
    observed = np.bincount(bits_to_index(batch.bitstrings), minlength=p.size)
    return float(stats.chisquare(observed, expected).pvalue)


def _sampler_distribution(seed: int) -> PropertyResult:
    rng = substream(seed, "verify-sampler")
    state = RbmState.random(6, 6, rng, scale=0.5)
    results = []
    for index, target in enumerate((SampleTarget.psi(), SampleTarget.hphi(2))):
        pvalue = _chi_square(state, target, derive_seed(seed, "verify-chains", index))
        results.append(f"{target.label} p={pvalue:.3g}")
        if pvalue < CHI2_SIGNIFICANCE:
            return PropertyResult(
                name="sampler matches |A|^2", passed=False, detail=", ".join(results)
            )
    return PropertyResult(name="sampler matches |A|^2", passed=True, detail=", ".join(results))


def _hadamard_amplitudes(seed: int) -> PropertyResult:
    rng = substream(seed, "verify-hadamard")
    state = RbmState.random(4, 4, rng, scale=0.5)
    bits = all_bitstrings(4)
    psi = StateVector(np.exp(log_amplitudes(state, bits)))
    for q in range(4):
        phi = StateVector(np.exp(hadamard_log_amplitudes(state, q, bits)))
        error = ratio_to_scalar(phi, apply_gate_exact(psi, GateOp.h(q)))
        if error > EQUIVALENCE_TOLERANCE:
            return PropertyResult(
                name="H|Psi> amplitudes", passed=False, detail=f"qubit {q}: deviation {error:.3g}"
            )
    return PropertyResult(name="H|Psi> amplitudes", passed=True, detail="4 qubits")


def _theta_tables(seed: int, n_flips: int = 1000) -> PropertyResult:
    rng = substream(seed, "verify-theta")
    state = RbmState.random(6, 12, rng)
    table = ThetaTable.build(state, rng.integers(0, 2, 6))
    for step in range(n_flips):
        q = int(rng.integers(6))
        ratio = flip_log_ratio(state, table, q)
        before = log_amplitude(state, table.bits)
        table = update_theta(table, state, q)
        direct = log_amplitude(state, table.bits) - before
        if abs(np.exp(ratio) - np.exp(direct)) > 1e-10 * abs(np.exp(direct)):
            return PropertyResult(
                name="look-up tables", passed=False, detail=f"flip ratio off at step {step}"
            )
        if not table.is_consistent(state, rtol=1e-9):
            return PropertyResult(
                name="look-up tables", passed=False, detail=f"table drifted at step {step}"
            )
    return PropertyResult(name="look-up tables", passed=True, detail=f"{n_flips} flips")


def _log_amplitude_direct(seed: int) -> PropertyResult:
    rng = substream(seed, "verify-amplitude")
    state = RbmState.random(4, 8, rng)
    bits = all_bitstrings(4)
    direct = np.exp(bits @ state.visible_bias) * np.prod(
        1 + np.exp(state.hidden_bias + bits @ state.weights), axis=-1
    )
    error = float(np.max(np.abs(np.exp(log_amplitudes(state, bits)) - direct) / np.abs(direct)))
    return PropertyResult(
        name="log-amplitude vs direct product",
        passed=error < 1e-12,
        detail=f"max relative deviation {error:.2g}",
    )


CHECKS: list[tuple[str, Callable[[int], PropertyResult]]] = [
    ("exact gates match the oracle", _exact_gate_equivalence),
    ("CRZ closed form", _crz_assignments),
    ("overlap gradient vs finite differences", _gradient_check),
    ("sampler matches |A|^2", _sampler_distribution),
    ("H|Psi> amplitudes", _hadamard_amplitudes),
    ("look-up tables", _theta_tables),
    ("log-amplitude vs direct product", _log_amplitude_direct),
]


def verify_suite(
    seed: int = 0, callback: Callable[[PropertyResult], None] | None = None
) -> list[PropertyResult]:
    """Run every check; a check that raises counts as failed."""
    results = []
    for name, check in CHECKS:
        try:
            result = check(seed)
        except SimulationError as e:
            result = PropertyResult(name=name, passed=False, detail=e.message)
        results.append(result)
        if callback:
            callback(result)
    return results
