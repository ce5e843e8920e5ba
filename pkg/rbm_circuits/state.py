"""
Complex restricted Boltzmann machine wave functions.

    Psi(B) = exp(sum_j a_j B_j) * prod_k [1 + exp(theta_k(B))]
    theta_k(B) = b_k + sum_j W_jk B_j

Bitstrings use B_j in {0, 1} with Z|B> = (-1)^B |B>. Amplitudes are never
normalised. Log-amplitudes use the principal branch of the complex log; a
zero amplitude is represented by a real part of -inf.

The canonical parameter vector is (a_1..a_N, b_1..b_M, W row-major in (j, k)).
Optimiser state and parameter files rely on this order.
"""

import json
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from .errors import ConfigError, NumericError, StructuralError

ZERO_LOG = complex(-np.inf, 0.0)

_COMPLEX = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}

RBM_SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["n_visible", "n_hidden", "visible_bias", "hidden_bias", "weights"],
    "properties": {
        "n_visible": {"type": "integer", "minimum": 1},
        "n_hidden": {"type": "integer", "minimum": 0},
        "visible_bias": {"type": "array", "items": _COMPLEX},
        "hidden_bias": {"type": "array", "items": _COMPLEX},
        "weights": {"type": "array", "items": {"type": "array", "items": _COMPLEX}},
        "metadata": {"type": "object"},
    },
    "additionalProperties": False,
}


def log1pexp(theta: np.ndarray) -> np.ndarray:
    """Elementwise log(1 + exp(theta)) for complex theta, stable for either sign of Re(theta)."""
    theta = np.asarray(theta, dtype=np.complex128)
    positive = theta.real > 0
    shifted = np.where(positive, -theta, theta)
    with np.errstate(divide="ignore", invalid="ignore"):
        tail = np.log1p(np.exp(shifted))
    out = np.where(positive, theta + tail, tail)
    # 1 + exp(theta) == 0 exactly: the factor vanishes
    zero = np.isneginf(out.real)
    if np.any(zero):
        out = np.where(zero, ZERO_LOG, out)
    return out


def sigmoid(theta: np.ndarray) -> np.ndarray:
    """Elementwise 1 / (1 + exp(-theta)) for complex theta."""
    theta = np.asarray(theta, dtype=np.complex128)
    positive = theta.real > 0
    e = np.exp(np.where(positive, -theta, theta))
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(positive, 1.0 / (1.0 + e), e / (1.0 + e))


@dataclass(frozen=True, eq=False)
class RbmState:
    """Parameters of an RBM wave function; immutable once constructed."""

    visible_bias: np.ndarray
    hidden_bias: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        a = np.array(self.visible_bias, dtype=np.complex128).reshape(-1)
        b = np.array(self.hidden_bias, dtype=np.complex128).reshape(-1)
        w = np.array(self.weights, dtype=np.complex128)
        if w.size == 0:
            w = w.reshape(a.size, b.size)
        if a.size < 1:
            raise StructuralError("an RBM needs at least one visible unit")
        if w.shape != (a.size, b.size):
            raise StructuralError(
                f"weights have shape {w.shape}, expected ({a.size}, {b.size})"
            )
        for name, arr in (("visible_bias", a), ("hidden_bias", b), ("weights", w)):
            if not np.all(np.isfinite(arr)):
                raise NumericError(f"{name} contains non-finite entries")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_visible(self) -> int:
        return self.visible_bias.size

    @property
    def n_hidden(self) -> int:
        return self.hidden_bias.size

    @property
    def n_params(self) -> int:
        return self.n_visible + self.n_hidden + self.n_visible * self.n_hidden

    @property
    def alpha(self) -> float:
        return self.n_hidden / self.n_visible

    @classmethod
    def zeros(cls, n_visible: int, n_hidden: int = 0) -> "RbmState":
        return cls(
            visible_bias=np.zeros(n_visible),
            hidden_bias=np.zeros(n_hidden),
            weights=np.zeros((n_visible, n_hidden)),
        )

    @classmethod
    def random(
        cls,
        n_visible: int,
        n_hidden: int,
        rng: np.random.Generator,
        scale: float = 0.5,
    ) -> "RbmState":
        """Real and imaginary parts drawn uniformly from [-scale, scale]."""

        def draw(*shape: int) -> np.ndarray:
            return rng.uniform(-scale, scale, shape) + 1j * rng.uniform(-scale, scale, shape)

        return cls(
            visible_bias=draw(n_visible),
            hidden_bias=draw(n_hidden),
            weights=draw(n_visible, n_hidden),
        )

    def parameters(self) -> np.ndarray:
        """Flat copy of the parameters in canonical order."""
        return np.concatenate([self.visible_bias, self.hidden_bias, self.weights.ravel()])

    def with_parameters(self, params: np.ndarray) -> "RbmState":
        params = np.asarray(params, dtype=np.complex128)
        if params.shape != (self.n_params,):
            raise StructuralError(
                f"parameter vector has shape {params.shape}, expected ({self.n_params},)"
            )
        n, m = self.n_visible, self.n_hidden
        return RbmState(
            visible_bias=params[:n],
            hidden_bias=params[n : n + m],
            weights=params[n + m :].reshape(n, m),
        )

    def replace(self, **kwargs) -> "RbmState":
        """Returns a new RbmState with the given fields replaced."""
        return replace(self, **kwargs)


def all_bitstrings(n: int) -> np.ndarray:
    """All 2^n bitstrings, row i holding the little-endian bits of i."""
    return ((np.arange(2**n)[:, None] >> np.arange(n)) & 1).astype(np.int8)


def bits_to_index(bits: np.ndarray) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.int64)
    return bits @ (1 << np.arange(bits.shape[-1], dtype=np.int64))


def check_bits(state: RbmState, bits: np.ndarray, ndim: int) -> np.ndarray:
    bits = np.asarray(bits)
    if bits.ndim != ndim or bits.shape[-1] != state.n_visible:
        raise StructuralError(
            f"bitstring array has shape {bits.shape}, expected {ndim}-d with last axis {state.n_visible}"
        )
    if np.any((bits != 0) & (bits != 1)):
        raise StructuralError("bitstrings may only contain 0 and 1")
    return bits.astype(np.int8, copy=False)


def thetas(state: RbmState, bits: np.ndarray) -> np.ndarray:
    """Hidden pre-activations for a batch of bitstrings, shape (S, M)."""
    return state.hidden_bias + bits.astype(np.float64) @ state.weights


def _hidden_log_terms(theta: np.ndarray) -> np.ndarray:
    terms = log1pexp(theta)
    bad = np.isnan(terms) | np.isposinf(terms.real)
    if np.any(bad):
        unit = int(np.argwhere(bad)[0][-1])
        raise NumericError(f"hidden unit {unit} produced a non-finite log factor")
    return terms


def log_amplitudes(state: RbmState, bits: np.ndarray, theta: np.ndarray | None = None) -> np.ndarray:
    """Log-amplitudes of a (S, N) batch; zero amplitudes come back as -inf."""
    bits = check_bits(state, bits, ndim=2)
    if theta is None:
        theta = thetas(state, bits)
    visible = bits.astype(np.float64) @ state.visible_bias
    return visible + _hidden_log_terms(theta).sum(axis=-1)


def log_amplitude(state: RbmState, b: np.ndarray) -> complex:
    """Log-amplitude of a single bitstring."""
    b = check_bits(state, b, ndim=1)
    theta = state.hidden_bias + b.astype(np.float64) @ state.weights
    terms = _hidden_log_terms(theta)
    if np.any(np.isneginf(terms.real)):
        unit = int(np.flatnonzero(np.isneginf(terms.real))[0])
        raise NumericError(f"hidden unit {unit} factor vanishes: amplitude is exactly zero")
    return complex(b.astype(np.float64) @ state.visible_bias + terms.sum())


@dataclass(frozen=True, eq=False)
class ThetaTable:
    """Look-up table of theta_k for one bitstring."""

    bits: np.ndarray
    theta: np.ndarray

    @classmethod
    def build(cls, state: RbmState, b: np.ndarray) -> "ThetaTable":
        b = check_bits(state, b, ndim=1).copy()
        return cls(bits=b, theta=state.hidden_bias + b.astype(np.float64) @ state.weights)

    def is_consistent(self, state: RbmState, rtol: float = 1e-12) -> bool:
        fresh = ThetaTable.build(state, self.bits).theta
        return bool(np.allclose(self.theta, fresh, rtol=rtol, atol=rtol))


def update_theta(table: ThetaTable, state: RbmState, flipped_qubit: int) -> ThetaTable:
    """Table for the bitstring with `flipped_qubit` toggled, in O(M)."""
    if not 0 <= flipped_qubit < state.n_visible:
        raise StructuralError(f"qubit {flipped_qubit} out of range for {state.n_visible} qubits")
    bits = table.bits.copy()
    sign = 1.0 if bits[flipped_qubit] == 0 else -1.0
    bits[flipped_qubit] ^= 1
    return ThetaTable(bits=bits, theta=table.theta + sign * state.weights[flipped_qubit])


def flip_log_ratio(state: RbmState, table: ThetaTable, qubit: int) -> complex:
    """log Psi(B with `qubit` toggled) - log Psi(B), from the look-up table."""
    sign = 1.0 if table.bits[qubit] == 0 else -1.0
    flipped = table.theta + sign * state.weights[qubit]
    return complex(
        sign * state.visible_bias[qubit]
        + _hidden_log_terms(flipped).sum()
        - _hidden_log_terms(table.theta).sum()
    )


def variational_derivatives(state: RbmState, b: np.ndarray, table: ThetaTable) -> np.ndarray:
    """d log Psi / d p for every parameter p, canonical order."""
    b = check_bits(state, b, ndim=1)
    return log_derivatives(state, b[None, :], table.theta[None, :])[0]


def log_derivatives(
    state: RbmState, bits: np.ndarray, theta: np.ndarray | None = None
) -> np.ndarray:
    """Batched variational derivatives, shape (S, N + M + N*M)."""
    bits = check_bits(state, bits, ndim=2)
    if theta is None:
        theta = thetas(state, bits)
    s = sigmoid(theta)
    b = bits.astype(np.complex128)
    dw = (b[:, :, None] * s[:, None, :]).reshape(bits.shape[0], -1)
    return np.concatenate([b, s, dw], axis=1)


def add_hidden_units(
    state: RbmState,
    columns: Sequence[Mapping[int, complex] | np.ndarray],
    biases: Sequence[complex] | None = None,
) -> RbmState:
    """Append hidden units; each column is dense (length N) or a sparse {qubit: weight} map."""
    if not columns:
        return state
    n = state.n_visible
    if biases is None:
        biases = [0.0] * len(columns)
    if len(biases) != len(columns):
        raise StructuralError("one hidden bias is needed per inserted column")
    dense = np.zeros((n, len(columns)), dtype=np.complex128)
    for c, column in enumerate(columns):
        if isinstance(column, Mapping):
            for qubit, weight in column.items():
                if not 0 <= qubit < n:
                    raise StructuralError(f"coupling to qubit {qubit} out of range for {n} qubits")
                dense[qubit, c] = weight
        else:
            column = np.asarray(column, dtype=np.complex128)
            if column.shape != (n,):
                raise StructuralError(f"coupling column has shape {column.shape}, expected ({n},)")
            dense[:, c] = column
    return RbmState(
        visible_bias=state.visible_bias,
        hidden_bias=np.concatenate([state.hidden_bias, np.asarray(biases, dtype=np.complex128)]),
        weights=np.hstack([state.weights, dense]),
    )


def add_hidden_unit(
    state: RbmState, couplings: Mapping[int, complex] | np.ndarray, bias: complex = 0.0
) -> RbmState:
    return add_hidden_units(state, [couplings], [bias])


def _pairs(values: np.ndarray) -> list:
    return np.stack([values.real, values.imag], axis=-1).tolist()


def state_to_dict(state: RbmState, metadata: Mapping[str, Any] | None = None) -> dict[str, Any]:
    data: dict[str, Any] = {
        "n_visible": state.n_visible,
        "n_hidden": state.n_hidden,
        "visible_bias": _pairs(state.visible_bias),
        "hidden_bias": _pairs(state.hidden_bias),
        "weights": _pairs(state.weights),
    }
    if metadata:
        data["metadata"] = dict(metadata)
    return data


def state_from_dict(data: Mapping[str, Any]) -> tuple[RbmState, dict[str, Any]]:
    try:
        jsonschema.validate(data, RBM_SCHEMA)
    except jsonschema.ValidationError as e:
        raise ConfigError(
            f"invalid RBM parameter document: {e.message}",
            field="/".join(str(p) for p in e.absolute_path) or None,
        ) from None

    def unpack(key: str, *shape: int) -> np.ndarray:
        arr = np.asarray(data[key], dtype=np.float64)
        if arr.size != 2 * int(np.prod(shape)):
            raise ConfigError("parameter shape disagrees with n_visible/n_hidden", field=key)
        arr = arr.reshape(*shape, 2)
        return arr[..., 0] + 1j * arr[..., 1]

    n, m = data["n_visible"], data["n_hidden"]
    if m == 0 and len(data["weights"]) not in (0, n):
        raise ConfigError("parameter shape disagrees with n_visible/n_hidden", field="weights")
    state = RbmState(
        visible_bias=unpack("visible_bias", n),
        hidden_bias=unpack("hidden_bias", m),
        weights=unpack("weights", n, m),
    )
    return state, dict(data.get("metadata", {}))


def save_state(path: str | Path, state: RbmState, metadata: Mapping[str, Any] | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(state_to_dict(state, metadata), f, indent=2)
    return path


def load_state(path: str | Path) -> tuple[RbmState, dict[str, Any]]:
    path = Path(path)
    try:
        with open(path) as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path} is not valid JSON: {e.msg}", line=e.lineno) from None
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e.strerror}") from None
    return state_from_dict(data)
