"""
Experiment configuration: one JSON document per run, validated with jsonschema.

Every random stream of a run is derived from the top-level `seed`; sub-configs
do not carry seeds of their own.
"""

import json
from dataclasses import MISSING, dataclass, field, fields
from enum import StrEnum
from pathlib import Path
from typing import Any

import jsonschema

from .circuits import BUILDERS
from .errors import ConfigError, StructuralError
from .groundstate import Lattice, LatticeKind, TfimParams, VmcConfig
from .learner import LearnerConfig
from .sampler import SamplerConfig
from .seeding import derive_seed


class ExperimentKind(StrEnum):
    HADAMARD_TRANSFORM = "hadamard_transform"
    TRUNCATED_FOURIER = "truncated_fourier"
    NOISE_SWEEP = "noise_sweep"
    PREPARE_GROUND_STATE = "prepare_ground_state"
    RUN_CIRCUIT_FILE = "run_circuit_file"


@dataclass(frozen=True, kw_only=True)
class NoiseSweep:
    rates: tuple[float, ...] = (1e-4, 3e-4, 1e-3, 3e-3, 1e-2)
    trajectories: int = 200
    nqs_overlap: float | None = None


@dataclass(frozen=True, kw_only=True)
class OutputConfig:
    """Relative state_file and checkpoint_dir resolve against `dir`."""

    dir: Path = Path("runs")
    state_file: Path | None = None
    checkpoint_dir: Path | None = None


@dataclass(frozen=True, kw_only=True)
class ExperimentConfig:
    experiment: ExperimentKind
    experiment_id: str
    seed: int = 0
    lattice: Lattice = field(default_factory=lambda: Lattice.chain(12))
    tfim: TfimParams = field(default_factory=lambda: TfimParams(gamma=1.0, j=1.0))
    alpha: float = 1.0
    learner: LearnerConfig = field(default_factory=LearnerConfig)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    vmc: VmcConfig = field(default_factory=VmcConfig)
    noise: NoiseSweep = field(default_factory=NoiseSweep)
    circuit: str | None = None
    circuit_file: Path | None = None
    initial_state: Path | None = None
    refine_with_fit: bool = True
    oracle: bool = True
    output: OutputConfig = field(default_factory=OutputConfig)

    @property
    def n_qubits(self) -> int:
        return self.lattice.n_sites


_JSON_TYPES = {int: "integer", float: "number", bool: "boolean", str: "string"}
_COMMENTS = {"^\\$comment": {"type": "string"}}


def _fields_schema(cls, exclude: tuple[str, ...] = ("seed",)) -> dict[str, Any]:
    """Schema of a flat config dataclass: every field optional, no extras."""
    properties = {}
    for f in fields(cls):
        if f.name in exclude:
            continue
        properties[f.name] = {"type": _JSON_TYPES[f.type]}
        if f.type is int:
            properties[f.name]["minimum"] = 0
    return {
        "type": "object",
        "properties": properties,
        "patternProperties": _COMMENTS,
        "additionalProperties": False,
    }


CONFIG_SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["experiment"],
    "properties": {
        "experiment": {"enum": [k.value for k in ExperimentKind]},
        "experiment_id": {"type": "string", "minLength": 1},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "lattice": {
            "type": "object",
            "required": ["kind", "extent"],
            "properties": {
                "kind": {"enum": [k.value for k in LatticeKind]},
                "extent": {
                    "type": "array",
                    "items": {"type": "integer", "minimum": 1},
                    "minItems": 1,
                    "maxItems": 2,
                },
            },
            "patternProperties": _COMMENTS,
            "additionalProperties": False,
        },
        "tfim": {
            "type": "object",
            "required": ["gamma", "j"],
            "properties": {"gamma": {"type": "number"}, "j": {"type": "number"}},
            "patternProperties": _COMMENTS,
            "additionalProperties": False,
        },
        "alpha": {"type": "number", "exclusiveMinimum": 0},
        "learner": _fields_schema(LearnerConfig),
        "sampler": _fields_schema(SamplerConfig),
        "vmc": _fields_schema(VmcConfig),
        "noise": {
            "type": "object",
            "properties": {
                "rates": {
                    "type": "array",
                    "items": {"type": "number", "minimum": 0, "maximum": 1},
                    "minItems": 1,
                },
                "trajectories": {"type": "integer", "minimum": 1},
                "nqs_overlap": {"type": ["number", "null"], "minimum": 0},
            },
            "patternProperties": _COMMENTS,
            "additionalProperties": False,
        },
        "circuit": {"enum": [*BUILDERS, None]},
        "circuit_file": {"type": ["string", "null"]},
        "initial_state": {"type": ["string", "null"]},
        "refine_with_fit": {"type": "boolean"},
        "oracle": {"type": "boolean"},
        "output": {
            "type": "object",
            "properties": {
                "dir": {"type": "string"},
                "state_file": {"type": ["string", "null"]},
                "checkpoint_dir": {"type": ["string", "null"]},
            },
            "patternProperties": _COMMENTS,
            "additionalProperties": False,
        },
    },
    "patternProperties": _COMMENTS,
    "additionalProperties": False,
}


def _strip_comments(data: dict[str, Any]) -> dict[str, Any]:
    return {k: v for k, v in data.items() if not k.startswith("$comment")}


def _section(cls, data: dict[str, Any] | None, name: str, seed: int):
    try:
        return cls(**_strip_comments(data or {}), seed=derive_seed(seed, name))
    except StructuralError as e:
        raise ConfigError(e.message, field=name) from None


def _path(value: str | None, base: Path) -> Path | None:
    if value is None:
        return None
    path = Path(value)
    return path if path.is_absolute() else base / path


def config_from_dict(data: dict[str, Any], base_dir: str | Path = ".") -> ExperimentConfig:
    try:
        jsonschema.validate(data, CONFIG_SCHEMA)
    except jsonschema.ValidationError as e:
        raise ConfigError(
            f"invalid experiment config: {e.message}",
            field="/".join(str(p) for p in e.absolute_path) or None,
        ) from None

    base = Path(base_dir)
    kind = ExperimentKind(data["experiment"])
    seed = data.get("seed", 0)
    try:
        lattice = Lattice(**_strip_comments(data["lattice"])) if "lattice" in data else Lattice.chain(12)
    except StructuralError as e:
        raise ConfigError(e.message, field="lattice") from None
    try:
        tfim = TfimParams(**_strip_comments(data.get("tfim", {"gamma": 1.0, "j": 1.0})))
    except StructuralError as e:
        raise ConfigError(e.message, field="tfim") from None

    noise = _strip_comments(data.get("noise", {}))
    output = _strip_comments(data.get("output", {}))
    out_dir = _path(output.get("dir", "runs"), base)
    config = ExperimentConfig(
        experiment=kind,
        experiment_id=data.get("experiment_id", kind.value),
        seed=seed,
        lattice=lattice,
        tfim=tfim,
        alpha=data.get("alpha", 1.0),
        learner=_section(LearnerConfig, data.get("learner"), "learner", seed),
        sampler=_section(SamplerConfig, data.get("sampler"), "sampler", seed),
        vmc=_section(VmcConfig, data.get("vmc"), "vmc", seed),
        noise=NoiseSweep(
            rates=tuple(noise.get("rates", NoiseSweep.rates)),
            trajectories=noise.get("trajectories", NoiseSweep.trajectories),
            nqs_overlap=noise.get("nqs_overlap"),
        ),
        circuit=data.get("circuit"),
        circuit_file=_path(data.get("circuit_file"), base),
        initial_state=_path(data.get("initial_state"), base),
        refine_with_fit=data.get("refine_with_fit", True),
        oracle=data.get("oracle", True),
        output=OutputConfig(
            dir=out_dir,
            state_file=_path(output.get("state_file"), out_dir),
            checkpoint_dir=_path(output.get("checkpoint_dir"), out_dir),
        ),
    )
    _check_requirements(config)
    return config


def _check_requirements(config: ExperimentConfig):
    if config.experiment == ExperimentKind.RUN_CIRCUIT_FILE:
        if config.circuit_file is None:
            raise ConfigError("run_circuit_file needs a circuit file", field="circuit_file")
        if config.initial_state is None:
            raise ConfigError("run_circuit_file needs an initial state", field="initial_state")
    if config.experiment == ExperimentKind.NOISE_SWEEP and config.circuit is None:
        raise ConfigError("noise_sweep needs a circuit name", field="circuit")
    for name in ("circuit_file", "initial_state"):
        path = getattr(config, name)
        if path is not None and not path.is_file():
            raise ConfigError(f"{path} does not exist", field=name)


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        with open(path) as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path} is not valid JSON: {e.msg}", line=e.lineno) from None
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e.strerror}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must hold a JSON object")
    return config_from_dict(data, path.parent)


def _defaults(cls, exclude: tuple[str, ...] = ("seed",)) -> dict[str, Any]:
    return {
        f.name: f.default
        for f in fields(cls)
        if f.name not in exclude and f.default is not MISSING
    }


def template(kind: ExperimentKind | str) -> dict[str, Any]:
    """A full config for `kind` with every default spelled out and commented."""
    kind = ExperimentKind(kind)
    data: dict[str, Any] = {
        "$comment": f"{kind.value} experiment; every random stream derives from 'seed'",
        "experiment": kind.value,
        "experiment_id": kind.value,
        "seed": 0,
        "lattice": {
            "$comment": "kind: chain_periodic | chain_open | square_periodic; extent: [L] or [Lx, Ly]",
            "kind": "chain_periodic",
            "extent": [12],
        },
        "tfim": {
            "$comment": "H = -gamma sum X_i + j sum_<i,k> Z_i Z_k",
            "gamma": 1.0,
            "j": 1.0,
        },
        "alpha": 1.0,
        "sampler": {"$comment": "Metropolis chains, single-bit flips", **_defaults(SamplerConfig)},
        "vmc": {"$comment": "ground-state preparation by energy minimisation", **_defaults(VmcConfig)},
        "refine_with_fit": True,
        "initial_state": None,
        "oracle": True,
        "output": {
            "$comment": "checkpoint_dir: save the RBM after every gate",
            "dir": f"runs/{kind.value}",
            "state_file": "final_state.json",
            "checkpoint_dir": None,
        },
    }
    if kind in (ExperimentKind.HADAMARD_TRANSFORM, ExperimentKind.TRUNCATED_FOURIER, ExperimentKind.RUN_CIRCUIT_FILE):
        data["learner"] = {"$comment": "Hadamard learner (AdaMax)", **_defaults(LearnerConfig)}
    if kind == ExperimentKind.RUN_CIRCUIT_FILE:
        data["circuit_file"] = "circuit.txt"
        data["initial_state"] = "initial_state.json"
        data.pop("vmc")
        data.pop("refine_with_fit")
    if kind == ExperimentKind.NOISE_SWEEP:
        data["circuit"] = "hadamard_transform"
        for unused in ("alpha", "sampler", "vmc", "refine_with_fit", "oracle"):
            data.pop(unused)
        data["output"] = {"dir": data["output"]["dir"]}
        data["noise"] = {
            "$comment": "nqs_overlap: final NQS overlap to locate on the noise curve",
            "rates": list(NoiseSweep.rates),
            "trajectories": NoiseSweep.trajectories,
            "nqs_overlap": None,
        }
    if kind == ExperimentKind.PREPARE_GROUND_STATE:
        data["output"]["state_file"] = "ground_state.json"
    return data
