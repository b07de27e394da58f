"""Experiment configuration: JSON schema, validation and hashing."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import jsonschema

from .errors import ConfigError, VLGreedyError
from .exponent_field import ExponentField, build_exponent

KINDS = ("norm", "greedy", "democracy", "verify", "report")
RANDOMIZED = ("norm", "greedy", "democracy", "verify")
MAX_CELL_BITS = 24

_count_list = {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1}
_size_list = {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1}
_pos_list = {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1}

_PARAMS = {
    "norm": {
        "max_scale": {"type": "integer", "minimum": 0},
        "maximal_count": {"type": "integer", "minimum": 1},
    },
    "greedy": {
        "functions": {"type": "integer", "minimum": 1},
        "Ns": _count_list,
        "density": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "decay": {"type": "number", "minimum": 0},
        "exhaustive_limit": {"type": "integer", "minimum": 1},
        "oracle_budget": {"type": "integer", "minimum": 0},
        "refine": {"type": "boolean"},
    },
    "democracy": {
        "Ns": _size_list,
        "epsilons": _pos_list,
        "strategies": {
            "type": "array",
            "items": {
                "enum": ["disjoint-in-G", "gamma1", "gamma2", "nested-tower", "uniform-random", "stratified-random"]
            },
            "minItems": 1,
            "uniqueItems": True,
        },
        "random_families": {"type": "integer", "minimum": 0},
        "type": {"type": "integer", "minimum": 1},
    },
    "verify": {
        "batteries": {
            "type": "array",
            "items": {
                "enum": ["constant", "lemmas", "linearization", "wavelets", "gamma", "sandwich", "scaling", "lebesgue"]
            },
            "uniqueItems": True,
        },
        "Ns": _size_list,
        "epsilons": _pos_list,
        "families": {"type": "integer", "minimum": 1},
        "pairs": {"type": "integer", "minimum": 1},
        "functions": {"type": "integer", "minimum": 1},
        "greedy_instances": {"type": "integer", "minimum": 0},
        "random_families": {"type": "integer", "minimum": 0},
        "exhaustive_limit": {"type": "integer", "minimum": 1},
        "oracle_budget": {"type": "integer", "minimum": 0},
        "tolerances": {"type": "object", "additionalProperties": {"type": "number"}},
    },
    "report": {},
}

SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["dimension", "depth", "exponent"],
    "additionalProperties": False,
    "properties": {
        "dimension": {"type": "integer", "minimum": 1, "maximum": MAX_CELL_BITS},
        "depth": {"type": "integer", "minimum": 1, "maximum": MAX_CELL_BITS},
        "exponent": {
            "type": "object",
            "required": ["kind"],
            "properties": {"kind": {"enum": ["constant", "piecewise", "smoothstep", "samples"]}},
        },
        "experiment": {"enum": list(KINDS)},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "params": {"type": "object"},
        "output_dir": {"type": "string"},
    },
    "allOf": [
        {
            "if": {"properties": {"experiment": {"const": kind}}, "required": ["experiment"]},
            "then": {"properties": {"params": {"type": "object", "properties": props, "additionalProperties": False}}},
        }
        for kind, props in _PARAMS.items()
    ],
}


@dataclass(frozen=True)
class ExperimentConfig:
    dimension: int
    depth: int
    exponent: Mapping[str, Any]
    experiment: str
    seed: int | None = None
    params: Mapping[str, Any] = field(default_factory=dict)
    output_dir: str | None = None

    def to_dict(self) -> dict:
        out = {
            "dimension": self.dimension,
            "depth": self.depth,
            "exponent": dict(self.exponent),
            "experiment": self.experiment,
            "params": dict(self.params),
        }
        if self.seed is not None:
            out["seed"] = self.seed
        if self.output_dir is not None:
            out["output_dir"] = self.output_dir
        return out

    @property
    def hash(self) -> str:
        """First 12 hex digits of sha256 over the canonical JSON, output_dir excluded."""
        body = self.to_dict()
        body.pop("output_dir", None)
        text = json.dumps(body, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:12]

    def build_exponent(self) -> ExponentField:
        try:
            return build_exponent(self.exponent, self.dimension, self.depth)
        except (VLGreedyError, KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"$.exponent: {exc!s}") from exc


def _path(err: jsonschema.ValidationError) -> str:
    return "$" + "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in err.absolute_path)


def validate_config(raw: Mapping[str, Any], experiment: str | None = None, seed: int | None = None) -> ExperimentConfig:
    """Schema check plus the cross-field rules; every problem is reported with its JSON path."""
    raw = dict(raw)
    if experiment is not None:
        if raw.get("experiment", experiment) != experiment:
            raise ConfigError(f"$.experiment: config says {raw['experiment']!r} but the command is {experiment!r}")
        raw["experiment"] = experiment
    if seed is not None:
        raw["seed"] = seed
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        raise ConfigError("; ".join(f"{_path(e)}: {e.message}" for e in errors))
    if "experiment" not in raw:
        raise ConfigError("$.experiment: required when no subcommand names the experiment")
    n, J = raw["dimension"], raw["depth"]
    if n * J > MAX_CELL_BITS:
        raise ConfigError(f"$.depth: dimension * depth = {n * J} exceeds {MAX_CELL_BITS} (at most 2^{MAX_CELL_BITS} cells)")
    if raw["experiment"] in RANDOMIZED and "seed" not in raw:
        raise ConfigError(f"$.seed: required for the randomized experiment {raw['experiment']!r}")
    cfg = ExperimentConfig(
        dimension=n,
        depth=J,
        exponent=raw["exponent"],
        experiment=raw["experiment"],
        seed=raw.get("seed"),
        params=raw.get("params", {}),
        output_dir=raw.get("output_dir"),
    )
    cfg.build_exponent()
    return cfg


def load_config(path: str | Path, experiment: str | None = None, seed: int | None = None) -> ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("$: config must be a JSON object")
    return validate_config(raw, experiment, seed)
