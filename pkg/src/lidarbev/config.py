"""Versioned run configuration: one JSON document drives every batch command.

A config file overrides the defaults section by section, flags override the
file, and the effective document is validated against RUN_CONFIG_SCHEMA
before any command touches its outputs. The sha256 of the canonical
effective document is stamped into manifests so downstream runs stay
traceable.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import jsonschema

from .bev_raster import CHANNEL_KINDS, BevConfig
from .errors import ConfigError
from .geometry import DensifyConfig
from .sampler import ROLES, AugmentationSchedule, DatasetSpec

SCHEMA_VERSION = 1

DEFAULT_CONFIG = {
    "schema_version": SCHEMA_VERSION,
    "seed": 0,
    "bev": {
        "x_min": 0.0, "x_max": 60.0, "y_min": -30.0, "y_max": 30.0,
        "r_x": 0.125, "r_y": 0.125,
        "channels": list(CHANNEL_KINDS),
        "z_clamp": [-3.0, 3.0],
        "n_cap": 16,
    },
    "densify": {
        "delta_r_min": 0.1, "delta_r_max": 0.3, "copies_per_point": 1,
    },
    "sampler": {
        "datasets": [
            {"name": "kitti-det-augmented", "length": 9400, "role": "detection"},
            {"name": "semantickitti-semantic", "length": 9560, "role": "semantic"},
            {"name": "semantickitti-motion", "length": 4719, "role": "motion"},
        ],
        "total_epochs": 120,
        "delta_moving_pixels": 100,
        "semantic_stride": 5,
    },
    "decode": {
        "threshold": 0.3, "window": 3, "delta_theta_deg": 5.0,
    },
    "eval": {
        "iou_thresh": 0.5,
    },
}

_NUMBER = {"type": "number"}
_POS_INT = {"type": "integer", "minimum": 1}

RUN_CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["schema_version"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "seed": {"type": "integer", "minimum": 0},
        "bev": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "x_min": _NUMBER, "x_max": _NUMBER,
                "y_min": _NUMBER, "y_max": _NUMBER,
                "r_x": {"type": "number", "exclusiveMinimum": 0},
                "r_y": {"type": "number", "exclusiveMinimum": 0},
                "channels": {
                    "type": "array", "minItems": 1,
                    "items": {"enum": list(CHANNEL_KINDS)},
                },
                "z_clamp": {
                    "type": "array", "minItems": 2, "maxItems": 2, "items": _NUMBER,
                },
                "n_cap": _POS_INT,
            },
        },
        "densify": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "delta_r_min": {"type": "number", "minimum": 0},
                "delta_r_max": {"type": "number", "minimum": 0},
                "copies_per_point": _POS_INT,
            },
        },
        "sampler": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "datasets": {
                    "type": "array", "minItems": 3, "maxItems": 3,
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["name", "length", "role"],
                        "properties": {
                            "name": {"type": "string"},
                            "length": _POS_INT,
                            "role": {"enum": list(ROLES)},
                        },
                    },
                },
                "total_epochs": _POS_INT,
                "delta_moving_pixels": {"type": "integer", "minimum": 0},
                "semantic_stride": _POS_INT,
            },
        },
        "decode": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "threshold": {"type": "number", "minimum": 0, "maximum": 1},
                "window": {"type": "integer", "minimum": 1},
                "delta_theta_deg": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "eval": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "iou_thresh": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
            },
        },
    },
}


def canonical_json(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


@dataclass(frozen=True)
class RunConfig:
    """Validated effective configuration with typed section accessors."""

    raw: dict

    def __post_init__(self):
        try:
            jsonschema.validate(self.raw, RUN_CONFIG_SCHEMA)
        except jsonschema.ValidationError as exc:
            raise ConfigError(f"config rejected by schema: {exc.message}") from exc
        # Eagerly build every typed section so a bad document fails before
        # any command starts writing outputs.
        try:
            self.bev, self.densify, self.schedule
            specs = self.dataset_specs
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if sorted(s.role for s in specs) != sorted(ROLES):
            raise ConfigError("sampler.datasets must cover each role exactly once")

    @property
    def seed(self) -> int:
        return self.raw["seed"]

    @property
    def bev(self) -> BevConfig:
        b = self.raw["bev"]
        return BevConfig(x_min=b["x_min"], x_max=b["x_max"],
                         y_min=b["y_min"], y_max=b["y_max"],
                         r_x=b["r_x"], r_y=b["r_y"],
                         channels=tuple(b["channels"]),
                         z_clamp=tuple(b["z_clamp"]), n_cap=b["n_cap"])

    @property
    def densify(self) -> DensifyConfig:
        d = self.raw["densify"]
        return DensifyConfig(delta_r_min=d["delta_r_min"], delta_r_max=d["delta_r_max"],
                             copies_per_point=d["copies_per_point"], seed=self.seed)

    @property
    def dataset_specs(self) -> list[DatasetSpec]:
        return [DatasetSpec(name=d["name"], length=d["length"], role=d["role"])
                for d in self.raw["sampler"]["datasets"]]

    @property
    def schedule(self) -> AugmentationSchedule:
        return AugmentationSchedule(total_epochs=self.raw["sampler"]["total_epochs"])

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(canonical_json(self.raw).encode("ascii")).hexdigest()


def _merge_section(base, override):
    if isinstance(base, dict) and isinstance(override, dict):
        merged = dict(base)
        for key, val in override.items():
            merged[key] = _merge_section(base.get(key), val)
        return merged
    return copy.deepcopy(override)


def load_run_config(path=None, seed_override: int | None = None) -> RunConfig:
    """Defaults <- config file <- flag overrides, then validate.

    Raises ConfigError on unreadable files, bad JSON, schema violations, or
    semantically invalid sections.
    """
    doc = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            overrides = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(overrides, dict):
            raise ConfigError(f"config {path} must be a JSON object")
        doc = _merge_section(doc, overrides)
    if seed_override is not None:
        if seed_override < 0:
            raise ConfigError("seed must be non-negative")
        doc["seed"] = seed_override
    return RunConfig(doc)
