"""Scenario configuration: JSON schema, defaults and the typed config object."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import jsonschema

from ..geometry import Pose
from ..network import DroneGraph, GraphError
from ..pursuit_control import ErrorState, Gains
from ..vision import CameraModel, FeatureSet
from .dataset import ExpertRegions
from .target import KINDS, TargetMotion

MODES = ("no_gp", "local_gp", "distributed_gp", "oracle")
GP_MODES = ("local_gp", "distributed_gp")


class ConfigError(ValueError):
    pass


_num = {"type": "number"}
_vec3 = {"type": "array", "items": _num, "minItems": 3, "maxItems": 3}
_vec4 = {"type": "array", "items": _num, "minItems": 4, "maxItems": 4}
_pose = {
    "type": "object",
    "properties": {"p": _vec3, "theta": _num},
    "required": ["p"],
    "additionalProperties": False,
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "graph": {
            "type": "object",
            "properties": {
                "n": {"type": "integer", "minimum": 1},
                "edges": {
                    "type": "array",
                    "items": {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2},
                },
                "d": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
            },
            "required": ["n"],
            "additionalProperties": False,
        },
        "gains": {
            "oneOf": [
                {"type": "string", "enum": ["sim", "experiment"]},
                {
                    "type": "object",
                    "properties": {
                        "preset": {"type": "string", "enum": ["sim", "experiment"]},
                        "k_c": _vec4,
                        "k_e": _vec4,
                        "k_s": _num,
                    },
                    "additionalProperties": False,
                },
            ]
        },
        "camera": {
            "type": "object",
            "properties": {
                "lambda": {"type": "number", "exclusiveMinimum": 0},
                "image_half_extent": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2},
                "z_min": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
        "features": {
            "type": "object",
            "properties": {"points": {"type": "array", "items": _vec3, "minItems": 4}},
            "required": ["points"],
            "additionalProperties": False,
        },
        "target": {
            "type": "object",
            "properties": {
                "kind": {"enum": list(KINDS)},
                "delta": _num,
                "gamma": _num,
                "omega": _num,
                "alpha": _num,
                "beta": _num,
                "initial_pose": _pose,
                "velocity": _vec4,
                "side": _num,
                "speed": _num,
                "track_gain": _num,
                "region_low": _vec3,
                "region_high": _vec3,
            },
            "additionalProperties": False,
        },
        "regions": {
            "type": "object",
            "properties": {
                "boundaries_deg": {"type": "array", "items": _num},
                "samples_per_drone": {
                    "oneOf": [
                        {"type": "integer", "minimum": 1},
                        {"type": "array", "items": {"type": "integer", "minimum": 1}},
                    ]
                },
            },
            "additionalProperties": False,
        },
        "gp": {
            "type": "object",
            "properties": {
                "noise_var": {"type": "number", "minimum": 0},
                "optimize": {"type": "boolean"},
                "budget": {"type": "integer", "minimum": 1},
                "init_sigma_f": {"type": "number", "exclusiveMinimum": 0},
                "init_lengthscale": {"type": "number", "exclusiveMinimum": 0},
                "delta": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "beta_formula": {"enum": ["srinivas", "fixed"]},
                "beta_value": {"type": "number", "exclusiveMinimum": 0},
                "var_floor": {"type": "number", "exclusiveMinimum": 0},
                "dataset_duration": {"type": "number", "exclusiveMinimum": 0},
                "bound_grid": {
                    "type": "object",
                    "properties": {
                        "low": _vec4,
                        "high": _vec4,
                        "points_per_dim": {"type": "integer", "minimum": 2},
                    },
                    "additionalProperties": False,
                },
            },
            "additionalProperties": False,
        },
        "mode": {"enum": list(MODES)},
        "duration": {"type": "number", "exclusiveMinimum": 0},
        "dt": {"type": "number", "exclusiveMinimum": 0},
        "seed": {"type": "integer", "minimum": 0},
        "desired_poses": {"type": "array", "items": _pose},
        "initial_errors": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {"g_c": _pose, "g_e": _pose},
                "additionalProperties": False,
            },
        },
        "pixel_noise_std": {"type": "number", "minimum": 0},
        "theta_limit": {"type": "number", "exclusiveMinimum": 0},
        "lost_grace": {"type": "number", "minimum": 0},
        "dump_features": {"type": "boolean"},
        "paths": {
            "type": "object",
            "properties": {"datasets": {"type": "string"}, "hyperparams": {"type": "string"}},
            "additionalProperties": False,
        },
    },
}


@dataclass(frozen=True)
class GpSettings:
    noise_var: float = 0.01
    optimize: bool = True
    budget: int = 500
    init_sigma_f: float = 1.0
    init_lengthscale: float = 1.0
    delta: float = 0.1
    beta_formula: str = "srinivas"
    beta_value: float = 4.0
    var_floor: float = 1e-12
    dataset_duration: float = 100.0
    grid_low: tuple = (-2.5, -1.5, -1.5, -math.pi)
    grid_high: tuple = (2.5, 1.5, 1.5, math.pi)
    grid_points: int = 5

    def beta_kwargs(self) -> dict:
        return {"value": self.beta_value} if self.beta_formula == "fixed" else {}


def default_desired_poses(n: int, radius: float = 0.5, depth: float = 1.0) -> tuple:
    """Target held ``depth`` ahead of each camera, offset laterally on a circle."""
    if n == 1:
        return (Pose([0.0, 0.0, depth], 0.0),)
    return tuple(
        Pose([radius * math.cos(2 * math.pi * k / n), radius * math.sin(2 * math.pi * k / n), depth], 0.0)
        for k in range(n)
    )


@dataclass(frozen=True)
class ScenarioConfig:
    graph: DroneGraph = field(default_factory=lambda: DroneGraph.complete(3))
    gains: Gains = field(default_factory=lambda: Gains.preset("sim"))
    camera: CameraModel = field(default_factory=CameraModel)
    features: FeatureSet = field(default_factory=FeatureSet.square)
    target: TargetMotion = field(default_factory=TargetMotion)
    regions: ExpertRegions = field(default_factory=ExpertRegions)
    gp: GpSettings = field(default_factory=GpSettings)
    mode: str = "distributed_gp"
    duration: float = 100.0
    dt: float = 0.005
    seed: int = 0
    desired_poses: tuple = ()
    initial_errors: tuple = ()
    pixel_noise_std: float = 0.0
    theta_limit: float = math.pi / 2
    lost_grace: float = 1.0
    dump_features: bool = False
    datasets_path: Optional[str] = None
    hyperparams_path: Optional[str] = None

    def __post_init__(self):
        n = self.graph.n
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.regions.n != n:
            raise ConfigError(f"{self.regions.n} expert regions for {n} drones")
        if not self.desired_poses:
            object.__setattr__(self, "desired_poses", default_desired_poses(n))
        if not self.initial_errors:
            object.__setattr__(self, "initial_errors", tuple(ErrorState.zero() for _ in range(n)))
        if len(self.desired_poses) != n or len(self.initial_errors) != n:
            raise ConfigError("desired_poses and initial_errors need one entry per drone")
        if self.dt > self.duration:
            raise ConfigError("dt exceeds duration")

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def steps(self) -> int:
        return int(round(self.duration / self.dt))

    def with_(self, **changes) -> ScenarioConfig:
        return replace(self, **changes)


def validate(obj: dict) -> None:
    try:
        jsonschema.validate(obj, SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {path}: {exc.message}") from None


def from_dict(obj: dict, base_dir: Optional[Path] = None) -> ScenarioConfig:
    validate(obj)
    try:
        graph = DroneGraph.from_json(obj["graph"]) if "graph" in obj else DroneGraph.complete(3)
        n = graph.n
        kw: dict = {"graph": graph}
        if "gains" in obj:
            kw["gains"] = Gains.from_json(obj["gains"])
        if "camera" in obj:
            kw["camera"] = CameraModel.from_json(obj["camera"])
        if "features" in obj:
            kw["features"] = FeatureSet(obj["features"]["points"])
        if "target" in obj:
            kw["target"] = TargetMotion.from_json(obj["target"])
        kw["regions"] = ExpertRegions.from_json(obj.get("regions", {}), n)
        if "gp" in obj:
            g = dict(obj["gp"])
            grid = g.pop("bound_grid", {})
            if "low" in grid:
                g["grid_low"] = tuple(grid["low"])
            if "high" in grid:
                g["grid_high"] = tuple(grid["high"])
            if "points_per_dim" in grid:
                g["grid_points"] = grid["points_per_dim"]
            kw["gp"] = GpSettings(**g)
        for key in ("mode", "duration", "dt", "seed", "pixel_noise_std", "theta_limit", "lost_grace", "dump_features"):
            if key in obj:
                kw[key] = obj[key]
        if "desired_poses" in obj:
            kw["desired_poses"] = tuple(Pose.from_json(p) for p in obj["desired_poses"])
        if "initial_errors" in obj:
            kw["initial_errors"] = tuple(
                ErrorState(
                    Pose.from_json(e.get("g_c", {"p": [0, 0, 0]})),
                    Pose.from_json(e.get("g_e", {"p": [0, 0, 0]})),
                )
                for e in obj["initial_errors"]
            )
        paths = obj.get("paths", {})
        for key in ("datasets", "hyperparams"):
            if key in paths:
                p = Path(paths[key])
                if base_dir is not None and not p.is_absolute():
                    p = base_dir / p
                kw[f"{key}_path"] = str(p)
        return ScenarioConfig(**kw)
    except ConfigError:
        raise
    except (GraphError, ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        obj = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return from_dict(obj, base_dir=path.parent)
