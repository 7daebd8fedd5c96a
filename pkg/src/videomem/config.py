"""Run configuration: dimensions, bank sizes, policy, toggles, scenario knobs.

Defaults follow the reference operating point: context window 4, evidence
capacity 32, 7x7 pooled tokens from a 14x14 visual grid. Tests and the
comparison harness shrink the dimensions; the contracts do not depend on
them.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from typing import Any

from .pipeline import POLICY_NAMES

POSE_DIM = 3  # x, y, heading


@dataclass(frozen=True)
class Dims:
    feature_dim: int = 32
    geom_dim: int = 8
    geom_tokens: int = 16
    grid_h: int = 14
    grid_w: int = 14
    pool_h: int = 7
    pool_w: int = 7

    @property
    def visual_tokens(self) -> int:
        return self.grid_h * self.grid_w

    @property
    def pooled_tokens(self) -> int:
        return self.pool_h * self.pool_w

    def validate(self):
        for name in ("feature_dim", "geom_dim", "geom_tokens", "grid_h", "grid_w",
                     "pool_h", "pool_w"):
            if getattr(self, name) < 1:
                raise ConfigError(f"dims.{name} must be >= 1")
        if self.pool_h > self.grid_h or self.pool_w > self.grid_w:
            raise ConfigError("pool grid must not exceed the visual grid")
        if self.geom_dim < POSE_DIM + 1:
            raise ConfigError(f"geom_dim must be >= {POSE_DIM + 1} to encode camera poses")


@dataclass(frozen=True)
class ScenarioConfig:
    length: int = 64
    n_labels: int = 16
    relevant_fraction: float = 0.25
    revisit_rate: float = 0.3
    noise_scale: float = 0.05
    question_label: str = "q"

    def validate(self, dims: Dims):
        if self.length < 1:
            raise ConfigError("scenario.length must be >= 1")
        if self.n_labels < 1:
            raise ConfigError("scenario.n_labels must be >= 1")
        if not (0.0 <= self.relevant_fraction <= 1.0):
            raise ConfigError("scenario.relevant_fraction must lie in [0, 1]")
        if not (0.0 <= self.revisit_rate <= 1.0):
            raise ConfigError("scenario.revisit_rate must lie in [0, 1]")
        if self.noise_scale < 0:
            raise ConfigError("scenario.noise_scale must be >= 0")
        if self.n_labels > dims.feature_dim:
            raise ConfigError(
                "scenario.n_labels exceeds feature_dim; label anchors are rows of an "
                "orthonormal basis and cannot outnumber the feature width"
            )


@dataclass(frozen=True)
class RunConfig:
    dims: Dims = field(default_factory=Dims)
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    tau: int = 4
    capacity: int = 32
    lambda_r: float = 1.0
    lambda_nu: float = 1.0
    policy: str = "scored"
    sim_mode: str = "pooled_mean"
    geometry_fusion: bool = True
    context_bank: bool = True
    evidence_bank: bool = True
    camera_delta: bool = True
    seed: int = 0
    verbose_records: bool = False

    def validate(self) -> "RunConfig":
        self.dims.validate()
        self.scenario.validate(self.dims)
        if self.tau < 1:
            raise ConfigError("tau must be >= 1")
        if self.capacity < 1:
            raise ConfigError("capacity must be >= 1")
        if self.lambda_r <= 0 or self.lambda_nu <= 0:
            raise ConfigError("lambda_r and lambda_nu must be positive")
        if self.policy not in POLICY_NAMES:
            raise ConfigError(f"unknown policy {self.policy!r}; expected one of {POLICY_NAMES}")
        if self.sim_mode not in ("pooled_mean", "per_token"):
            raise ConfigError(f"unknown sim_mode {self.sim_mode!r}")
        return self

    def echo(self) -> dict[str, Any]:
        """Effective configuration as rendered into every report."""
        return {
            "dims": dataclasses.asdict(self.dims),
            "scenario": dataclasses.asdict(self.scenario),
            "tau": self.tau,
            "capacity": self.capacity,
            "lambda_r": self.lambda_r,
            "lambda_nu": self.lambda_nu,
            "policy": self.policy,
            "sim_mode": self.sim_mode,
            "toggles": {
                "geometry_fusion": self.geometry_fusion,
                "context_bank": self.context_bank,
                "evidence_bank": self.evidence_bank,
                "camera_delta": self.camera_delta,
            },
            "seed": self.seed,
        }


class ConfigError(ValueError):
    """Raised for semantically invalid configuration."""


def config_from_dict(data: dict[str, Any], base: RunConfig | None = None) -> RunConfig:
    """Build a RunConfig from a (possibly partial) plain dict.

    Unknown keys are rejected so typos in config files fail loudly.
    """
    base = base or RunConfig()
    data = dict(data)
    toggles = data.pop("toggles", {})
    if not isinstance(toggles, dict):
        raise ConfigError("toggles must be an object")
    for key, value in toggles.items():
        if key not in ("geometry_fusion", "context_bank", "evidence_bank", "camera_delta"):
            raise ConfigError(f"unknown toggle {key!r}")
        data[key] = value
    dims = data.pop("dims", None)
    scenario = data.pop("scenario", None)
    known = {f.name for f in dataclasses.fields(RunConfig)} - {"dims", "scenario"}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    merged = dataclasses.replace(base, **data)
    if dims is not None:
        merged = dataclasses.replace(merged, dims=_sub_from_dict(Dims, dims, base.dims))
    if scenario is not None:
        merged = dataclasses.replace(
            merged, scenario=_sub_from_dict(ScenarioConfig, scenario, base.scenario)
        )
    return merged.validate()


def _sub_from_dict(cls, data, base):
    if not isinstance(data, dict):
        raise ConfigError(f"{cls.__name__.lower()} section must be an object")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown {cls.__name__.lower()} keys: {sorted(unknown)}")
    return dataclasses.replace(base, **data)


def load_config_file(path: str, base: RunConfig | None = None) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must contain a JSON object")
    return config_from_dict(data, base)
