"""Run configuration: defaults, JSON config files, and flag overrides.

Precedence is defaults < config file < explicit overrides (CLI flags).  The
resolved configuration hashes to a short stable id that run manifests and
reports carry, so two runs can be compared by their settings alone.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .adapters import TrainConfig
from .errors import ConfigError

_ADAPTERS = ("basic", "classification", "contrastive")
_REDUCTIONS = ("mean", "max")

OUTPUT_ROOT_ENV = "PIXADAPT_OUTPUT_ROOT"


def _default_output_root() -> str:
    return os.environ.get(OUTPUT_ROOT_ENV, "runs")


@dataclass(frozen=True)
class RunConfig:
    adapter: str = "basic"
    threshold: float = 0.5
    score_reduction: str = "mean"
    k_references: int = 10
    pairs_per_label: int = 200
    min_negative_offset: int = 0
    background_margin: float = 0.0
    normalize_features: bool = False
    epochs: int = 40
    batch_size: int = 64
    learning_rate: float = 1e-3
    embed_dim: int = 64
    clf_hidden: tuple[int, ...] = (256, 128)
    twin_hidden: tuple[int, ...] = (64,)
    head_hidden: tuple[int, ...] = (64,)
    connectivity: int = 8
    min_size: int = 5
    prompt_count: int = 10
    refine_tolerance: float = 0.5
    radius: float = 10.0
    seed: int = 0
    output_root: str = field(default_factory=_default_output_root)

    def __post_init__(self) -> None:
        if self.adapter not in _ADAPTERS:
            raise ConfigError(f"adapter must be one of {_ADAPTERS}, got {self.adapter!r}")
        if self.score_reduction not in _REDUCTIONS:
            raise ConfigError(
                f"score_reduction must be one of {_REDUCTIONS}, got {self.score_reduction!r}"
            )
        if not -1.0 <= self.threshold <= 1.0:
            raise ConfigError(f"threshold must lie in [-1, 1], got {self.threshold}")
        if self.connectivity not in (4, 8):
            raise ConfigError(f"connectivity must be 4 or 8, got {self.connectivity}")
        for name in ("k_references", "pairs_per_label", "epochs", "batch_size", "embed_dim", "prompt_count"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        for name in ("min_negative_offset", "min_size", "refine_tolerance"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0, got {getattr(self, name)}")
        for name in ("learning_rate", "radius"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be > 0, got {getattr(self, name)}")
        for name in ("clf_hidden", "twin_hidden", "head_hidden"):
            sizes = tuple(int(s) for s in getattr(self, name))
            if any(s < 1 for s in sizes):
                raise ConfigError(f"{name} layer sizes must be >= 1, got {sizes}")
            object.__setattr__(self, name, sizes)

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            clf_hidden=self.clf_hidden,
            embed_dim=self.embed_dim,
            twin_hidden=self.twin_hidden,
            head_hidden=self.head_hidden,
        )

    def as_dict(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            out[f.name] = list(value) if isinstance(value, tuple) else value
        return out


_FIELDS = {f.name for f in fields(RunConfig)}


def resolve_config(
    config_file: str | Path | None = None, overrides: dict | None = None
) -> RunConfig:
    """Merge defaults, an optional JSON config file, and overrides."""
    merged: dict = {}
    if config_file is not None:
        path = Path(config_file)
        if not path.exists():
            raise FileNotFoundError(f"no such file: {path}")
        try:
            loaded = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        merged.update(loaded)
    if overrides:
        merged.update({k: v for k, v in overrides.items() if v is not None})
    unknown = sorted(set(merged) - _FIELDS)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    for key in ("clf_hidden", "twin_hidden", "head_hidden"):
        if key in merged and not isinstance(merged[key], (list, tuple)):
            raise ConfigError(f"{key} must be a list of layer sizes")
    try:
        return RunConfig(**{k: tuple(v) if isinstance(v, list) else v for k, v in merged.items()})
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def with_overrides(config: RunConfig, **overrides) -> RunConfig:
    return replace(config, **{k: v for k, v in overrides.items() if v is not None})


def config_hash(config: RunConfig) -> str:
    """First 12 hex chars of the sha256 over the canonical config JSON."""
    canonical = json.dumps(config.as_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:12]
