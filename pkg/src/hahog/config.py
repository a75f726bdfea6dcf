"""Single JSON config file covering every tunable parameter.

Each section maps onto one module's config dataclass.  CLI flags override
file values, which override the built-in defaults, and every run echoes the
effective configuration so sensitivity sweeps are scripted rather than
recompiled.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

from .cluster import ClusterConfig
from .detector import DetectorConfig
from .errors import ConfigError
from .evaluation import DEFAULT_BIN_EDGES_RHO, DEFAULT_MATCH_RADIUS_MM
from .features import FeatureConfig
from .mlp import TrainConfig
from .synth import SceneConfig
from .training import AugmentConfig


@dataclass
class EvalConfig:
    match_radius_mm: float = DEFAULT_MATCH_RADIUS_MM
    bin_edges_rho: tuple[float, ...] = DEFAULT_BIN_EDGES_RHO


@dataclass
class Settings:
    seed: int = 1234
    threads: int = 1
    features: FeatureConfig = field(default_factory=FeatureConfig)
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    cluster: ClusterConfig = field(default_factory=ClusterConfig)
    synth: SceneConfig = field(default_factory=SceneConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    def to_dict(self) -> dict:
        return asdict(self)

    def echo(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


_SECTIONS = {
    "features": FeatureConfig,
    "detector": DetectorConfig,
    "cluster": ClusterConfig,
    "synth": SceneConfig,
    "train": TrainConfig,
    "augment": AugmentConfig,
    "eval": EvalConfig,
}


def _coerce(cls, d: dict):
    fields = {f.name for f in cls.__dataclass_fields__.values()}  # type: ignore
    unknown = set(d) - fields
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    kwargs = {}
    for k, v in d.items():
        if isinstance(v, list):
            v = tuple(v)
        kwargs[k] = v
    return cls(**kwargs)


def load_settings(path: str | Path | None = None, **overrides) -> Settings:
    """Defaults <- config file <- keyword overrides (per-section dicts)."""
    data: dict = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"config {path} must be a JSON object")

    merged: dict = {k: dict(v) if isinstance(v, dict) else v for k, v in data.items()}
    for k, v in overrides.items():
        if v is None:
            continue
        if isinstance(v, dict):
            sec = merged.setdefault(k, {})
            sec.update({kk: vv for kk, vv in v.items() if vv is not None})
        else:
            merged[k] = v

    unknown = set(merged) - set(_SECTIONS) - {"seed", "threads"}
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")

    kwargs: dict = {}
    if "seed" in merged:
        kwargs["seed"] = int(merged["seed"])
    if "threads" in merged:
        kwargs["threads"] = int(merged["threads"])
    for name, cls in _SECTIONS.items():
        if name in merged:
            try:
                kwargs[name] = _coerce(cls, merged[name])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad [{name}] section: {exc}") from exc
    return Settings(**kwargs)
