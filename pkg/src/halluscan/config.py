"""Run configuration: defaults, JSON file loading, and override precedence."""

import dataclasses
import json
from typing import Any, Dict, Optional

from .errors import ConfigError
from .frames import EXTRACTORS, METRICS
from .keyframes import KERNELS

BACKENDS = ("live", "record", "replay")
AGG_MODES = ("max", "weighted")
ABLATIONS = ("full", "no_static_kg", "no_dynamic_kg", "no_kg")


@dataclasses.dataclass
class Config:
    # frame ingestion
    stride: int = 5
    extractor: str = "hist768"
    metric: str = "cosine"
    synthetic_fps: float = 30.0
    decoder_cmd: Optional[str] = None

    # keyframe selection
    m: int = 4
    m_auto: bool = False
    tau_d: float = 0.3
    dc_fraction: float = 0.02
    kernel: str = "gaussian"

    # gateway
    backend: str = "replay"
    fixture_dir: Optional[str] = None
    endpoint: Optional[str] = None
    model: str = "gpt-4v"
    max_retries: int = 2
    per_call_usd: float = 0.08
    max_image_edge: int = 768

    # scoring
    alpha: float = 2.0
    beta: float = 4.0
    gamma: float = 4.0
    agg_mode: str = "max"
    severity_weights: Optional[Dict[str, float]] = None
    tau_c: float = 0.5

    # pipeline
    ablation: str = "full"
    workers: int = 4
    check_premise: bool = False
    fail_fast: bool = False

    def validate(self) -> "Config":
        if self.stride < 1:
            raise ConfigError("stride must be >= 1")
        if self.m < 1:
            raise ConfigError("m must be >= 1")
        if not 0.0 < self.dc_fraction < 1.0:
            raise ConfigError("dc_fraction must be in (0, 1)")
        if self.kernel not in KERNELS:
            raise ConfigError("unknown kernel: %r" % (self.kernel,))
        if self.metric not in METRICS:
            raise ConfigError("unknown metric: %r" % (self.metric,))
        if self.extractor not in EXTRACTORS:
            raise ConfigError("unknown extractor: %r" % (self.extractor,))
        if self.backend not in BACKENDS:
            raise ConfigError("unknown backend: %r" % (self.backend,))
        if self.agg_mode not in AGG_MODES:
            raise ConfigError("unknown agg_mode: %r" % (self.agg_mode,))
        if self.ablation not in ABLATIONS:
            raise ConfigError("unknown ablation: %r" % (self.ablation,))
        if self.tau_d < 0:
            raise ConfigError("tau_d must be >= 0")
        if not 0.0 <= self.tau_c <= 1.0:
            raise ConfigError("tau_c must be in [0, 1]")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.max_retries < 0:
            raise ConfigError("max_retries must be >= 0")
        if self.per_call_usd < 0:
            raise ConfigError("per_call_usd must be >= 0")
        if self.max_image_edge < 1:
            raise ConfigError("max_image_edge must be >= 1")
        if min(self.alpha, self.beta, self.gamma) < 0:
            raise ConfigError("score weights must be >= 0")
        if self.synthetic_fps <= 0:
            raise ConfigError("synthetic_fps must be > 0")
        return self

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)


_FIELD_NAMES = {f.name for f in dataclasses.fields(Config)}


def load_config(
    path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None
) -> Config:
    """Build a Config with precedence: overrides > file values > defaults.

    ``overrides`` entries whose value is None are treated as unset.
    """
    merged: Dict[str, Any] = {}
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError("cannot read config file %s: %s" % (path, exc))
        except json.JSONDecodeError as exc:
            raise ConfigError("config file %s is not valid JSON: %s" % (path, exc))
        if not isinstance(data, dict):
            raise ConfigError("config file must contain a JSON object")
        for key in data:
            if key not in _FIELD_NAMES:
                raise ConfigError("unknown config key: %r" % (key,))
        merged.update(data)
    if overrides:
        for key, value in overrides.items():
            if key not in _FIELD_NAMES:
                raise ConfigError("unknown config key: %r" % (key,))
            if value is not None:
                merged[key] = value
    return Config(**merged).validate()
