"""Toolkit configuration: every tunable in one JSON-serializable object.

A config file is a JSON document whose keys override the defaults below; the
resolved config is embedded in every results document.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .errors import ParseError
from .signal import FRAME_MS, HarmonicConfig, VoicingConfig


@dataclass(frozen=True)
class Config:
    frame_ms: float = FRAME_MS
    voicing: VoicingConfig = field(default_factory=VoicingConfig)
    harmonics: HarmonicConfig = field(default_factory=HarmonicConfig)
    min_hours: float = 6.0
    min_voiced_frames: int = 6000
    max_retries: int = 100
    window_redraws: int = 10
    folds: int = 10
    l2_lambda: float = 1e-4
    tol: float = 1e-8
    max_iter: int = 500
    max_days: int = 7
    total_hours: float = 6.0
    exp1_reps: int = 10
    exp2_reps: int = 1000
    null_reps: int = 5000
    null_distribution: str = "normal"
    power_bracket: tuple = (-6.0, -0.01)
    gain_thresholds: tuple = (1.0, 0.5)

    @property
    def model_kw(self) -> dict:
        return {"l2_lambda": self.l2_lambda, "tol": self.tol, "max_iter": self.max_iter}

    def to_dict(self) -> dict:
        d = asdict(self)
        d["power_bracket"] = list(self.power_bracket)
        d["gain_thresholds"] = list(self.gain_thresholds)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Config":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ParseError(f"unknown config keys: {sorted(unknown)}")
        d = dict(d)
        if "voicing" in d:
            d["voicing"] = VoicingConfig(**d["voicing"])
        if "harmonics" in d:
            d["harmonics"] = HarmonicConfig(**d["harmonics"])
        for key in ("power_bracket", "gain_thresholds"):
            if key in d:
                d[key] = tuple(d[key])
        return replace(cls(), **d)


DEFAULT_CONFIG = Config()


def load_config(path) -> Config:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ParseError("config must be a JSON object")
    try:
        return Config.from_dict(data)
    except TypeError as exc:
        raise ParseError(f"bad config value: {exc}") from exc
