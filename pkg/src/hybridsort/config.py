"""Tracker configuration and its on-disk JSON form."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .geometry import ROCM_ANCHORS
from .kalman import NoiseConfig

SCHEMA_VERSION = 1

TRACKERS = ("hybrid_sort", "sort", "byte_two_stage")
SIMILARITIES = ("iou", "hmiou", "wmiou")
CONFIDENCE_MODELS = ("kalman", "linear")
# Boolean feature switches addressable as ``--toggle name=on|off``.
TOGGLES = ("tcm", "hmiou", "wmiou", "rocm", "appearance", "byte", "ocr")


@dataclass(frozen=True)
class TrackerConfig:
    tracker: str = "hybrid_sort"
    lambda_velocity: float = 0.2
    lambda_conf_stage1: float = 1.5
    lambda_conf_stage2: float = 1.0
    lambda_appearance: float = 1.0
    high_threshold: float = 0.6
    low_threshold: float = 0.1
    gate: float = 0.15
    min_hits: int = 3
    max_age: int = 30
    ema_momentum: float = 0.9
    observation_ring: int = 5
    tcm: bool = True
    rocm: bool = True
    appearance: bool = False
    byte: bool = True
    ocr: bool = True
    similarity: str = "hmiou"
    stage1_confidence: str = "kalman"
    stage2_confidence: str = "linear"
    rocm_anchor: str = "newest"
    noise: NoiseConfig = field(default_factory=NoiseConfig)

    def __post_init__(self):
        if self.tracker not in TRACKERS:
            raise ValueError(f"unknown tracker {self.tracker!r}; expected one of {TRACKERS}")
        if self.similarity not in SIMILARITIES:
            raise ValueError(f"unknown similarity {self.similarity!r}")
        if self.rocm_anchor not in ROCM_ANCHORS:
            raise ValueError(f"rocm_anchor must be one of {ROCM_ANCHORS}")
        for name in ("stage1_confidence", "stage2_confidence"):
            if getattr(self, name) not in CONFIDENCE_MODELS:
                raise ValueError(f"{name} must be one of {CONFIDENCE_MODELS}")
        if not 0.0 <= self.low_threshold < self.high_threshold <= 1.0:
            raise ValueError("need 0 <= low_threshold < high_threshold <= 1")
        for name in ("lambda_velocity", "lambda_conf_stage1", "lambda_conf_stage2", "lambda_appearance", "gate"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.min_hits < 1 or self.max_age < 0:
            raise ValueError("min_hits must be >= 1 and max_age >= 0")
        if not 0.0 <= self.ema_momentum <= 1.0:
            raise ValueError("ema_momentum must lie in [0, 1]")
        if self.observation_ring < 4:
            raise ValueError("observation_ring must hold at least 4 boxes")

    def replace(self, **changes) -> "TrackerConfig":
        return dataclasses.replace(self, **changes)

    def with_toggle(self, name: str, on: bool) -> "TrackerConfig":
        """Flip one named feature. ``hmiou``/``wmiou`` select the similarity."""
        if name not in TOGGLES:
            raise ValueError(f"unknown toggle {name!r}; expected one of {TOGGLES}")
        if name in ("hmiou", "wmiou"):
            if on:
                return self.replace(similarity=name)
            return self.replace(similarity="iou") if self.similarity == name else self
        return self.replace(**{name: on})

    def all_off(self) -> "TrackerConfig":
        return self.replace(tcm=False, rocm=False, appearance=False, byte=False, ocr=False, similarity="iou")

    def to_dict(self) -> dict[str, Any]:
        d = {f.name: getattr(self, f.name) for f in dataclasses.fields(self) if f.name != "noise"}
        d["noise"] = self.noise.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "TrackerConfig":
        d = dict(d)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown tracker config keys: {sorted(unknown)}")
        if "noise" in d:
            d["noise"] = NoiseConfig.from_dict(d["noise"])
        return cls(**d)


def save_config(path, tracker: TrackerConfig, scenario=None) -> None:
    doc: dict[str, Any] = {"schema_version": SCHEMA_VERSION, "tracker": tracker.to_dict()}
    if scenario is not None:
        doc["scenario"] = scenario.to_dict()
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def config_from_doc(doc: dict[str, Any], source: str = "config") -> dict[str, Any]:
    """Parse a config document. A run manifest is accepted; its ``config`` section is used."""
    from .simulator import ScenarioSpec

    if isinstance(doc, dict) and "manifest_version" in doc:
        doc = doc.get("config", {})
    if not isinstance(doc, dict):
        raise ValueError(f"{source}: expected a JSON object")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ValueError(f"{source}: unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")
    extra = set(doc) - {"schema_version", "tracker", "scenario"}
    if extra:
        raise ValueError(f"{source}: unknown top-level keys {sorted(extra)}")
    tracker = TrackerConfig.from_dict(doc.get("tracker", {}))
    scenario = ScenarioSpec.from_dict(doc["scenario"]) if "scenario" in doc else None
    return {"tracker": tracker, "scenario": scenario}


def load_config(path) -> dict[str, Any]:
    """Read a config file into ``{'tracker': TrackerConfig, 'scenario': ScenarioSpec | None}``."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: not valid JSON ({exc})") from None
    return config_from_doc(doc, str(path))
