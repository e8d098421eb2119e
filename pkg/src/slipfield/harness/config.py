"""Harness configuration: dataclass defaults, overridable from an INI-style file.

Sections map onto the dataclasses below::

    [detector]
    slip_threshold = 0.3

    [benchmark]
    seed = 3
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from slipfield.detector import DetectorConfig
from slipfield.frames import RasterConfig
from slipfield.raster import SensorGeometry
from slipfield.simulator import GelModel


@dataclass(frozen=True)
class BenchmarkConfig:
    seed: int = 0
    path: str = "markers"  # "markers" or "raster"
    onset_window: Optional[int] = None
    jobs: int = 1


@dataclass(frozen=True)
class ControlConfig:
    seed: int = 0
    force_min: float = 10.0
    force_step: float = 10.0
    force_max: float = 60.0
    pause_frames: int = 3
    max_frames: int = 400
    # screwing: thread resistance torque grows by this much per frame of motion (N*mm)
    screw_load_rate: float = 3.0
    # unscrewing: breakaway torque, its ramp rate, and the running torque afterwards (N*mm)
    unscrew_breakaway: float = 400.0
    unscrew_load_rate: float = 40.0
    unscrew_running_load: float = 30.0
    unscrew_dwell: int = 60
    slide_step: float = 0.1
    mu: float = 0.8
    p0: float = 0.5


@dataclass(frozen=True)
class LatencyConfig:
    frames: int = 1000
    warmup: int = 20
    seed: int = 0
    budget_ms: float = 1000.0 / 24.0


@dataclass(frozen=True)
class HarnessConfig:
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    raster: RasterConfig = field(default_factory=RasterConfig)
    geometry: SensorGeometry = field(default_factory=SensorGeometry)
    simulator: GelModel = field(default_factory=GelModel)
    benchmark: BenchmarkConfig = field(default_factory=BenchmarkConfig)
    control: ControlConfig = field(default_factory=ControlConfig)
    latency: LatencyConfig = field(default_factory=LatencyConfig)

    def __post_init__(self):
        if self.simulator.geometry != self.geometry:
            object.__setattr__(self, "simulator", dataclasses.replace(self.simulator, geometry=self.geometry))


def _coerce(value: str, default):
    if isinstance(default, bool):
        v = value.strip().lower()
        if v in ("1", "true", "yes", "on"):
            return True
        if v in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {value!r}")
    if isinstance(default, int):
        return int(value)
    if isinstance(default, float):
        return float(value)
    if default is None:
        v = value.strip()
        if v.lower() in ("", "none"):
            return None
        try:
            return int(v)
        except ValueError:
            return float(v)
    return value.strip()


def _override(obj, items: dict, section: str):
    names = {f.name: f for f in dataclasses.fields(obj)}
    changes = {}
    for key, raw in items.items():
        if key not in names:
            raise ValueError(f"unknown key {key!r} in section [{section}]")
        current = getattr(obj, key)
        if dataclasses.is_dataclass(current):
            raise ValueError(f"[{section}] {key} is a nested section, not a value")
        changes[key] = _coerce(raw, current)
    return dataclasses.replace(obj, **changes)


def load_config(path: str | Path | None = None, text: str | None = None) -> HarnessConfig:
    cfg = HarnessConfig()
    if path is None and text is None:
        return cfg
    parser = configparser.ConfigParser()
    if path is not None:
        with open(path) as fh:
            parser.read_file(fh)
    else:
        parser.read_string(text)
    changes = {}
    for section in parser.sections():
        if section not in {f.name for f in dataclasses.fields(cfg)}:
            raise ValueError(f"unknown config section [{section}]")
        changes[section] = _override(getattr(cfg, section), dict(parser[section]), section)
    if "geometry" in changes and "simulator" not in changes:
        changes["simulator"] = dataclasses.replace(cfg.simulator, geometry=changes["geometry"])
    elif "simulator" in changes:
        changes["simulator"] = dataclasses.replace(changes["simulator"], geometry=changes.get("geometry", cfg.geometry))
    return dataclasses.replace(cfg, **changes)
