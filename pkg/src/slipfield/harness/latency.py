"""Detector step() timing on synthetic marker frames.

Frames are built before the timed region, one fresh snapshot per step, so no
per-frame cache (the mask distance transform) is shared between steps.
"""

from __future__ import annotations

import dataclasses
import time
from dataclasses import dataclass

import numpy as np

from slipfield.detector import SlipDetector
from slipfield.frames import FrameSnapshot, frame_from_markers
from slipfield.harness.config import HarnessConfig
from slipfield.simulator import GelModel


@dataclass(frozen=True)
class LatencyReport:
    n_markers: int
    n_frames: int
    median_ms: float
    p95_ms: float
    max_ms: float
    budget_ms: float
    verdicts: tuple[str, ...]

    @property
    def within_budget(self) -> bool:
        return self.median_ms < self.budget_ms

    def to_json(self) -> dict:
        return {
            "n_markers": self.n_markers,
            "n_frames": self.n_frames,
            "median_ms": self.median_ms,
            "p95_ms": self.p95_ms,
            "max_ms": self.max_ms,
            "budget_ms": self.budget_ms,
            "within_budget": self.within_budget,
        }


def synthetic_frames(model: GelModel, n: int, seed: int = 0, raster=None) -> tuple[FrameSnapshot, list[FrameSnapshot]]:
    """Reference frame plus ``n`` loaded frames with every marker in contact.

    The load is a slowly oscillating twist whose rim lags the interior, so the
    detector exercises the full fit and slip-field path on every frame.
    """
    rng = np.random.default_rng(seed)
    rest = model.rest_grid()
    centre = rest.mean(axis=0)
    rel = rest - centre
    r = np.hypot(rel[:, 0], rel[:, 1])
    reach = r.max()
    flags = np.ones(len(rest), dtype=bool)
    kw = {} if raster is None else {"cfg": raster}
    ref = frame_from_markers(rest, flags, model.geometry, index=0, **kw)
    frames = []
    for i in range(n):
        theta = 0.02 * np.sin(2 * np.pi * i / 50.0)
        shift = 0.15 * np.array([np.cos(i / 17.0), np.sin(i / 23.0)])
        twist = np.column_stack([-rel[:, 1], rel[:, 0]]) * theta
        # rim markers lag the rigid motion
        lag = np.clip((r / reach - 0.8) / 0.2, 0.0, 1.0)[:, None]
        disp = (twist + shift) * (1.0 - 0.6 * lag)
        pos = rest + disp + rng.normal(0.0, model.noise_sigma, rest.shape)
        frames.append(frame_from_markers(pos, flags, model.geometry, index=i + 1, **kw))
    return ref, frames


def bench_latency(cfg: HarnessConfig = HarnessConfig(), model: GelModel | None = None) -> LatencyReport:
    """Median and p95 wall time of ``SlipDetector.step`` over fresh frames.

    Rebases happen as in a live run; their cost is part of ``step``.
    """
    lc = cfg.latency
    model = model or cfg.simulator
    ref, frames = synthetic_frames(model, lc.frames + lc.warmup, lc.seed, cfg.raster)
    det = SlipDetector(cfg.detector)
    det.set_reference(ref)
    times, verdicts = [], []
    for k, frame in enumerate(frames):
        t0 = time.perf_counter()
        decision = det.step(frame)
        dt = (time.perf_counter() - t0) * 1e3
        if k >= lc.warmup:
            times.append(dt)
            verdicts.append(decision.verdict.value)
    t = np.asarray(times)
    return LatencyReport(
        n_markers=len(ref.markers),
        n_frames=len(t),
        median_ms=float(np.median(t)),
        p95_ms=float(np.percentile(t, 95)),
        max_ms=float(t.max()),
        budget_ms=lc.budget_ms,
        verdicts=tuple(verdicts),
    )


def small_patch_model(model: GelModel, rows: int = 10, cols: int = 10) -> GelModel:
    return dataclasses.replace(model, rows=rows, cols=cols)
