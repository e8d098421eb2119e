"""Detection-accuracy benchmark over simulator trials, reported in a per-object table."""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterable, Optional, Sequence

from slipfield.detector import DetectorConfig, SlipDecision, SlipDetector, Verdict
from slipfield.frames import FrameSnapshot, RasterConfig, frame_from_image, frame_from_markers
from slipfield.harness.config import HarnessConfig
from slipfield.simulator import GelModel, Trial, benchmark_suite, render, simulate

CLASSES = ("success", "false_positive", "false_negative", "indeterminate")
ROW_TITLES = {
    "success": "Success Rate",
    "false_positive": "Failure (False Positives)",
    "false_negative": "Failure (False Negatives)",
    "indeterminate": "Indeterminate",
}


@dataclass(frozen=True)
class TrialOutcome:
    object_name: str
    trial_id: str
    ground_truth: str  # slip | no_slip
    detected: str  # slip | no_slip | indeterminate
    classification: str
    latency: Optional[int] = None  # frames from ground-truth onset to first detection
    kind: str = ""
    force: float = 0.0
    verdicts: tuple[str, ...] = ()
    # mean boundary distance (mm) of the first detection's slipped markers, and of all contact markers
    first_slip_boundary: Optional[float] = None
    contact_boundary: Optional[float] = None
    diagnostic: str = ""


def classify(ground_truth: str, detected: str) -> str:
    if detected == "indeterminate":
        return "indeterminate"
    if detected == "slip" and ground_truth == "no_slip":
        return "false_positive"
    if detected == "no_slip" and ground_truth == "slip":
        return "false_negative"
    return "success"


def run_detector(frames: Iterable[FrameSnapshot], cfg: DetectorConfig = DetectorConfig()) -> list[SlipDecision]:
    """Reference on the first frame, then one decision per frame (first included)."""
    det = SlipDetector(cfg)
    out = []
    for i, frame in enumerate(frames):
        if i == 0:
            det.set_reference(frame)
        out.append(det.step(frame))
    return out


def trial_frames(
    trial: Trial, model: GelModel, raster_cfg: RasterConfig = RasterConfig(), path: str = "markers"
) -> list[FrameSnapshot]:
    gt = simulate(model, trial.object, trial.script, trial.seed)
    if path == "markers":
        return [frame_from_markers(f.positions, f.visible, model.geometry, raster_cfg, f.index) for f in gt]
    if path == "raster":
        return [
            frame_from_image(render(f, model, trial.object, trial.seed), model.geometry, raster_cfg, f.index)
            for f in gt
        ]
    raise ValueError(f"unknown detection path {path!r}")


def outcome_from_decisions(
    trial: Trial, decisions: Sequence[SlipDecision], onset_window: Optional[int] = None
) -> TrialOutcome:
    gt = "slip" if trial.ground_truth_slip else "no_slip"
    onset = trial.onset_frame
    hits = [d.frame for d in decisions if d.verdict == Verdict.INCIPIENT_SLIP]
    if onset_window is not None and onset is not None:
        hits = [h for h in hits if h >= onset - onset_window]
    detected = "slip" if hits else "no_slip"
    latency = hits[0] - onset if hits and onset is not None else None
    first_b = contact_b = None
    first = next((d for d in decisions if d.verdict == Verdict.INCIPIENT_SLIP), None)
    if first is not None and first.slip_field is not None:
        sf = first.slip_field
        first_b = float(sf.boundary_distance[sf.slipped].mean())
        contact_b = float(sf.boundary_distance.mean())
    return TrialOutcome(
        object_name=trial.object.name,
        trial_id=trial.trial_id,
        ground_truth=gt,
        detected=detected,
        classification=classify(gt, detected),
        latency=latency,
        kind=trial.kind,
        force=trial.force,
        verdicts=tuple(d.verdict.value for d in decisions),
        first_slip_boundary=first_b,
        contact_boundary=contact_b,
    )


def evaluate_trial(trial: Trial, cfg: HarnessConfig, path: Optional[str] = None) -> TrialOutcome:
    path = path or cfg.benchmark.path
    try:
        frames = trial_frames(trial, cfg.simulator, cfg.raster, path)
        decisions = run_detector(frames, cfg.detector)
    except (OSError, ValueError) as exc:
        gt = "slip" if trial.ground_truth_slip else "no_slip"
        return TrialOutcome(
            trial.object.name, trial.trial_id, gt, "indeterminate", "indeterminate",
            kind=trial.kind, force=trial.force, diagnostic=f"{type(exc).__name__}: {exc}",
        )
    return outcome_from_decisions(trial, decisions, cfg.benchmark.onset_window)


@dataclass(frozen=True)
class MetricsRow:
    name: str
    n_trials: int
    counts: dict = field(default_factory=dict)

    def rate(self, cls: str) -> float:
        return 100.0 * self.counts.get(cls, 0) / self.n_trials if self.n_trials else 0.0

    @property
    def success_rate(self) -> float:
        return self.rate("success")

    @property
    def fp_rate(self) -> float:
        return self.rate("false_positive")

    @property
    def fn_rate(self) -> float:
        return self.rate("false_negative")

    @property
    def indeterminate_rate(self) -> float:
        return self.rate("indeterminate")


@dataclass(frozen=True)
class MetricsTable:
    rows: tuple[MetricsRow, ...]
    total: MetricsRow

    @classmethod
    def from_outcomes(cls, outcomes: Sequence[TrialOutcome]) -> "MetricsTable":
        names = list(dict.fromkeys(o.object_name for o in outcomes))
        rows = []
        for name in names:
            mine = [o for o in outcomes if o.object_name == name]
            rows.append(MetricsRow(name, len(mine), {c: sum(o.classification == c for o in mine) for c in CLASSES}))
        total = MetricsRow(
            "Total", len(outcomes), {c: sum(o.classification == c for o in outcomes) for c in CLASSES}
        )
        return cls(tuple(rows), total)

    def row(self, name: str) -> MetricsRow:
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)

    def to_csv(self) -> str:
        """Objects as columns, outcome classes as rows, plus a trial-weighted total."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = list(self.rows) + [self.total]
        w.writerow([""] + [r.name for r in cols])
        for c in CLASSES:
            w.writerow([ROW_TITLES[c]] + [f"{r.rate(c):.2f}%" for r in cols])
        w.writerow(["Trials"] + [r.n_trials for r in cols])
        return buf.getvalue()

    def to_json(self) -> dict:
        def one(r: MetricsRow) -> dict:
            return {
                "trials": r.n_trials,
                "success_rate": r.success_rate,
                "fp_rate": r.fp_rate,
                "fn_rate": r.fn_rate,
                "indeterminate_rate": r.indeterminate_rate,
                "counts": dict(r.counts),
            }

        return {"objects": {r.name: one(r) for r in self.rows}, "total": one(self.total)}


def _evaluate_star(args):
    return evaluate_trial(*args)


def run_benchmark(
    cfg: HarnessConfig = HarnessConfig(), trials: Optional[Sequence[Trial]] = None
) -> tuple[MetricsTable, list[TrialOutcome]]:
    """Run the detector over every trial; any IncipientSlip frame counts as a detected slip."""
    if trials is None:
        trials = benchmark_suite(cfg.benchmark.seed, cfg.simulator)
    jobs = [(t, cfg) for t in trials]
    if cfg.benchmark.jobs > 1:
        with ProcessPoolExecutor(cfg.benchmark.jobs) as pool:
            outcomes = list(pool.map(_evaluate_star, jobs, chunksize=4))
    else:
        outcomes = [_evaluate_star(j) for j in jobs]
    return MetricsTable.from_outcomes(outcomes), outcomes


def outcomes_to_jsonl(outcomes: Sequence[TrialOutcome]) -> str:
    return "".join(json.dumps(asdict(o)) + "\n" for o in outcomes)
