"""Closed-loop grip-force control driven by incipient-slip events (cap screwing/unscrewing).

The gripper holds a cap against a torque about the patch centre. The torque ramps while the
gripper turns; on every IncipientSlip verdict the controller pauses, adds a
fixed force step and resumes. Screwing stops once the force cap is reached;
unscrewing stops after the cap breaks free and a slip-free dwell elapses.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from slipfield.detector import SlipDetector, Verdict
from slipfield.frames import frame_from_markers
from slipfield.harness.config import ControlConfig, HarnessConfig
from slipfield.simulator import GelModel, GelSimulator, ObjectSpec

SCENARIOS = ("screw", "unscrew")


def cap_object(cfg: ControlConfig) -> ObjectSpec:
    # side contact on a bottle cap: a dome-loaded strip
    return ObjectSpec("bottle_cap", "rectangle", (16.0, 12.0), "dome", cfg.p0, cfg.mu, 0.8)


@dataclass
class GripControllerState:
    force: float = 10.0
    force_min: float = 10.0
    force_step: float = 10.0
    force_max: float = 60.0
    phase: str = "screwing"
    slip_event_log: list = field(default_factory=list)

    def on_slip(self, frame: int) -> float:
        """Register a slip event and step the grip force, saturating at the maximum."""
        before = self.force
        self.force = min(self.force + self.force_step, self.force_max)
        self.slip_event_log.append({"frame": frame, "force_before": before, "force_after": self.force})
        return self.force

    @property
    def at_max(self) -> bool:
        return self.force >= self.force_max


@dataclass(frozen=True)
class ControlRun:
    scenario: str
    force_trace: tuple[float, ...]
    load_trace: tuple[float, ...]
    verdicts: tuple[str, ...]
    events: tuple[dict, ...]
    termination: str  # max_force | released | stalled

    @property
    def n_frames(self) -> int:
        return len(self.force_trace)

    @property
    def final_force(self) -> float:
        return self.force_trace[-1]

    @property
    def stalled(self) -> bool:
        return self.termination == "stalled"

    def to_json(self) -> dict:
        return {
            "scenario": self.scenario,
            "termination": self.termination,
            "force_trace": list(self.force_trace),
            "load_trace": list(self.load_trace),
            "verdicts": list(self.verdicts),
            "events": list(self.events),
        }


def torque_capacity(sim: GelSimulator, force: float) -> float:
    """Largest torque (N*mm) about the patch centre that friction can resist."""
    contact, p, _ = sim.caps(force)
    r = np.hypot(*(sim.rest - sim.center).T)
    return sim.obj.mu * float((p * r)[contact].sum())


def equilibrium_angle(sim: GelSimulator, load: float, force: float, previous: float, slide_step: float):
    """Object rotation (rad) about the patch centre at which the gel carries torque ``load``.

    Returns ``(angle, gross)``. When the load reaches the friction capacity the
    object turns by ``slide_step`` mm at the patch rim per frame and ``gross``
    is True.
    """
    k = sim.model.shear_stiffness
    rel = sim.rest - sim.center
    contact, _, _ = sim.caps(force)
    reach = float(np.hypot(*rel[contact].T).max()) if contact.any() else 1.0
    if load >= torque_capacity(sim, force):
        return previous + slide_step / reach, True

    def carried(angle: float) -> float:
        u = sim.solve((0.0, 0.0), angle, force)[0]
        return k * float(np.sum(rel[:, 0] * u[:, 1] - rel[:, 1] * u[:, 0]))

    step = 1.0 / reach
    lo, hi = previous - step, previous + step
    for _ in range(100):
        if carried(lo) <= load:
            break
        lo -= step
    for _ in range(100):
        if carried(hi) >= load:
            break
        hi += step
    else:
        return previous + slide_step / reach, True
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        if carried(mid) < load:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi), False


def run_control_loop(
    scenario: str,
    cfg: HarnessConfig = HarnessConfig(),
    obj: Optional[ObjectSpec] = None,
) -> ControlRun:
    if scenario not in SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r}; expected one of {SCENARIOS}")
    cc = cfg.control
    model: GelModel = cfg.simulator
    obj = obj or cap_object(cc)
    sim = GelSimulator(model, obj, cc.seed)
    det = SlipDetector(cfg.detector)
    ctrl = GripControllerState(
        force=cc.force_min,
        force_min=cc.force_min,
        force_step=cc.force_step,
        force_max=cc.force_max,
        phase="screwing" if scenario == "screw" else "unscrewing",
    )
    load, angle = 0.0, 0.0
    pause = 0
    broken_free = False
    dwell = 0
    termination = "stalled"
    forces, loads, verdicts = [], [], []
    # grasp: contact closes at zero load and becomes the reference
    gt = sim.advance((0.0, 0.0), 0.0, ctrl.force)
    snap = frame_from_markers(gt.positions, gt.visible, model.geometry, cfg.raster, 0)
    det.set_reference(snap)
    forces.append(ctrl.force)
    loads.append(load)
    verdicts.append(det.step(snap).verdict.value)
    for frame in range(1, cc.max_frames):
        if pause > 0:
            pause -= 1
        elif scenario == "screw":
            load += cc.screw_load_rate
        elif not broken_free:
            load += cc.unscrew_load_rate
            if load >= cc.unscrew_breakaway:
                broken_free = True
                load = cc.unscrew_running_load
        angle, _ = equilibrium_angle(sim, load, ctrl.force, angle, cc.slide_step)
        gt = sim.advance((0.0, 0.0), angle, ctrl.force)
        snap = frame_from_markers(gt.positions, gt.visible, model.geometry, cfg.raster, frame)
        decision = det.step(snap)
        forces.append(ctrl.force)
        loads.append(load)
        verdicts.append(decision.verdict.value)

        if scenario == "screw" and ctrl.at_max:
            termination = "max_force"
            break
        if decision.verdict == Verdict.INCIPIENT_SLIP:
            if ctrl.at_max:
                termination = "max_force"
                break
            ctrl.on_slip(frame)
            pause = cc.pause_frames
            dwell = 0
        elif broken_free:
            dwell += 1
            if dwell >= cc.unscrew_dwell:
                termination = "released"
                break
    return ControlRun(
        scenario=scenario,
        force_trace=tuple(forces),
        load_trace=tuple(loads),
        verdicts=tuple(verdicts),
        events=tuple(ctrl.slip_event_log),
        termination=termination,
    )
