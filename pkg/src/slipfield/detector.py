"""Incipient-slip detection: rigid prediction vs measured field, with reference rebasing."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from slipfield.frames import FrameSnapshot
from slipfield.geometry import OMEGA_EPSILON, RigidMotion2D, icr, propagate_velocity
from slipfield.raster import ContactMask, SensorGeometry, boundary_distance_px
from slipfield.rigidfit import (
    DegenerateConfiguration,
    InsufficientInnerRegion,
    RigidFitResult,
    fit_rigid,
    select_inner,
)
from slipfield.tracking import DisplacementField, displacement_field, match_markers


class ConfigurationError(Exception):
    pass


class Verdict(str, enum.Enum):
    NO_CONTACT = "NoContact"
    INDETERMINATE = "Indeterminate"
    NO_SLIP = "NoSlip"
    INCIPIENT_SLIP = "IncipientSlip"


@dataclass(frozen=True)
class DetectorConfig:
    slip_threshold: float = 0.26
    min_slipped_markers: int = 3
    erosion_radius: float = 3.0
    min_inner_markers: int = 6
    min_contact_markers: int = 12
    max_match_radius: float = 0.7
    marker_pitch: float = 1.5
    omega_epsilon: float = OMEGA_EPSILON
    spread_tol: float = 1e-6

    def __post_init__(self):
        for name in ("slip_threshold", "min_slipped_markers", "erosion_radius", "min_inner_markers",
                     "min_contact_markers", "max_match_radius", "marker_pitch"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.max_match_radius >= self.marker_pitch / 2:
            raise ValueError("max_match_radius must stay below half the marker pitch")


@dataclass(frozen=True)
class SlipField:
    marker_id: np.ndarray
    ref_pos: np.ndarray
    real_disp: np.ndarray
    est_disp: np.ndarray
    slipped: np.ndarray
    boundary_distance: np.ndarray

    @property
    def residual(self) -> np.ndarray:
        return self.real_disp - self.est_disp

    @property
    def residual_norm(self) -> np.ndarray:
        return np.linalg.norm(self.residual, axis=1)

    def __len__(self) -> int:
        return len(self.marker_id)


@dataclass(frozen=True)
class SlipDecision:
    frame: int
    verdict: Verdict
    slipped_ids: tuple[int, ...] = ()
    motion: Optional[RigidMotion2D] = None
    icr_point: Optional[tuple[float, float]] = None
    rebased: bool = False
    n_contact: int = 0
    n_inner: int = 0
    rms_residual: Optional[float] = None
    slip_field: Optional[SlipField] = field(default=None, repr=False, compare=False)

    def to_record(self) -> dict:
        """JSON-lines decision record."""
        m = self.motion
        return {
            "frame": self.frame,
            "verdict": self.verdict.value,
            "slipped_ids": [int(i) for i in self.slipped_ids],
            "omega": m.angular_velocity if m else None,
            "vx": m.linear_velocity[0] if m else None,
            "vy": m.linear_velocity[1] if m else None,
            "icr": list(self.icr_point) if self.icr_point is not None else None,
            "rebased": self.rebased,
            "n_contact": self.n_contact,
            "n_inner": self.n_inner,
            "rms_residual": self.rms_residual,
        }


def estimate_field(motion: RigidMotion2D, field: DisplacementField) -> np.ndarray:
    """Rigid-motion prediction of every in-contact marker's displacement."""
    return propagate_velocity(motion, field.ref_pos[field.in_contact])


def slip_field(
    real: DisplacementField,
    est: np.ndarray,
    cfg: DetectorConfig,
    mask: ContactMask,
    geom: SensorGeometry,
) -> SlipField:
    idx = np.flatnonzero(real.in_contact)
    if len(est) != len(idx):
        raise ValueError("estimated field does not cover the in-contact markers")
    real_disp = real.disp[idx]
    resid = real_disp - est
    dist = boundary_distance_px(mask)
    uv = np.rint(geom.mm_to_px(real.cur_pos[idx])).astype(int).reshape(-1, 2)
    u = np.clip(uv[:, 0], 0, geom.width_px - 1)
    v = np.clip(uv[:, 1], 0, geom.height_px - 1)
    return SlipField(
        marker_id=real.marker_id[idx],
        ref_pos=real.ref_pos[idx],
        real_disp=real_disp,
        est_disp=np.asarray(est, dtype=float).reshape(-1, 2),
        slipped=np.linalg.norm(resid, axis=1) > cfg.slip_threshold,
        boundary_distance=dist[v, u] * geom.mm_per_px,
    )


@dataclass
class DetectorState:
    reference: Optional[FrameSnapshot] = None
    frame_index: int = 0
    next_id: int = 1


class SlipDetector:
    """Stateful per-sensor detector; ``step`` must be called serially."""

    def __init__(self, cfg: DetectorConfig = DetectorConfig(), state: Optional[DetectorState] = None):
        self.cfg = cfg
        self.state = state if state is not None else DetectorState()

    def set_reference(self, frame: FrameSnapshot) -> None:
        """Store ``frame`` as the baseline; fresh marker ids are assigned.

        The global frame index keeps counting across reference changes.
        """
        st = self.state
        markers = tuple(replace(m, id=st.next_id + i) for i, m in enumerate(frame.markers))
        st.next_id += len(markers)
        st.reference = replace(frame, markers=markers)

    def _rebase(self, frame: FrameSnapshot, pairs: np.ndarray) -> None:
        st = self.state
        ids = np.zeros(len(frame.markers), dtype=int)
        ref_ids = np.array([m.id for m in st.reference.markers], dtype=int)
        if len(pairs):
            ids[pairs[:, 1]] = ref_ids[pairs[:, 0]]
        fresh = np.flatnonzero(ids == 0)
        ids[fresh] = st.next_id + np.arange(len(fresh))
        st.next_id += len(fresh)
        markers = tuple(replace(m, id=int(i)) for m, i in zip(frame.markers, ids))
        # single assignment keeps the swap atomic
        st.reference = replace(frame, markers=markers)

    def step(self, frame: FrameSnapshot) -> SlipDecision:
        cfg, st = self.cfg, self.state
        if st.reference is None:
            raise ConfigurationError("set_reference must be called before step")
        if frame.geometry != st.reference.geometry:
            raise ConfigurationError("frame geometry differs from reference geometry")
        index = st.frame_index
        st.frame_index += 1

        n_contact = frame.n_contact
        if n_contact < cfg.min_contact_markers:
            return SlipDecision(index, Verdict.NO_CONTACT, n_contact=n_contact)

        ref = st.reference.markers
        corr = match_markers(ref, frame.markers, cfg.max_match_radius)
        disp = displacement_field(corr, ref, frame.markers)
        try:
            inner = select_inner(disp, frame.mask, frame.geometry, cfg.erosion_radius, cfg.min_inner_markers)
            fit: RigidFitResult = fit_rigid(disp, inner, cfg.min_inner_markers, cfg.spread_tol)
        except (InsufficientInnerRegion, DegenerateConfiguration):
            return SlipDecision(index, Verdict.INDETERMINATE, n_contact=n_contact)

        est = estimate_field(fit.motion, disp)
        sf = slip_field(disp, est, cfg, frame.mask, frame.geometry)
        slipped_ids = tuple(int(i) for i in sf.marker_id[sf.slipped])
        c = icr(fit.motion, cfg.omega_epsilon)
        slip = len(slipped_ids) >= cfg.min_slipped_markers
        if slip:
            self._rebase(frame, corr.pairs)
        return SlipDecision(
            frame=index,
            verdict=Verdict.INCIPIENT_SLIP if slip else Verdict.NO_SLIP,
            slipped_ids=slipped_ids,
            motion=fit.motion,
            icr_point=None if c is None else (float(c[0]), float(c[1])),
            rebased=slip,
            n_contact=n_contact,
            n_inner=fit.n_points,
            rms_residual=fit.rms_residual,
            slip_field=sf,
        )


def step(state: DetectorState, frame: FrameSnapshot, cfg: DetectorConfig = DetectorConfig()) -> SlipDecision:
    return SlipDetector(cfg, state).step(frame)


def set_reference(state: DetectorState, frame: FrameSnapshot) -> None:
    SlipDetector(DetectorConfig(), state).set_reference(frame)
