"""Inner-region selection and least-squares planar rigid fit."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from slipfield.geometry import RigidMotion2D, propagate_velocity
from slipfield.raster import ContactMask, SensorGeometry, erode_mask
from slipfield.tracking import DisplacementField

MIN_INNER_MARKERS = 6
SPREAD_TOL = 1e-6


class InsufficientInnerRegion(Exception):
    """Too few in-contact markers survive erosion to fit a rigid motion."""


class DegenerateConfiguration(Exception):
    """Inner markers are (nearly) collinear, so rotation is unobservable."""


@dataclass(frozen=True)
class InnerSelection:
    inner_ids: np.ndarray
    index: np.ndarray  # positions of the inner markers within the field
    erosion_radius: float
    centroid: np.ndarray


@dataclass(frozen=True)
class RigidFitResult:
    motion: RigidMotion2D
    rms_residual: float
    n_points: int


def select_inner(
    field: DisplacementField,
    mask: ContactMask,
    geom: SensorGeometry,
    erosion_radius: float = 3.0,
    min_inner_markers: int = MIN_INNER_MARKERS,
) -> InnerSelection:
    """In-contact markers lying inside the contact mask eroded by ``erosion_radius`` mm.

    Membership is tested at each marker's current position, since the mask
    belongs to the current frame.
    """
    if erosion_radius < 0:
        raise ValueError("erosion_radius must be non-negative")
    if erosion_radius == 0:
        keep = field.in_contact.copy()
    else:
        eroded = erode_mask(mask, erosion_radius / geom.mm_per_px)
        uv = np.rint(geom.mm_to_px(field.cur_pos)).astype(int).reshape(-1, 2)
        u = np.clip(uv[:, 0], 0, geom.width_px - 1)
        v = np.clip(uv[:, 1], 0, geom.height_px - 1)
        keep = field.in_contact & eroded.bits[v, u]
    index = np.flatnonzero(keep)
    if len(index) < min_inner_markers:
        raise InsufficientInnerRegion(
            f"{len(index)} inner markers after {erosion_radius} mm erosion, need {min_inner_markers}"
        )
    return InnerSelection(
        inner_ids=field.marker_id[index],
        index=index,
        erosion_radius=float(erosion_radius),
        centroid=field.ref_pos[index].mean(axis=0),
    )


def observability_spread(points) -> float:
    """Second singular value of the centred point set (mm)."""
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(p) < 2:
        raise ValueError("need at least two points")
    s = np.linalg.svd(p - p.mean(axis=0), compute_uv=False)
    return float(s[1])


def procrustes_angle(a: np.ndarray, b: np.ndarray) -> float:
    """Rotation best mapping centred points ``a`` onto centred points ``b``."""
    cross = np.sum(a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0])
    dot = np.sum(a[:, 0] * b[:, 0] + a[:, 1] * b[:, 1])
    return float(np.arctan2(cross, dot))


def fit_rigid(
    field: DisplacementField,
    inner: InnerSelection,
    min_inner_markers: int = MIN_INNER_MARKERS,
    spread_tol: float = SPREAD_TOL,
) -> RigidFitResult:
    """Closed-form 2D rigid least squares from reference to current positions.

    The reference point is the inner centroid and its velocity the mean
    displacement; the angle comes from the cross/dot closed form. The RMS
    residual is measured against the linearised (small-angle) field.
    """
    idx = inner.index
    if len(idx) < min_inner_markers:
        raise InsufficientInnerRegion(f"{len(idx)} inner markers, need {min_inner_markers}")
    ref = field.ref_pos[idx]
    cur = field.cur_pos[idx]
    ca = ref.mean(axis=0)
    cb = cur.mean(axis=0)
    a = ref - ca
    spread = np.linalg.svd(a, compute_uv=False)[1]
    if spread < spread_tol:
        raise DegenerateConfiguration(f"inner spread {spread:.3g} mm below {spread_tol}")
    theta = procrustes_angle(a, cur - cb)
    motion = RigidMotion2D(tuple(ca), tuple(cb - ca), theta)
    resid = (cur - ref) - propagate_velocity(motion, ref)
    rms = float(np.sqrt(np.mean(np.sum(resid * resid, axis=1))))
    return RigidFitResult(motion, rms, len(idx))
