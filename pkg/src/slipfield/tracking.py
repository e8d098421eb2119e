"""Reference-to-current marker correspondence and the measured displacement field."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

from slipfield.raster import MarkerObservation


@dataclass(frozen=True)
class Correspondence:
    pairs: np.ndarray  # (n, 2) int: (ref_index, cur_index), sorted by ref_index
    unmatched_ref: np.ndarray
    unmatched_cur: np.ndarray

    @property
    def match_fraction(self) -> float:
        total = len(self.pairs) + len(self.unmatched_ref)
        return len(self.pairs) / total if total else 1.0


@dataclass(frozen=True)
class DisplacementField:
    marker_id: np.ndarray
    ref_pos: np.ndarray
    cur_pos: np.ndarray
    in_contact: np.ndarray
    inner: np.ndarray = field(default=None)

    def __post_init__(self):
        n = len(self.marker_id)
        if self.inner is None:
            object.__setattr__(self, "inner", np.zeros(n, dtype=bool))
        if len(np.unique(self.marker_id)) != n:
            raise ValueError("marker ids in a displacement field must be unique")

    @property
    def disp(self) -> np.ndarray:
        return self.cur_pos - self.ref_pos

    def __len__(self) -> int:
        return len(self.marker_id)

    @classmethod
    def empty(cls) -> "DisplacementField":
        z = np.zeros((0, 2))
        return cls(np.zeros(0, dtype=int), z, z.copy(), np.zeros(0, dtype=bool))


def positions(markers: Sequence[MarkerObservation]) -> np.ndarray:
    if len(markers) == 0:
        return np.zeros((0, 2))
    return np.array([m.position for m in markers], dtype=float)


def _nearest(tree: cKDTree, pts: np.ndarray, n_tree: int) -> tuple[np.ndarray, np.ndarray]:
    """Nearest neighbour index and distance, ties broken by lowest index."""
    if n_tree == 1:
        d, j = tree.query(pts, k=1)
        return np.atleast_1d(j), np.atleast_1d(d)
    d, j = tree.query(pts, k=2)
    tie = d[:, 0] == d[:, 1]
    best = j[:, 0].copy()
    best[tie] = np.minimum(j[tie, 0], j[tie, 1])
    return best, d[:, 0]


def match_markers(
    ref: Sequence[MarkerObservation] | np.ndarray,
    cur: Sequence[MarkerObservation] | np.ndarray,
    max_match_radius: float = 0.7,
) -> Correspondence:
    """Mutual-nearest-neighbour matching within ``max_match_radius`` (mm)."""
    if max_match_radius <= 0:
        raise ValueError("max_match_radius must be positive")
    a = ref if isinstance(ref, np.ndarray) else positions(ref)
    b = cur if isinstance(cur, np.ndarray) else positions(cur)
    a = a.reshape(-1, 2)
    b = b.reshape(-1, 2)
    if len(a) == 0 or len(b) == 0:
        return Correspondence(np.zeros((0, 2), dtype=int), np.arange(len(a)), np.arange(len(b)))
    fwd, dist = _nearest(cKDTree(b), a, len(b))
    back, _ = _nearest(cKDTree(a), b, len(a))
    ia = np.arange(len(a))
    ok = (back[fwd] == ia) & (dist <= max_match_radius)
    pairs = np.column_stack([ia[ok], fwd[ok]]).astype(int)
    used_cur = np.zeros(len(b), dtype=bool)
    used_cur[pairs[:, 1]] = True
    return Correspondence(pairs, ia[~ok], np.flatnonzero(~used_cur))


def displacement_field(
    corr: Correspondence,
    ref: Sequence[MarkerObservation],
    cur: Sequence[MarkerObservation],
) -> DisplacementField:
    """One entry per matched pair; ids from the reference, contact flags from the current frame."""
    if len(corr.pairs) == 0:
        return DisplacementField.empty()
    ri, ci = corr.pairs[:, 0], corr.pairs[:, 1]
    ids = np.array([ref[i].id for i in ri], dtype=int)
    if np.all(ids == 0):
        ids = ri.copy()
    return DisplacementField(
        marker_id=ids,
        ref_pos=positions([ref[i] for i in ri]),
        cur_pos=positions([cur[j] for j in ci]),
        in_contact=np.array([cur[j].in_contact for j in ci], dtype=bool),
    )
