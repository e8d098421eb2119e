"""FrameSnapshot: the unit of detector input, built from an image or a marker table."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from slipfield.raster import (
    ContactMask,
    MarkerObservation,
    SensorGeometry,
    contact_mask,
    detect_markers,
    edge_map,
    mask_from_markers,
    mask_membership,
)


@dataclass(frozen=True)
class RasterConfig:
    canny_low: float = 40.0
    canny_high: float = 100.0
    close_radius_px: float = 7.0
    min_component_px: int = 400
    dark_thresh: float = 60.0
    min_blob_px: int = 12
    max_blob_px: int = 400
    # marker-table frames: contact mask = disks of this radius around in-contact markers
    marker_mask_radius_mm: float = 1.0


@dataclass(frozen=True)
class FrameSnapshot:
    markers: tuple[MarkerObservation, ...]
    geometry: SensorGeometry
    mask: ContactMask = field(repr=False)
    index: int = 0
    image: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def n_contact(self) -> int:
        return sum(m.in_contact for m in self.markers)


def frame_from_image(
    img: np.ndarray, geom: SensorGeometry, cfg: RasterConfig = RasterConfig(), index: int = 0
) -> FrameSnapshot:
    edges = edge_map(img, cfg.canny_low, cfg.canny_high)
    mask = contact_mask(edges, cfg.close_radius_px, cfg.min_component_px)
    markers = detect_markers(img, geom, cfg.dark_thresh, cfg.min_blob_px, cfg.max_blob_px)
    markers = mask_membership(markers, mask, geom)
    return FrameSnapshot(tuple(markers), geom, mask, index, img)


def frame_from_markers(
    positions: np.ndarray,
    in_contact: Sequence[bool],
    geom: SensorGeometry,
    cfg: RasterConfig = RasterConfig(),
    index: int = 0,
) -> FrameSnapshot:
    positions = np.asarray(positions, dtype=float).reshape(-1, 2)
    in_contact = np.asarray(in_contact, dtype=bool)
    markers = tuple(
        MarkerObservation((float(x), float(y)), 0, bool(c)) for (x, y), c in zip(positions, in_contact)
    )
    mask = mask_from_markers(positions[in_contact], geom, cfg.marker_mask_radius_mm)
    return FrameSnapshot(markers, geom, mask, index)
