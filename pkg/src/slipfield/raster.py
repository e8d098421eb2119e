"""Contact-region masking and marker localisation on grayscale tactile images.

Images are ``uint8`` arrays of shape ``(height, width)``, row 0 at the top.
Pixel ``(u, v)`` = (column, row) addresses the pixel centre. Marker positions
leave this module in millimetres in the y-up sensor frame.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import cv2
import numpy as np
from scipy import ndimage

EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class SensorGeometry:
    width_px: int = 640
    height_px: int = 480
    width_mm: float = 40.0
    height_mm: float = 30.0

    def __post_init__(self):
        if min(self.width_px, self.height_px) <= 0 or min(self.width_mm, self.height_mm) <= 0:
            raise ValueError(f"sensor dimensions must be positive: {self}")
        ratio = self.pitch_x / self.pitch_y
        if not 1 / 1.2 <= ratio <= 1.2:
            raise ValueError(f"pixel pitch anisotropy {ratio:.3f} outside 20% tolerance")

    @property
    def pitch_x(self) -> float:
        return self.width_mm / self.width_px

    @property
    def pitch_y(self) -> float:
        return self.height_mm / self.height_px

    @property
    def mm_per_px(self) -> float:
        return 0.5 * (self.pitch_x + self.pitch_y)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height_px, self.width_px)

    def px_to_mm(self, uv) -> np.ndarray:
        uv = np.asarray(uv, dtype=float)
        out = np.empty_like(uv)
        out[..., 0] = (uv[..., 0] + 0.5) * self.pitch_x
        out[..., 1] = self.height_mm - (uv[..., 1] + 0.5) * self.pitch_y
        return out

    def mm_to_px(self, xy) -> np.ndarray:
        xy = np.asarray(xy, dtype=float)
        out = np.empty_like(xy)
        out[..., 0] = xy[..., 0] / self.pitch_x - 0.5
        out[..., 1] = (self.height_mm - xy[..., 1]) / self.pitch_y - 0.5
        return out

    def contains_mm(self, xy) -> np.ndarray:
        xy = np.asarray(xy, dtype=float)
        return (
            (xy[..., 0] >= 0)
            & (xy[..., 0] <= self.width_mm)
            & (xy[..., 1] >= 0)
            & (xy[..., 1] <= self.height_mm)
        )


@dataclass(frozen=True)
class ContactMask:
    bits: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "bits", np.ascontiguousarray(self.bits, dtype=bool))

    @classmethod
    def empty(cls, geom: SensorGeometry) -> "ContactMask":
        return cls(np.zeros(geom.shape, dtype=bool))

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def area_px(self) -> int:
        return int(np.count_nonzero(self.bits))

    def matches(self, geom: SensorGeometry) -> bool:
        return self.bits.shape == geom.shape

    @functools.cached_property
    def distance_px(self) -> np.ndarray:
        """Distance of each pixel to the nearest non-contact pixel; the image border counts as outside."""
        out = np.zeros(self.bits.shape, dtype=np.float32)
        rows = np.flatnonzero(self.bits.any(axis=1))
        if len(rows) == 0:
            return out
        cols = np.flatnonzero(self.bits.any(axis=0))
        r0, r1, c0, c1 = rows[0], rows[-1] + 1, cols[0], cols[-1] + 1
        crop = np.pad(self.bits[r0:r1, c0:c1].astype(np.uint8), 1)
        dist = cv2.distanceTransform(crop, cv2.DIST_L2, cv2.DIST_MASK_PRECISE)
        out[r0:r1, c0:c1] = dist[1:-1, 1:-1]
        out.setflags(write=False)
        return out


@dataclass(frozen=True, slots=True)
class MarkerObservation:
    position: tuple[float, float]
    area_px: int = 0
    in_contact: bool = False
    id: int = 0


def disk(radius: float) -> np.ndarray:
    """Boolean disk structuring element of the given pixel radius."""
    r = int(np.floor(radius))
    yy, xx = np.mgrid[-r : r + 1, -r : r + 1]
    return (xx * xx + yy * yy) <= radius * radius + 1e-9


def _disk_u8(radius: float) -> np.ndarray:
    return disk(radius).astype(np.uint8)


def edge_map(img: np.ndarray, low_thresh: float = 40.0, high_thresh: float = 100.0) -> ContactMask:
    """Canny edges: 3x3 Sobel gradient, non-maximum suppression, hysteresis.

    Gradient magnitude is divided by 4 so an ideal step of height ``h``
    responds with ``h``; thresholds are therefore on the 0-255 scale.
    """
    if not 0 <= low_thresh < high_thresh <= 255:
        raise ValueError(f"need 0 <= low < high <= 255, got {low_thresh}, {high_thresh}")
    f = np.asarray(img, dtype=np.float32)
    gx = cv2.Sobel(f, cv2.CV_32F, 1, 0, ksize=3, borderType=cv2.BORDER_REPLICATE) / 4.0
    gy = cv2.Sobel(f, cv2.CV_32F, 0, 1, ksize=3, borderType=cv2.BORDER_REPLICATE) / 4.0
    mag = np.hypot(gx, gy)
    if not np.any(mag >= low_thresh):
        return ContactMask(np.zeros(f.shape, dtype=bool))

    # quantise gradient direction into 0, 45, 90, 135 degrees
    ax, ay = np.abs(gx), np.abs(gy)
    t1, t2 = np.float32(np.tan(np.pi / 8)), np.float32(np.tan(3 * np.pi / 8))
    horiz = ay <= t1 * ax
    vert = ay > t2 * ax
    diag = ~(horiz | vert)
    same_sign = (gx * gy) > 0
    p = np.pad(mag, 1, mode="constant")
    h, w = mag.shape
    c = p[1:-1, 1:-1]

    def nb(dy, dx):
        return p[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]

    keep = horiz & (c >= nb(0, 1)) & (c >= nb(0, -1))
    keep |= vert & (c >= nb(1, 0)) & (c >= nb(-1, 0))
    keep |= diag & same_sign & (c >= nb(1, 1)) & (c >= nb(-1, -1))
    keep |= diag & ~same_sign & (c >= nb(1, -1)) & (c >= nb(-1, 1))
    weak = keep & (mag >= low_thresh)
    strong = weak & (mag >= high_thresh)
    if not strong.any():
        return ContactMask(np.zeros(f.shape, dtype=bool))
    labels, n = ndimage.label(weak, structure=EIGHT_CONNECTED)
    has_strong = np.zeros(n + 1, dtype=bool)
    has_strong[labels[strong]] = True
    has_strong[0] = False
    return ContactMask(has_strong[labels])


def fill_holes(bits: np.ndarray) -> np.ndarray:
    """Fill enclosed background regions (4-connected background, as in scipy)."""
    h, w = bits.shape
    canvas = np.zeros((h + 2, w + 2), dtype=np.uint8)
    canvas[1:-1, 1:-1] = bits.astype(bool)
    flood_mask = np.zeros((h + 4, w + 4), dtype=np.uint8)
    cv2.floodFill(canvas, flood_mask, (0, 0), 2, flags=4)
    return canvas[1:-1, 1:-1] != 2


def contact_mask(edges: ContactMask, close_radius_px: float = 7, min_component_px: int = 400) -> ContactMask:
    """Group edge pixels into filled contact components.

    Closing with a disk, hole filling, then dropping components smaller than
    ``min_component_px``. An empty result means no contact.
    """
    if close_radius_px < 1:
        raise ValueError("close_radius_px must be >= 1")
    bits = edges.bits
    if not bits.any():
        return ContactMask(np.zeros_like(bits))
    closed = cv2.morphologyEx(bits.astype(np.uint8), cv2.MORPH_CLOSE, _disk_u8(close_radius_px))
    filled = fill_holes(closed)
    labels, n = ndimage.label(filled, structure=EIGHT_CONNECTED)
    if n == 0:
        return ContactMask(filled)
    areas = np.bincount(labels.ravel(), minlength=n + 1)
    ok = areas >= min_component_px
    ok[0] = False
    return ContactMask(ok[labels])


@functools.lru_cache(maxsize=4)
def _pixel_grid(shape: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
    rows, cols = np.indices(shape, dtype=np.float64)
    return rows.ravel(), cols.ravel()


def detect_markers(
    img: np.ndarray,
    geom: SensorGeometry,
    dark_thresh: float = 60,
    min_area_px: int = 12,
    max_area_px: int = 400,
) -> list[MarkerObservation]:
    """Dark-blob detection with intensity-weighted centroids (sensor frame, mm)."""
    if min_area_px >= max_area_px:
        raise ValueError("min_area_px must be below max_area_px")
    img = np.asarray(img)
    if img.shape != geom.shape:
        raise ValueError(f"image shape {img.shape} does not match geometry {geom.shape}")
    dark = img < dark_thresh
    labels, n = ndimage.label(dark, structure=EIGHT_CONNECTED)
    if n == 0:
        return []
    flat = labels.ravel()
    weight = np.where(dark, dark_thresh - img.astype(np.float64), 0.0).ravel()
    rows, cols = _pixel_grid(img.shape)
    area = np.bincount(flat, minlength=n + 1)
    wsum = np.bincount(flat, weights=weight, minlength=n + 1)
    usum = np.bincount(flat, weights=weight * cols, minlength=n + 1)
    vsum = np.bincount(flat, weights=weight * rows, minlength=n + 1)
    keep = np.flatnonzero((area >= min_area_px) & (area <= max_area_px) & (wsum > 0))
    keep = keep[keep > 0]
    uv = np.column_stack([usum[keep] / wsum[keep], vsum[keep] / wsum[keep]])
    xy = geom.px_to_mm(uv)
    return [MarkerObservation((float(x), float(y)), int(a)) for (x, y), a in zip(xy, area[keep])]


def marker_pixels(markers: Sequence[MarkerObservation], geom: SensorGeometry) -> np.ndarray:
    """Integer (row, col) pixel of each marker, clipped to the image."""
    if not markers:
        return np.zeros((0, 2), dtype=int)
    uv = np.rint(geom.mm_to_px(np.array([m.position for m in markers]))).astype(int)
    col = np.clip(uv[:, 0], 0, geom.width_px - 1)
    row = np.clip(uv[:, 1], 0, geom.height_px - 1)
    return np.column_stack([row, col])


def mask_membership(
    markers: Sequence[MarkerObservation], mask: ContactMask, geom: SensorGeometry
) -> list[MarkerObservation]:
    if not mask.matches(geom):
        raise ValueError("mask dimensions do not match sensor geometry")
    rc = marker_pixels(markers, geom)
    inside = mask.bits[rc[:, 0], rc[:, 1]] if len(rc) else []
    return [replace(m, in_contact=bool(f)) for m, f in zip(markers, inside)]


def mask_from_markers(
    positions: np.ndarray, geom: SensorGeometry, radius_mm: float = 1.0
) -> ContactMask:
    """Contact mask rasterised as the union of disks around in-contact markers.

    Used when a frame arrives as a marker table without an image.
    """
    bits = np.zeros(geom.shape, dtype=np.uint8)
    positions = np.asarray(positions, dtype=float).reshape(-1, 2)
    if len(positions):
        r = max(1, int(round(radius_mm / geom.mm_per_px)))
        for u, v in np.rint(geom.mm_to_px(positions)).astype(int):
            cv2.circle(bits, (int(u), int(v)), r, 1, thickness=-1)
        # disks overlap along the grid rows but leave gaps at the cell diagonals
        return ContactMask(fill_holes(bits))
    return ContactMask(bits.astype(bool))


def erode_mask(mask: ContactMask, radius_px: float) -> ContactMask:
    """Erosion by a Euclidean disk; pixels outside the image count as non-contact."""
    if radius_px <= 0:
        return mask
    return ContactMask(boundary_distance_px(mask) > radius_px)


def boundary_distance_px(mask: ContactMask) -> np.ndarray:
    """Per-pixel Euclidean distance to the nearest non-contact pixel (cached per mask)."""
    return mask.distance_px


def read_pgm(path: str | Path) -> np.ndarray:
    path = Path(path)
    data = path.read_bytes()
    if not data.startswith(b"P5"):
        raise ValueError(f"{path}: not a binary PGM (P5) file")
    img = cv2.imdecode(np.frombuffer(data, np.uint8), cv2.IMREAD_UNCHANGED)
    if img is None or img.ndim != 2:
        raise ValueError(f"{path}: unreadable PGM")
    if img.dtype != np.uint8:
        raise ValueError(f"{path}: only 8-bit PGM is supported")
    return img


def write_pgm(path: str | Path, img: np.ndarray) -> None:
    img = np.asarray(img)
    if img.dtype != np.uint8 or img.ndim != 2:
        raise ValueError("write_pgm expects a 2D uint8 image")
    ok, buf = cv2.imencode(".pgm", img)
    if not ok:
        raise OSError(f"failed to encode {path}")
    Path(path).write_bytes(buf.tobytes())
