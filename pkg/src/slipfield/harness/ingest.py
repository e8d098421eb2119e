"""Trial directories on disk: export from the simulator, ingest as frame streams.

Layout::

    trial/
      manifest.json     object spec, load script, labels, geometry
      markers.csv       frame,id,x_mm,y_mm,state,in_contact
      frames/frame_00000.pgm ...   (optional rendered images)
"""

from __future__ import annotations

import csv
import dataclasses
import json
import re
from pathlib import Path
from typing import Iterator, Optional, Sequence

import numpy as np

from slipfield.frames import FrameSnapshot, RasterConfig, frame_from_image, frame_from_markers
from slipfield.raster import SensorGeometry, read_pgm, write_pgm
from slipfield.simulator import (
    STATE_NAMES,
    GelModel,
    GroundTruthFrame,
    LoadScript,
    ObjectSpec,
    render,
)

CSV_COLUMNS = ("frame", "id", "x_mm", "y_mm", "state", "in_contact")
FRAME_NAME = re.compile(r"^frame_(\d+)\.pgm$")


class IngestError(Exception):
    pass


def write_trial(
    out_dir: str | Path,
    frames: Sequence[GroundTruthFrame],
    model: GelModel,
    obj: ObjectSpec,
    script: LoadScript,
    *,
    trial_id: str = "",
    seed: int = 0,
    render_images: bool = False,
) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "trial_id": trial_id,
        "seed": seed,
        "geometry": dataclasses.asdict(model.geometry),
        "object": dataclasses.asdict(obj),
        "script": script.to_dict(),
        "labels": [f.label.value for f in frames],
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1))
    with open(out / "markers.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for f in frames:
            for i, ((x, y), s, v) in enumerate(zip(f.positions, f.state, f.visible)):
                w.writerow([f.index, i, repr(float(x)), repr(float(y)), STATE_NAMES[s], int(v)])
    if render_images:
        (out / "frames").mkdir(exist_ok=True)
        for f in frames:
            write_pgm(out / "frames" / f"frame_{f.index:05d}.pgm", render(f, model, obj, seed))
    return out


def read_manifest(trial_dir: str | Path) -> dict:
    path = Path(trial_dir) / "manifest.json"
    if not path.exists():
        return {}
    return json.loads(path.read_text())


def trial_geometry(trial_dir: str | Path) -> SensorGeometry:
    g = read_manifest(trial_dir).get("geometry")
    return SensorGeometry(**g) if g else SensorGeometry()


def _check_contiguous(indices: Sequence[int], what: str) -> None:
    if not indices:
        raise IngestError(f"no frames found in {what}")
    present = set(indices)
    missing = sorted(set(range(max(present) + 1)) - present)
    if missing:
        raise IngestError(f"{what}: missing frame indices {missing}")


def read_marker_csv(path: str | Path) -> dict[int, tuple[np.ndarray, np.ndarray]]:
    """Per-frame (positions, in_contact) from a marker table."""
    path = Path(path)
    rows: dict[int, list] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:4]] != list(CSV_COLUMNS[:4]):
            raise IngestError(f"{path}:1: expected header starting with {','.join(CSV_COLUMNS[:4])}")
        has_contact = "in_contact" in header
        has_state = "state" in header
        ci = header.index("in_contact") if has_contact else None
        si = header.index("state") if has_state else None
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                frame, x, y = int(row[0]), float(row[2]), float(row[3])
                int(row[1])
                if ci is not None:
                    contact = bool(int(row[ci]))
                elif si is not None:
                    if row[si] not in STATE_NAMES:
                        raise ValueError(f"unknown state {row[si]!r}")
                    contact = row[si] != "out_of_contact"
                else:
                    contact = False
            except (ValueError, IndexError) as exc:
                raise IngestError(f"{path}:{line_no}: malformed row {row!r} ({exc})") from None
            if not (np.isfinite(x) and np.isfinite(y)):
                raise IngestError(f"{path}:{line_no}: non-finite position")
            rows.setdefault(frame, []).append((x, y, contact))
    _check_contiguous(list(rows), str(path))
    out = {}
    for k in sorted(rows):
        arr = rows[k]
        out[k] = (np.array([(x, y) for x, y, _ in arr]), np.array([c for *_, c in arr], dtype=bool))
    return out


def pgm_files(frames_dir: str | Path) -> list[Path]:
    frames_dir = Path(frames_dir)
    found = {}
    for p in frames_dir.iterdir():
        m = FRAME_NAME.match(p.name)
        if m:
            found[int(m.group(1))] = p
    _check_contiguous(list(found), str(frames_dir))
    return [found[i] for i in sorted(found)]


def ingest(
    path: str | Path,
    fmt: str = "marker_csv",
    geom: Optional[SensorGeometry] = None,
    raster_cfg: RasterConfig = RasterConfig(),
) -> Iterator[FrameSnapshot]:
    """Yield frames of a trial directory in index order.

    ``pgm_sequence`` runs each image through the raster pipeline;
    ``marker_csv`` uses the marker table directly.
    """
    path = Path(path)
    if not path.is_dir():
        raise IngestError(f"{path} is not a directory")
    geom = geom or trial_geometry(path)
    if fmt == "marker_csv":
        table = read_marker_csv(path / "markers.csv")
        for idx, (pos, contact) in table.items():
            yield frame_from_markers(pos, contact, geom, raster_cfg, idx)
    elif fmt == "pgm_sequence":
        frames_dir = path / "frames" if (path / "frames").is_dir() else path
        for idx, f in enumerate(pgm_files(frames_dir)):
            img = read_pgm(f)
            if img.shape != geom.shape:
                raise IngestError(f"{f}: image {img.shape[::-1]} does not match geometry {geom.shape[::-1]}")
            yield frame_from_image(img, geom, raster_cfg, idx)
    else:
        raise ValueError(f"unknown format {fmt!r}")
