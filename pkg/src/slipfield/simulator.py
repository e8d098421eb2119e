"""Quasi-static Coulomb stick-slip gel model with rendering and a benchmark suite.

Each marker is an independent spring of stiffness ``k`` anchored at its
rest position. In contact, the gel follows the object's rigid motion minus
the slip accumulated so far; when the spring force would exceed ``mu * p``
the marker slides and its displacement is clamped to the friction cap.
"""

from __future__ import annotations

import enum
import functools
from dataclasses import dataclass
from typing import Optional

import cv2
import numpy as np
from scipy import ndimage

from slipfield.geometry import rotation_matrix
from slipfield.raster import SensorGeometry

STUCK, SLIPPING, OUT_OF_CONTACT = 0, 1, 2
STATE_NAMES = ("stuck", "slipping", "out_of_contact")


class Label(str, enum.Enum):
    NO_SLIP = "no_slip"
    INCIPIENT_SLIP = "incipient_slip"
    GROSS_SLIP = "gross_slip"


@dataclass(frozen=True)
class GelModel:
    geometry: SensorGeometry = SensorGeometry()
    pitch: float = 1.5
    rows: int = 19
    cols: int = 25
    shear_stiffness: float = 0.8  # N/mm per marker
    noise_sigma: float = 0.01  # mm, applied to reported positions only
    contact_floor: float = 0.02  # N per marker; lighter loading is not contact
    visibility_floor: float = 0.02  # texture * pressure needed for a visible imprint
    reference_force: float = 10.0  # N
    # rendering
    marker_radius_px: float = 4.0
    background: float = 80.0
    marker_level: float = 45.0
    texture_min: float = 70.0
    texture_max: float = 90.0
    pressure_saturation: float = 0.3
    texture_blur_px: float = 0.8

    def __post_init__(self):
        if self.pitch <= 0 or self.shear_stiffness <= 0:
            raise ValueError("pitch and shear_stiffness must be positive")
        span_x = (self.cols - 1) * self.pitch
        span_y = (self.rows - 1) * self.pitch
        if span_x > self.geometry.width_mm or span_y > self.geometry.height_mm:
            raise ValueError("marker grid does not fit on the sensor")

    @property
    def n_markers(self) -> int:
        return self.rows * self.cols

    def rest_grid(self) -> np.ndarray:
        g = self.geometry
        xs = g.width_mm / 2 + (np.arange(self.cols) - (self.cols - 1) / 2) * self.pitch
        ys = g.height_mm / 2 + (np.arange(self.rows) - (self.rows - 1) / 2) * self.pitch
        xx, yy = np.meshgrid(xs, ys)
        return np.column_stack([xx.ravel(), yy.ravel()])


@dataclass(frozen=True)
class ObjectSpec:
    """Contact patch description.

    ``shape`` is ``disk`` (dims = (radius,)), ``rectangle`` (dims = (w, h)) or
    ``annulus`` (dims = (r_in, r_out)). ``p0`` is the peak per-marker normal
    load at the reference grip force. Dome patches follow Hertz scaling with
    grip force: size and peak load grow as the cube root of force.
    """

    name: str = "disk"
    shape: str = "disk"
    dims: tuple[float, ...] = (8.0,)
    profile: str = "dome"
    p0: float = 0.5
    mu: float = 1.0
    texture_strength: float = 1.0
    center: tuple[float, float] = (20.0, 15.0)

    def __post_init__(self):
        n = {"disk": 1, "rectangle": 2, "annulus": 2}.get(self.shape)
        if n is None or len(self.dims) != n:
            raise ValueError(f"bad patch shape {self.shape!r} with dims {self.dims}")
        if min(self.dims) <= 0 or (self.shape == "annulus" and self.dims[0] >= self.dims[1]):
            raise ValueError(f"bad patch dimensions {self.dims}")
        if self.profile not in ("dome", "uniform"):
            raise ValueError(f"unknown pressure profile {self.profile!r}")
        if self.mu <= 0 or self.p0 <= 0:
            raise ValueError("mu and p0 must be positive")
        if not 0 <= self.texture_strength <= 1:
            raise ValueError("texture_strength must lie in [0, 1]")

    def scale(self, force: float, reference_force: float) -> tuple[float, float]:
        """(size scale, peak load) at the given grip force."""
        ratio = max(force, 0.0) / reference_force
        if self.profile == "dome":
            s = ratio ** (1.0 / 3.0)
            return s, self.p0 * s
        return 1.0, self.p0 * ratio

    def extent(self) -> float:
        """Radius of a circle enclosing the patch at unit size scale."""
        if self.shape == "rectangle":
            return 0.5 * float(np.hypot(*self.dims))
        return float(self.dims[-1])

    def normalized_radius(self, q: np.ndarray, size_scale: float) -> np.ndarray:
        """0 at the patch core, 1 on the patch boundary; ``q`` in the object frame."""
        d = np.asarray(self.dims, dtype=float) * size_scale
        if self.shape == "disk":
            return np.hypot(q[..., 0], q[..., 1]) / d[0]
        if self.shape == "rectangle":
            return np.maximum(np.abs(q[..., 0]) / (d[0] / 2), np.abs(q[..., 1]) / (d[1] / 2))
        r = np.hypot(q[..., 0], q[..., 1])
        mid, half = (d[0] + d[1]) / 2, (d[1] - d[0]) / 2
        return np.abs(r - mid) / half

    def pressure(self, q: np.ndarray, force: float, reference_force: float) -> np.ndarray:
        s, peak = self.scale(force, reference_force)
        rho = self.normalized_radius(q, s)
        inside = rho < 1.0
        if self.profile == "dome":
            shape = np.sqrt(np.clip(1.0 - rho * rho, 0.0, None))
        else:
            shape = np.ones_like(rho)
        return np.where(inside, peak * shape, 0.0)


@dataclass(frozen=True)
class LoadScript:
    """Per-frame object pose (translation mm, rotation rad about the patch centre) and grip force (N)."""

    translation: np.ndarray
    rotation: np.ndarray
    normal_force: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.translation, dtype=float).reshape(-1, 2)
        r = np.asarray(self.rotation, dtype=float).reshape(-1)
        f = np.asarray(self.normal_force, dtype=float).reshape(-1)
        if not (len(t) == len(r) == len(f)):
            raise ValueError("translation, rotation and normal_force lengths differ")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(r)) and np.all(np.isfinite(f))):
            raise ValueError("non-finite load script")
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "normal_force", f)

    def __len__(self) -> int:
        return len(self.rotation)

    @classmethod
    def static(cls, n_frames: int, force: float = 10.0) -> "LoadScript":
        return cls(np.zeros((n_frames, 2)), np.zeros(n_frames), np.full(n_frames, float(force)))

    def validate(self, model: GelModel, obj: ObjectSpec) -> None:
        """Reject per-frame motions beyond half a marker pitch."""
        grid = model.rest_grid()
        r_max = np.max(np.hypot(*(grid - np.asarray(obj.center)).T))
        dt = np.linalg.norm(np.diff(self.translation, axis=0, prepend=np.zeros((1, 2))), axis=1)
        dr = np.abs(np.diff(self.rotation, prepend=0.0))
        step = dt + 2 * np.sin(np.minimum(dr, np.pi) / 2) * r_max
        bad = np.flatnonzero(step > 0.5 * model.pitch + 1e-12)
        if len(bad):
            raise ValueError(
                f"frame {bad[0]} moves {step[bad[0]]:.3f} mm, beyond half pitch {0.5 * model.pitch}"
            )

    def to_dict(self) -> dict:
        return {
            "translation": self.translation.tolist(),
            "rotation": self.rotation.tolist(),
            "normal_force": self.normal_force.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LoadScript":
        return cls(np.array(d["translation"]), np.array(d["rotation"]), np.array(d["normal_force"]))


@dataclass(frozen=True)
class GroundTruthFrame:
    index: int
    positions: np.ndarray  # reported (noisy) marker positions, mm
    displacement: np.ndarray  # noise-free gel displacement, mm
    state: np.ndarray  # STUCK / SLIPPING / OUT_OF_CONTACT per marker
    visible: np.ndarray  # contact imprint visible at the marker
    pressure: np.ndarray  # per-marker normal load, N
    translation: np.ndarray
    rotation: float
    normal_force: float
    label: Label

    @property
    def in_contact(self) -> np.ndarray:
        return self.state != OUT_OF_CONTACT

    @property
    def slipping(self) -> np.ndarray:
        return self.state == SLIPPING


def frame_label(state: np.ndarray) -> Label:
    n_contact = np.count_nonzero(state != OUT_OF_CONTACT)
    n_slip = np.count_nonzero(state == SLIPPING)
    if n_slip == 0:
        return Label.NO_SLIP
    if n_slip < n_contact:
        return Label.INCIPIENT_SLIP
    return Label.GROSS_SLIP


class GelSimulator:
    """Frame-by-frame simulator; ``advance`` commits one pose and returns its ground truth.

    The contact footprint is fixed on the gel where the object was grasped;
    the pose only loads it tangentially. Grip force changes the footprint
    size and pressure.
    """

    def __init__(self, model: GelModel, obj: ObjectSpec, seed: int = 0):
        self.model = model
        self.obj = obj
        self.rest = model.rest_grid()
        self.center = np.asarray(obj.center, dtype=float)
        self.slip = np.zeros_like(self.rest)
        self.contact = np.zeros(len(self.rest), dtype=bool)
        self.displacement = np.zeros_like(self.rest)
        self.rng = np.random.default_rng(seed)
        self.index = 0

    def object_field(self, translation, rotation: float) -> np.ndarray:
        """Exact rigid displacement of the object material over each rest position."""
        rel = self.rest - self.center
        return rel @ rotation_matrix(rotation).T - rel + np.asarray(translation, dtype=float)

    def pressure(self, force: float) -> np.ndarray:
        return self.obj.pressure(self.rest - self.center, force, self.model.reference_force)

    def caps(self, force: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(contact flags, per-marker normal load, friction-limited displacement magnitude)."""
        p = self.pressure(force)
        contact = p >= self.model.contact_floor
        return contact, p, self.obj.mu * p / self.model.shear_stiffness

    def solve(self, translation, rotation: float, force: float):
        """Trial solution for a pose without committing state."""
        g = self.object_field(translation, rotation)
        contact, p, cap = self.caps(force)
        # markers entering contact attach with zero stretch
        slip = np.where((contact & ~self.contact)[:, None], g, self.slip)
        trial = g - slip
        mag = np.hypot(trial[:, 0], trial[:, 1])
        slipping = contact & (mag > cap)
        scale = np.ones(len(mag))
        scale[slipping] = cap[slipping] / mag[slipping]  # mag > cap > 0 here
        u = trial * scale[:, None]
        u[~contact] = 0.0
        slip = np.where(slipping[:, None], g - u, slip)
        state = np.full(len(u), OUT_OF_CONTACT, dtype=np.int8)
        state[contact] = STUCK
        state[slipping] = SLIPPING
        return u, slip, contact, p, state

    def advance(self, translation, rotation: float, force: float) -> GroundTruthFrame:
        translation = np.asarray(translation, dtype=float)
        u, slip, contact, p, state = self.solve(translation, rotation, force)
        self.displacement, self.slip, self.contact = u, slip, contact
        noise = self.rng.normal(0.0, self.model.noise_sigma, size=u.shape) if self.model.noise_sigma else 0.0
        visible = contact & (self.obj.texture_strength * p >= self.model.visibility_floor)
        frame = GroundTruthFrame(
            index=self.index,
            positions=self.rest + u + noise,
            displacement=u,
            state=state,
            visible=visible,
            pressure=p,
            translation=translation.copy(),
            rotation=float(rotation),
            normal_force=float(force),
            label=frame_label(state),
        )
        self.index += 1
        return frame


def simulate(model: GelModel, obj: ObjectSpec, script: LoadScript, seed: int = 0) -> list[GroundTruthFrame]:
    script.validate(model, obj)
    sim = GelSimulator(model, obj, seed)
    return [
        sim.advance(script.translation[i], script.rotation[i], script.normal_force[i])
        for i in range(len(script))
    ]


@functools.lru_cache(maxsize=16)
def _texture(seed: int, shape: tuple[int, int], blur: float) -> np.ndarray:
    rng = np.random.default_rng(seed + 7919)
    tex = ndimage.gaussian_filter(rng.normal(size=shape), blur)
    tex /= tex.std()
    tex = np.clip(tex, -1.0, 2.0)
    tex.setflags(write=False)
    return tex


def _pixel_centres(geom: SensorGeometry) -> np.ndarray:
    return _pixel_centres_cached(geom.width_px, geom.height_px, geom.width_mm, geom.height_mm)


@functools.lru_cache(maxsize=4)
def _pixel_centres_cached(w, h, wmm, hmm) -> np.ndarray:
    geom = SensorGeometry(w, h, wmm, hmm)
    vv, uu = np.mgrid[0:h, 0:w]
    xy = geom.px_to_mm(np.stack([uu, vv], axis=-1).astype(float))
    xy.setflags(write=False)
    return xy


def draw_markers(img: np.ndarray, uv: np.ndarray, radius: float, level: float) -> None:
    """Blend anti-aliased dark disks into a float image in place."""
    h, w = img.shape
    r = int(np.ceil(radius + 1))
    offs = np.arange(-r, r + 1)
    base = np.rint(uv).astype(int)
    cols = base[:, 0, None, None] + offs[None, None, :]
    rows = base[:, 1, None, None] + offs[None, :, None]
    cols, rows = np.broadcast_arrays(cols, rows)
    d = np.hypot(cols - uv[:, 0, None, None], rows - uv[:, 1, None, None])
    cov = np.clip(radius + 0.5 - d, 0.0, 1.0)
    ok = (cols >= 0) & (cols < w) & (rows >= 0) & (rows < h) & (cov > 0)
    rr, cc, cv = rows[ok], cols[ok], cov[ok]
    img[rr, cc] = img[rr, cc] * (1.0 - cv) + level * cv


def gel_rest_positions(xy: np.ndarray, frame: GroundTruthFrame, model: GelModel, n_iter: int = 3) -> np.ndarray:
    """Rest-frame position of the gel material now at ``xy`` (mm).

    Marker displacements are interpolated bilinearly over the rest grid and the
    map x = X + u(X) is inverted by fixed-point iteration.
    """
    rest = model.rest_grid()
    x0, y0 = rest[0]
    u = frame.displacement.reshape(model.rows, model.cols, 2).astype(np.float32)
    X = np.array(xy, dtype=float)
    for _ in range(n_iter):
        col = ((X[..., 0] - x0) / model.pitch).astype(np.float32)
        row = ((X[..., 1] - y0) / model.pitch).astype(np.float32)
        du = cv2.remap(u, col, row, cv2.INTER_LINEAR, borderMode=cv2.BORDER_REPLICATE)
        X = xy - du
    return X


def render(frame: GroundTruthFrame, model: GelModel, obj: ObjectSpec, seed: int = 0) -> np.ndarray:
    """Synthetic tactile image: gray background, textured bright imprint, dark markers.

    The imprint is the rest footprint carried along by the local gel displacement.
    """
    geom = model.geometry
    img = np.full(geom.shape, model.background, dtype=np.float64)
    if obj.texture_strength > 0:
        s, _ = obj.scale(frame.normal_force, model.reference_force)
        reach = obj.extent() * s + 1.0 + np.abs(frame.displacement).max(initial=0.0)
        cx, cy = obj.center
        (u0, v1), (u1, v0) = geom.mm_to_px(np.array([[cx - reach, cy - reach], [cx + reach, cy + reach]]))
        rows = slice(max(0, int(v0)), min(geom.height_px, int(np.ceil(v1)) + 1))
        cols = slice(max(0, int(u0)), min(geom.width_px, int(np.ceil(u1)) + 1))
        xy = _pixel_centres(geom)[rows, cols]
        rest_xy = gel_rest_positions(xy, frame, model)
        p = obj.pressure(rest_xy - np.asarray(obj.center), frame.normal_force, model.reference_force)
        signal = obj.texture_strength * p
        vis = (p >= model.contact_floor) & (signal >= model.visibility_floor)
        if vis.any():
            amp = model.texture_min + (model.texture_max - model.texture_min) * np.clip(
                signal / model.pressure_saturation, 0.0, 1.0
            )
            tex = _texture(seed, geom.shape, model.texture_blur_px)[rows, cols]
            img[rows, cols] += np.where(vis, amp * (1.0 + tex), 0.0)
    uv = geom.mm_to_px(frame.positions)
    draw_markers(img, uv, model.marker_radius_px, model.marker_level)
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


FORCE_LEVELS = (5.0, 15.0, 30.0)
N_FRAMES = 30
N_STATIC = 3


def default_objects() -> list[ObjectSpec]:
    """Ten synthetic profiles spanning friction, texture and patch shape.

    ``crayon_box`` and ``scrub_sponge`` are the flat, smooth, low-texture
    cases whose imprint is faint under a light grip; the sponge's imprint
    vanishes almost entirely at the lowest force level. The tape's core is
    narrow enough to hold only the centre marker, since the image pipeline
    fills holes in the contact region.
    """
    return [
        ObjectSpec("tape", "annulus", (1.2, 9.0), "dome", 0.55, 0.9, 0.9),
        ObjectSpec("crayon_box", "rectangle", (16.0, 12.0), "dome", 0.45, 0.9, 0.08),
        ObjectSpec("scissors", "rectangle", (14.0, 9.0), "dome", 0.9, 0.6, 0.8),
        ObjectSpec("water_bottle", "rectangle", (10.0, 20.0), "dome", 0.4, 1.2, 0.7),
        ObjectSpec("glue_bottle", "disk", (7.0,), "dome", 0.9, 0.5, 0.4),
        ObjectSpec("brain_foam", "disk", (9.0,), "dome", 2.5, 0.2, 0.3),
        ObjectSpec("toy_duck", "disk", (8.0,), "dome", 0.6, 0.8, 0.6),
        ObjectSpec("screwdriver", "rectangle", (18.0, 9.0), "dome", 0.8, 0.6, 1.0),
        ObjectSpec("scrub_sponge", "rectangle", (18.0, 14.0), "dome", 0.52, 0.9, 0.05),
        ObjectSpec("blue_tube", "disk", (7.5,), "dome", 0.65, 0.8, 0.5),
    ]


@dataclass(frozen=True)
class Trial:
    object: ObjectSpec
    script: LoadScript
    expected_labels: tuple[Label, ...]
    trial_id: str
    kind: str  # "translate", "rotate" or "hold"
    force: float
    slip_expected: bool
    seed: int

    @property
    def ground_truth_slip(self) -> bool:
        return any(lab != Label.NO_SLIP for lab in self.expected_labels)

    @property
    def onset_frame(self) -> Optional[int]:
        for i, lab in enumerate(self.expected_labels):
            if lab != Label.NO_SLIP:
                return i
        return None


def _ramp(n_frames: int, n_static: int) -> np.ndarray:
    r = np.zeros(n_frames)
    r[n_static:] = np.linspace(1.0 / (n_frames - n_static), 1.0, n_frames - n_static)
    return r


def onset_amplitudes(model: GelModel, obj: ObjectSpec, force: float) -> tuple[float, float, float]:
    """(first-slip translation, centre cap, first-slip rotation) for a fresh contact."""
    sim = GelSimulator(model, obj)
    contact, _, cap = sim.caps(force)
    if not contact.any():
        return 0.0, 0.0, 0.0
    r = np.hypot(*(sim.rest[contact] - sim.center).T)
    c = cap[contact]
    rot = np.min(c[r > 0] / r[r > 0]) if np.any(r > 0) else 0.0
    return float(c.min()), float(c.max()), float(rot)


def make_script(
    model: GelModel,
    obj: ObjectSpec,
    kind: str,
    direction: float,
    force: float,
    slip: bool,
    n_frames: int = N_FRAMES,
    n_static: int = N_STATIC,
) -> LoadScript:
    """Push (``translate``) or twist (``rotate``) ramp at constant grip force.

    Slip ramps drive the centre marker 40% past its friction cap; hold ramps
    stop at 80% of the first marker's cap.
    """
    first, centre, first_rot = onset_amplitudes(model, obj, force)
    ramp = _ramp(n_frames, n_static)
    forces = np.full(n_frames, float(force))
    if kind == "translate":
        amp = 1.4 * centre if slip else 0.8 * first
        d = np.array([np.cos(direction), np.sin(direction)])
        return LoadScript(ramp[:, None] * amp * d[None, :], np.zeros(n_frames), forces)
    if kind == "rotate":
        s, _ = obj.scale(force, model.reference_force)
        reach = obj.extent() * s
        amp = 2.0 * centre / reach if slip else 0.8 * first_rot
        return LoadScript(np.zeros((n_frames, 2)), ramp * amp * np.sign(direction), forces)
    raise ValueError(f"unknown trial kind {kind!r}")


def benchmark_suite(seed: int = 0, model: GelModel = GelModel(), objects=None) -> list[Trial]:
    """24 trials per object: 12 pushes and 6 twists that slip, 6 that should hold."""
    objects = default_objects() if objects is None else objects
    rng = np.random.default_rng(seed)
    trials = []
    for obj in objects:
        specs = []
        for force in FORCE_LEVELS:
            for k in range(4):
                specs.append(("translate", k * np.pi / 2, force, True))
            for sgn in (1.0, -1.0):
                specs.append(("rotate", sgn, force, True))
        hold_dirs = [("translate", k * np.pi / 2) for k in range(4)] + [("rotate", 1.0), ("rotate", -1.0)]
        for i, (kind, d) in enumerate(hold_dirs):
            specs.append((kind, d, FORCE_LEVELS[i % 3], False))
        for n, (kind, d, force, slip) in enumerate(specs):
            trial_seed = int(rng.integers(2**31))
            script = make_script(model, obj, kind, d, force, slip)
            frames = simulate(model, obj, script, trial_seed)
            kind_name = kind if slip else "hold"
            trials.append(
                Trial(
                    object=obj,
                    script=script,
                    expected_labels=tuple(f.label for f in frames),
                    trial_id=f"{obj.name}-{n:02d}-{kind_name}-{int(force)}N",
                    kind=kind_name,
                    force=force,
                    slip_expected=slip,
                    seed=trial_seed,
                )
            )
    return trials
