"""Planar rigid-body kinematics for small inter-frame motions.

Core frame: millimetres, y pointing up, angular velocity counterclockwise
positive. Displacements between frames are treated as velocities
(mm/frame, rad/frame).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

OMEGA_EPSILON = 1e-8


@dataclass(frozen=True)
class RigidMotion2D:
    """Motion of a reference point plus the body's angular velocity."""

    ref_point: tuple[float, float] = (0.0, 0.0)
    linear_velocity: tuple[float, float] = (0.0, 0.0)
    angular_velocity: float = 0.0

    def __post_init__(self):
        vals = (*self.ref_point, *self.linear_velocity, self.angular_velocity)
        if not np.all(np.isfinite(vals)):
            raise ValueError(f"non-finite motion component in {vals}")
        object.__setattr__(self, "ref_point", (float(self.ref_point[0]), float(self.ref_point[1])))
        object.__setattr__(
            self, "linear_velocity", (float(self.linear_velocity[0]), float(self.linear_velocity[1]))
        )
        object.__setattr__(self, "angular_velocity", float(self.angular_velocity))

    @classmethod
    def identity(cls) -> "RigidMotion2D":
        return cls()

    def about(self, point) -> "RigidMotion2D":
        """The same physical motion re-expressed about another reference point."""
        v = propagate_velocity(self, point)
        return RigidMotion2D(tuple(np.asarray(point, float)), tuple(v), self.angular_velocity)


def _as_points(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.shape[-1] != 2:
        raise ValueError(f"expected points with trailing dimension 2, got shape {q.shape}")
    if not np.all(np.isfinite(q)):
        raise ValueError("non-finite query point")
    return q


def propagate_velocity(motion: RigidMotion2D, q) -> np.ndarray:
    """Velocity of the body at ``q`` given the motion of its reference point.

    ``q`` may be a single point ``(2,)`` or an array of points ``(n, 2)``.
    """
    q = _as_points(q)
    x, y = motion.ref_point
    vx, vy = motion.linear_velocity
    w = motion.angular_velocity
    out = np.empty_like(q)
    out[..., 0] = vx + w * (y - q[..., 1])
    out[..., 1] = vy + w * (q[..., 0] - x)
    return out


def icr(motion: RigidMotion2D, omega_epsilon: float = OMEGA_EPSILON) -> Optional[np.ndarray]:
    """Instantaneous centre of rotation, or ``None`` for (near) pure translation."""
    if omega_epsilon <= 0:
        raise ValueError("omega_epsilon must be positive")
    w = motion.angular_velocity
    if abs(w) <= omega_epsilon:
        return None
    x, y = motion.ref_point
    vx, vy = motion.linear_velocity
    return np.array([x - vy / w, y + vx / w])


def apply_motion(motion: RigidMotion2D, q) -> np.ndarray:
    """Small-motion update: the point plus its propagated velocity."""
    q = _as_points(q)
    return q + propagate_velocity(motion, q)


def rotation_matrix(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])
