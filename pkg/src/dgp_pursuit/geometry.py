"""Rigid motions restricted to a rotation about the world z-axis plus a 3-D translation.

A pose is stored as ``(p, theta)``; the 4x4 homogeneous matrix is derived on
demand, so the rotation block is orthonormal by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

TWO_PI = 2.0 * math.pi


def wrap_angle(theta: float) -> float:
    """Wrap an angle to the half-open interval (-pi, pi]."""
    w = math.remainder(theta, TWO_PI)
    if w <= -math.pi:
        w += TWO_PI
    return w


def rot_z(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


@dataclass(frozen=True, eq=False)
class Pose:
    """Position ``p`` (metres) and yaw ``theta`` (radians, wrapped)."""

    p: np.ndarray
    theta: float = 0.0

    def __post_init__(self):
        p = np.array(self.p, dtype=float).reshape(3)
        p.flags.writeable = False
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "theta", wrap_angle(float(self.theta)))

    @classmethod
    def identity(cls) -> Pose:
        return cls(np.zeros(3), 0.0)

    @classmethod
    def from_flat(cls, x: Sequence[float]) -> Pose:
        return cls(x[:3], x[3])

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> Pose:
        """Project a (near-)homogeneous matrix onto the group.

        The yaw is read from the upper-left 2x2 block with ``atan2``; any
        non-rotational part of that block is discarded.
        """
        m = np.asarray(m, dtype=float)
        theta = math.atan2(m[1, 0] - m[0, 1], m[0, 0] + m[1, 1])
        return cls(m[:3, 3], theta)

    def matrix(self) -> np.ndarray:
        g = np.eye(4)
        g[:3, :3] = rot_z(self.theta)
        g[:3, 3] = self.p
        return g

    def rotation(self) -> np.ndarray:
        return rot_z(self.theta)

    def flat(self) -> np.ndarray:
        """The input vector ``[px, py, pz, theta]`` used by the GP experts."""
        return np.array([self.p[0], self.p[1], self.p[2], self.theta])

    def to_json(self) -> dict:
        return {"p": [float(v) for v in self.p], "theta": float(self.theta)}

    @classmethod
    def from_json(cls, obj: dict) -> Pose:
        return cls(obj["p"], obj.get("theta", 0.0))

    def to_csv_row(self) -> list[float]:
        return [float(self.p[0]), float(self.p[1]), float(self.p[2]), float(self.theta)]

    @classmethod
    def from_csv_row(cls, row: Sequence) -> Pose:
        x, y, z, t = (float(v) for v in row)
        return cls([x, y, z], t)

    def __repr__(self) -> str:
        x, y, z = self.p
        return f"Pose(p=[{x:.6g}, {y:.6g}, {z:.6g}], theta={self.theta:.6g})"


def compose(a: Pose, b: Pose) -> Pose:
    return Pose(a.p + rot_z(a.theta) @ b.p, a.theta + b.theta)


def inverse(g: Pose) -> Pose:
    return Pose(-(rot_z(-g.theta) @ g.p), -g.theta)


def relative(a: Pose, b: Pose) -> Pose:
    """``a^{-1} b``."""
    return Pose(rot_z(-a.theta) @ (b.p - a.p), b.theta - a.theta)


def hat(V: Sequence[float]) -> np.ndarray:
    """4x4 twist matrix of a body velocity ``[vx, vy, vz, omega]``."""
    vx, vy, vz, w = (float(c) for c in V)
    return np.array(
        [
            [0.0, -w, 0.0, vx],
            [w, 0.0, 0.0, vy],
            [0.0, 0.0, 0.0, vz],
            [0.0, 0.0, 0.0, 0.0],
        ]
    )


def vee(M: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Inverse of :func:`hat`; rejects matrices outside the twist pattern."""
    M = np.asarray(M, dtype=float)
    if M.shape != (4, 4):
        raise ValueError(f"expected a 4x4 matrix, got shape {M.shape}")
    mask = np.zeros((4, 4), dtype=bool)
    mask[0, 1] = mask[1, 0] = True
    mask[:3, 3] = True
    if np.any(np.abs(M[~mask]) > tol) or abs(M[0, 1] + M[1, 0]) > tol:
        raise ValueError("matrix is not a z-axis twist")
    return np.array([M[0, 3], M[1, 3], M[2, 3], M[1, 0]])


def _planar_integral(x: float) -> tuple[float, float]:
    # sin(x)/x and (1 - cos(x))/x, series near zero
    if abs(x) < 1e-4:
        x2 = x * x
        return 1.0 - x2 / 6.0, x / 2.0 - x * x2 / 24.0
    return math.sin(x) / x, (1.0 - math.cos(x)) / x


def integrate(g: Pose, V: Sequence[float], dt: float) -> Pose:
    """Exact flow of ``gdot = g hat(V)`` for a constant body velocity over ``dt``."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    vx, vy, vz, w = (float(c) for c in V)
    a, b = _planar_integral(w * dt)
    body = np.array([dt * (a * vx - b * vy), dt * (b * vx + a * vy), vz * dt])
    return Pose(g.p + rot_z(g.theta) @ body, g.theta + w * dt)


def vec_of(g: Pose) -> np.ndarray:
    """Error coordinates ``[p, sin(theta)]``."""
    return np.array([g.p[0], g.p[1], g.p[2], math.sin(g.theta)])


def adjoint(theta: float) -> np.ndarray:
    ad = np.eye(4)
    ad[:3, :3] = rot_z(theta)
    return ad


def phi(theta: float) -> float:
    """Half the squared Frobenius distance between I3 and the yaw rotation."""
    return 2.0 * (1.0 - math.cos(theta))
