"""Target velocity fields: Duffing-like oscillation, square track, constant twist."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..geometry import Pose, adjoint, compose, inverse, rot_z, vec_of, wrap_angle

KINDS = ("duffing", "square_track", "constant")


@dataclass(frozen=True, eq=False)
class TargetMotion:
    kind: str = "duffing"
    # duffing parameters (unrelated to the GP's delta/gamma/beta)
    delta: float = 0.1
    gamma: float = 0.39
    omega: float = 0.4
    alpha: float = -1.0
    beta: float = 1.0
    initial_pose: Pose = field(default_factory=lambda: Pose([-0.3, -1.0, 0.0], 0.0))
    velocity: tuple = (0.0, 0.0, 0.0, 0.0)  # constant kind
    side: float = 1.0  # square_track
    speed: float = 0.1
    track_gain: float = 0.05
    region_low: tuple = (-2.5, -1.5, -1.5)
    region_high: tuple = (2.5, 1.5, 1.5)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown target kind {self.kind!r}")
        vals = [self.delta, self.gamma, self.omega, self.alpha, self.beta, self.side, self.speed]
        if not all(math.isfinite(v) for v in vals) or not np.all(np.isfinite(self.velocity)):
            raise ValueError("target parameters must be finite")

    @classmethod
    def from_json(cls, obj: dict) -> TargetMotion:
        kw = dict(obj)
        if "initial_pose" in kw:
            kw["initial_pose"] = Pose.from_json(kw["initial_pose"])
        for k in ("velocity", "region_low", "region_high"):
            if k in kw:
                kw[k] = tuple(kw[k])
        return cls(**kw)

    def body_velocity(self, t: float, pose: Pose) -> np.ndarray:
        if self.kind == "duffing":
            return target_velocity_duffing(pose, self)
        if self.kind == "square_track":
            return target_velocity_square(pose, *square_schedule(t, self.side, self.speed), gain=self.track_gain)
        return np.asarray(self.velocity, dtype=float).copy()

    def body_velocity_flat(self, t: float, x: np.ndarray) -> np.ndarray:
        """Same as :meth:`body_velocity` on a raw ``[px, py, pz, theta]`` vector."""
        if self.kind == "duffing":
            return _duffing(x[0], x[1], x[2], x[3], self)
        return self.body_velocity(t, Pose(x[:3], x[3]))

    def in_region(self, p) -> bool:
        p = np.asarray(p)
        return bool(np.all(p >= np.asarray(self.region_low)) and np.all(p <= np.asarray(self.region_high)))


def _duffing(x, y, z, theta, m: TargetMotion) -> np.ndarray:
    vz = 0.2 * (-m.delta * z - m.alpha * y - 3.0 * m.beta * x * x * y - m.gamma * m.omega * math.sin(theta))
    c, s = math.cos(theta), math.sin(theta)
    wx, wy = 0.5 * y, 0.5 * z
    return np.array([c * wx + s * wy, -s * wx + c * wy, 0.5 * vz, m.omega])


def target_velocity_duffing(g_w0: Pose, m: TargetMotion = TargetMotion()) -> np.ndarray:
    """``0.5 * Ad_{R^T(theta)} [y, z, v_z, 2*omega]`` evaluated at the target pose."""
    return _duffing(g_w0.p[0], g_w0.p[1], g_w0.p[2], g_w0.theta, m)


def square_schedule(t: float, side: float = 1.0, speed: float = 0.1) -> tuple[Pose, np.ndarray]:
    """Desired pose and desired body velocity on a square centred at the origin.

    Starts at the corner (-side/2, -side/2) and runs counter-clockwise, turning
    once per lap.
    """
    edge_time = side / speed
    lap = 4.0 * edge_time
    tau = t % lap
    k = min(int(tau // edge_time), 3)
    s = (tau - k * edge_time) * speed
    h = side / 2.0
    corners = [(-h, -h), (h, -h), (h, h), (-h, h)]
    dirs = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)]
    cx, cy = corners[k]
    dx, dy = dirs[k]
    w = 2.0 * math.pi / lap
    theta_d = wrap_angle(w * t)
    world_v = np.array([dx * speed, dy * speed, 0.0])
    v_body = rot_z(-theta_d) @ world_v
    return Pose([cx + dx * s, cy + dy * s, 0.0], theta_d), np.array([*v_body, w])


def target_velocity_square(g_w0: Pose, g_d: Pose, v_d, gain: float = 0.05) -> np.ndarray:
    """Tracking controller driving the target along the desired schedule."""
    err = vec_of(compose(g_w0, inverse(g_d)))
    return adjoint(-g_w0.theta) @ (adjoint(g_d.theta) @ np.asarray(v_d, dtype=float) - gain * err)


def world_rate(x: np.ndarray, V: np.ndarray) -> np.ndarray:
    """Time derivative of ``[p, theta]`` for a body velocity ``V``."""
    c, s = math.cos(x[3]), math.sin(x[3])
    return np.array([c * V[0] - s * V[1], s * V[0] + c * V[1], V[2], V[3]])


def rollout(m: TargetMotion, duration: float, dt: float) -> np.ndarray:
    """RK4 trajectory of the target as rows ``[t, px, py, pz, theta]`` (theta unwrapped)."""
    steps = int(round(duration / dt))
    out = np.empty((steps + 1, 5))
    x = m.initial_pose.flat()
    t = 0.0
    out[0] = [t, *x]
    for k in range(steps):
        k1 = world_rate(x, m.body_velocity_flat(t, x))
        k2 = world_rate(x + 0.5 * dt * k1, m.body_velocity_flat(t + 0.5 * dt, x + 0.5 * dt * k1))
        k3 = world_rate(x + 0.5 * dt * k2, m.body_velocity_flat(t + 0.5 * dt, x + 0.5 * dt * k2))
        k4 = world_rate(x + dt * k3, m.body_velocity_flat(t + dt, x + dt * k3))
        x = x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        t = (k + 1) * dt
        out[k + 1] = [t, *x]
    return out
