"""Pinhole projection of target feature points and the visibility test.

The estimation error fed to the observer is computed from the relative pose
directly; the camera model decides whether a drone belongs to the visibility
set and, optionally, injects pixel noise into that error.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geometry import Pose, compose, inverse, vec_of


class DepthError(ValueError):
    pass


@dataclass(frozen=True)
class CameraModel:
    lam: float = 1.0
    image_half_extent: tuple = (1.0, 1.0)
    z_min: float = 0.05

    def __post_init__(self):
        if self.lam <= 0 or self.z_min <= 0:
            raise ValueError("focal length and minimum depth must be positive")
        ext = tuple(float(x) for x in self.image_half_extent)
        if len(ext) != 2 or min(ext) <= 0:
            raise ValueError("image bounds must be two positive numbers")
        object.__setattr__(self, "image_half_extent", ext)

    @classmethod
    def from_json(cls, obj: dict) -> CameraModel:
        return cls(
            lam=obj.get("lambda", 1.0),
            image_half_extent=tuple(obj.get("image_half_extent", (1.0, 1.0))),
            z_min=obj.get("z_min", 0.05),
        )


@dataclass(frozen=True, eq=False)
class FeatureSet:
    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError("feature points must be an (m, 3) array")
        if len(pts) < 4:
            raise ValueError("at least 4 feature points are required")
        for a, b, c in itertools.combinations(pts[:4], 3):
            if np.linalg.norm(np.cross(b - a, c - a)) < 1e-9:
                raise ValueError("three of the first four feature points are collinear")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    @property
    def m(self) -> int:
        return len(self.points)

    @classmethod
    def square(cls, half: float = 0.1) -> FeatureSet:
        h = half
        return cls([[h, h, 0.0], [-h, h, 0.0], [-h, -h, 0.0], [h, -h, 0.0]])


@dataclass(frozen=True)
class Observation:
    """Outcome of imaging the target: either the stacked features or the first failure."""

    visible: bool
    f: Optional[np.ndarray] = None
    failed_point: Optional[int] = None
    reason: str = ""
    uv: Optional[np.ndarray] = None


def project(p_cam, cam: CameraModel) -> np.ndarray:
    x, y, z = (float(c) for c in p_cam)
    if z < cam.z_min:
        raise DepthError(f"depth {z:.4g} below z_min={cam.z_min}")
    return (cam.lam / z) * np.array([x, y])


def camera_points(g_i0: Pose, fs: FeatureSet) -> np.ndarray:
    return fs.points @ g_i0.rotation().T + g_i0.p


def feature_vector(g_i0: Pose, fs: FeatureSet, cam: CameraModel) -> Observation:
    """Project every feature; report the first point that is too close or out of frame.

    ``uv`` holds whatever projections were computable (NaN otherwise) so that
    traces can record partial views.
    """
    pts = camera_points(g_i0, fs)
    uv = np.full((fs.m, 2), np.nan)
    failed, reason = None, ""
    umax, vmax = cam.image_half_extent
    for k, pc in enumerate(pts):
        if pc[2] < cam.z_min:
            if failed is None:
                failed, reason = k, "depth"
            continue
        uv[k] = project(pc, cam)
        if failed is None and (abs(uv[k, 0]) > umax or abs(uv[k, 1]) > vmax):
            failed, reason = k, "out_of_frame"
    if failed is not None:
        return Observation(False, None, failed, reason, uv)
    return Observation(True, uv.reshape(-1), None, "", uv)


def estimation_error(g_bar_i0: Pose, g_i0: Pose) -> np.ndarray:
    return vec_of(compose(inverse(g_bar_i0), g_i0))


def feature_residual(f, f_bar) -> np.ndarray:
    f, f_bar = np.asarray(f, dtype=float), np.asarray(f_bar, dtype=float)
    if f.shape != f_bar.shape:
        raise ValueError(f"feature vectors differ in length: {f.shape} vs {f_bar.shape}")
    return f - f_bar


def _stacked(g: Pose, fs: FeatureSet, cam: CameraModel) -> np.ndarray:
    pts = camera_points(g, fs)
    return (cam.lam / pts[:, 2:3] * pts[:, :2]).reshape(-1)


def pose_jacobian(g_i0: Pose, fs: FeatureSet, cam: CameraModel, h: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of the stacked features w.r.t. a right perturbation
    ``g_i0 * Pose(dp, dtheta)``, columns ordered ``(dx, dy, dz, dtheta)``."""
    J = np.empty((2 * fs.m, 4))
    for k in range(4):
        step = np.zeros(4)
        step[k] = h
        plus = _stacked(compose(g_i0, Pose.from_flat(step)), fs, cam)
        minus = _stacked(compose(g_i0, Pose.from_flat(-step)), fs, cam)
        J[:, k] = (plus - minus) / (2 * h)
    return J


def noisy_estimation_error(
    g_bar_i0: Pose,
    g_i0: Pose,
    fs: FeatureSet,
    cam: CameraModel,
    pixel_std: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Estimation error corrupted by Gaussian pixel noise.

    The noise is mapped back to a pose perturbation by least squares on the
    image Jacobian and added to the exact error to first order.
    """
    e = estimation_error(g_bar_i0, g_i0)
    if pixel_std <= 0:
        return e
    noise = rng.normal(0.0, pixel_std, size=2 * fs.m)
    J = pose_jacobian(g_i0, fs, cam)
    delta, *_ = np.linalg.lstsq(J, noise, rcond=None)
    return e + delta


def visible_batch(p_i0: np.ndarray, theta_i0: np.ndarray, fs: FeatureSet, cam: CameraModel) -> np.ndarray:
    """Visibility flags for many relative poses at once (same rule as :func:`feature_vector`)."""
    c, s = np.cos(theta_i0)[:, None], np.sin(theta_i0)[:, None]
    P = fs.points
    x = c * P[:, 0] - s * P[:, 1] + p_i0[:, 0:1]
    y = s * P[:, 0] + c * P[:, 1] + p_i0[:, 1:2]
    z = P[:, 2] + p_i0[:, 2:3]
    ok = z >= cam.z_min
    zs = np.where(ok, z, 1.0)
    umax, vmax = cam.image_half_extent
    ok &= np.abs(cam.lam * x / zs) <= umax
    ok &= np.abs(cam.lam * y / zs) <= vmax
    return ok.all(axis=1)
