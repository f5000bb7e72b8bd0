"""Expert regions and per-drone training data."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..gp_expert import Dataset
from ..io import noise_std
from .target import TargetMotion, rollout


class EmptySectorError(ValueError):
    def __init__(self, drone: int):
        super().__init__(f"expert region of drone {drone} contains no trajectory samples")
        self.drone = drone


@dataclass(frozen=True)
class ExpertRegions:
    """Angular sectors about the origin; drone ``k`` owns ``[b_k, b_{k+1})`` (degrees, cyclic)."""

    boundaries_deg: tuple = (90.0, 210.0, 330.0)
    samples_per_drone: tuple = (10, 10, 10)

    def __post_init__(self):
        b = tuple(float(x) for x in self.boundaries_deg)
        m = tuple(int(x) for x in self.samples_per_drone)
        if len(b) < 1 or len(m) != len(b):
            raise ValueError("need one boundary and one sample count per drone")
        if any(x < 1 for x in m):
            raise ValueError("each drone needs at least one sample")
        if any(y <= x for x, y in zip(b, b[1:])) or b[-1] - b[0] >= 360.0:
            raise ValueError("sector boundaries must increase and span less than a full turn")
        object.__setattr__(self, "boundaries_deg", b)
        object.__setattr__(self, "samples_per_drone", m)

    @classmethod
    def uniform(cls, n: int, samples: int = 10, start_deg: float = 90.0) -> ExpertRegions:
        return cls(tuple(start_deg + 360.0 * k / n for k in range(n)), (samples,) * n)

    @classmethod
    def from_json(cls, obj: dict, n: int) -> ExpertRegions:
        m = obj.get("samples_per_drone", 10)
        if isinstance(m, int):
            m = (m,) * n
        b = obj.get("boundaries_deg")
        if b is None:
            return cls(tuple(90.0 + 360.0 * k / n for k in range(n)), tuple(m))
        return cls(tuple(b), tuple(m))

    @property
    def n(self) -> int:
        return len(self.boundaries_deg)

    def sector_of(self, xy: np.ndarray) -> np.ndarray:
        xy = np.atleast_2d(xy)
        ang = np.degrees(np.arctan2(xy[:, 1], xy[:, 0]))
        rel = np.mod(ang - self.boundaries_deg[0], 360.0)
        edges = np.mod(np.array(self.boundaries_deg) - self.boundaries_deg[0], 360.0)
        return np.searchsorted(edges, rel, side="right") - 1


def _select_by_arclength(points: np.ndarray, idx: np.ndarray, m: int) -> np.ndarray:
    """Pick ``m`` of the in-sector samples ``idx`` spread evenly in arc length.

    Arc length only accumulates between consecutive samples that are both in
    the sector, so separate passes through the region are stitched together.
    """
    if m >= len(idx):
        return idx
    seg = np.linalg.norm(np.diff(points[idx], axis=0), axis=1)
    seg[np.diff(idx) != 1] = 0.0
    s = np.concatenate([[0.0], np.cumsum(seg)])
    if s[-1] <= 0:
        picks = np.linspace(0, len(idx) - 1, m).round().astype(int)
    else:
        picks = np.searchsorted(s, (np.arange(m) + 0.5) / m * s[-1])
        picks = np.clip(picks, 0, len(idx) - 1)
    return idx[picks]


def generate_dataset(
    target: TargetMotion,
    regions: ExpertRegions,
    noise_var: float,
    seed: int,
    duration: float = 100.0,
    dt: float = 0.01,
) -> list[Dataset]:
    """Noisy body-velocity observations at true target poses, split by expert region."""
    traj = rollout(target, duration, dt)
    x = traj[:, 1:5].copy()
    x[:, 3] = (x[:, 3] + math.pi) % (2 * math.pi) - math.pi
    x[x[:, 3] == -math.pi, 3] = math.pi
    sectors = regions.sector_of(x[:, :2])
    rng = np.random.default_rng(seed)
    sigma = math.sqrt(noise_var)
    sn = noise_std(noise_var)
    out = []
    for k in range(regions.n):
        idx = np.flatnonzero(sectors == k)
        if len(idx) == 0:
            raise EmptySectorError(k)
        sel = _select_by_arclength(x[:, :3], idx, regions.samples_per_drone[k])
        X = x[sel]
        V = np.array([target.body_velocity_flat(traj[i, 0], traj[i, 1:5]) for i in sel])
        Y = V + (rng.normal(0.0, sigma, size=V.shape) if sigma > 0 else 0.0)
        out.append(Dataset(X, Y, np.full(4, sn)))
    return out
