"""Product-of-experts fusion of neighbourhood GP predictions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .gp_expert import VAR_FLOOR, BoundReport, Prediction


@dataclass(frozen=True, eq=False)
class FusedPrediction:
    mu: np.ndarray
    var: np.ndarray
    weights: np.ndarray  # (members, channels)


def fuse_arrays(mu: np.ndarray, var: np.ndarray, var_floor: float = VAR_FLOOR):
    """Fuse stacked member predictions ``mu``/``var`` of shape (K, 4).

    Returns ``(mu_poe, var_poe, weights)``. A single member is passed through
    unchanged, so fusing one expert is bit-identical to using it alone.
    """
    mu = np.asarray(mu, dtype=float)
    var = np.asarray(var, dtype=float)
    if mu.ndim != 2 or mu.shape[0] == 0:
        raise ValueError("fusion needs at least one member")
    if mu.shape[0] == 1:
        return mu[0].copy(), var[0].copy(), np.ones_like(mu)
    prec = 1.0 / np.maximum(var, var_floor)
    var_poe = 1.0 / prec.sum(axis=0)
    w = var_poe[None, :] * prec
    return (w * mu).sum(axis=0), var_poe, w


def fuse_neighbourhoods(mu: np.ndarray, var: np.ndarray, members: np.ndarray, var_floor: float = VAR_FLOOR):
    """Fuse for every drone at once; ``members[i, k]`` is 1 when expert ``k`` is in
    drone ``i``'s neighbourhood. Rows with one member pass through unchanged."""
    prec = 1.0 / np.maximum(var, var_floor)
    var_poe = 1.0 / (members @ prec)
    mu_poe = var_poe * (members @ (prec * mu))
    single = members.sum(axis=1) == 1
    if single.any():
        src = members[single].argmax(axis=1)
        mu_poe[single] = mu[src]
        var_poe[single] = var[src]
    return mu_poe, var_poe


def fuse(members: Sequence[Prediction], var_floor: float = VAR_FLOOR) -> FusedPrediction:
    if len(members) == 0:
        raise ValueError("fusion needs at least one member")
    mu = np.stack([m.mu for m in members])
    var = np.stack([m.var for m in members])
    return FusedPrediction(*fuse_arrays(mu, var, var_floor))


def fused_error_radius(
    reports: Sequence[BoundReport], poses: Sequence, self_pose
) -> np.ndarray:
    """Per-channel surrogate bound on the fused prediction error of one drone.

    ``max_k delta_bar + max_k L_mu * max_k ||x_k - x_self||`` over the members,
    where ``x_k`` is the input each member evaluated its expert at.
    """
    if len(reports) == 0:
        raise ValueError("need at least one member report")
    delta_bar = np.max([r.delta_bar for r in reports], axis=0)
    l_mu = np.max([r.l_mu for r in reports], axis=0)
    x0 = np.asarray(self_pose, dtype=float)
    spread = max(float(np.linalg.norm(np.asarray(x, dtype=float) - x0)) for x in poses)
    return delta_bar + l_mu * spread


def aggregate_norms(l_mu_per_channel, delta_bar_per_channel) -> tuple[float, float]:
    return (
        float(np.linalg.norm(np.asarray(l_mu_per_channel, dtype=float))),
        float(np.linalg.norm(np.asarray(delta_bar_per_channel, dtype=float))),
    )
