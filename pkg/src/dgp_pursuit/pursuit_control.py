"""Passivity-based pursuit/observer control law and the error-pose dynamics.

Per drone the state is the pair of error poses ``g_c`` (control error, the
estimated relative target pose seen from the desired one) and ``g_e``
(estimation error, estimate versus truth). Inputs are stacked as
``u = [u_c; u_e]``.

The ``*_batch`` functions evaluate the same expressions for all drones at
once on ``(n, 3)`` positions and ``(n,)`` angles; the simulator uses them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geometry import Pose, adjoint, compose, hat, inverse, phi, relative, vec_of

PRESETS = {
    "sim": {"k_c": [100.0] * 4, "k_e": [100.0] * 4, "k_s": 70.0},
    "experiment": {"k_c": [13.0, 13.0, 13.0, 7.0], "k_e": [8.0] * 4, "k_s": 1.0},
}


@dataclass(frozen=True, eq=False)
class Gains:
    k_c: np.ndarray
    k_e: np.ndarray
    k_s: float

    def __post_init__(self):
        k_c = np.broadcast_to(np.asarray(self.k_c, dtype=float), (4,)).copy()
        k_e = np.broadcast_to(np.asarray(self.k_e, dtype=float), (4,)).copy()
        if np.any(k_c <= 0) or np.any(k_e <= 0) or self.k_s <= 0:
            raise ValueError("all gains must be strictly positive")
        object.__setattr__(self, "k_c", k_c)
        object.__setattr__(self, "k_e", k_e)
        object.__setattr__(self, "k_s", float(self.k_s))

    @classmethod
    def preset(cls, name: str) -> Gains:
        try:
            return cls(**PRESETS[name])
        except KeyError:
            raise ValueError(f"unknown gain preset {name!r}") from None

    @classmethod
    def from_json(cls, obj) -> Gains:
        if isinstance(obj, str):
            return cls.preset(obj)
        if "preset" in obj:
            base = dict(PRESETS[obj["preset"]])
            base.update({k: v for k, v in obj.items() if k != "preset"})
            obj = base
        return cls(obj["k_c"], obj["k_e"], obj["k_s"])

    def to_json(self) -> dict:
        return {"k_c": self.k_c.tolist(), "k_e": self.k_e.tolist(), "k_s": self.k_s}


@dataclass(frozen=True)
class ErrorState:
    g_c: Pose
    g_e: Pose

    @classmethod
    def zero(cls) -> ErrorState:
        return cls(Pose.identity(), Pose.identity())

    @property
    def e_c(self) -> np.ndarray:
        return vec_of(self.g_c)

    @property
    def e_e(self) -> np.ndarray:
        return vec_of(self.g_e)

    @property
    def e(self) -> np.ndarray:
        return np.concatenate([self.e_c, self.e_e])


@dataclass(frozen=True, eq=False)
class ControlInput:
    u: np.ndarray

    @property
    def u_c(self) -> np.ndarray:
        return self.u[:4]

    @property
    def u_e(self) -> np.ndarray:
        return self.u[4:]


def n_matrix(theta_c: float) -> np.ndarray:
    N = np.eye(8)
    N[4:, :4] = -adjoint(theta_c)
    return N


def b_matrix(theta_c: float) -> np.ndarray:
    return np.vstack([adjoint(-theta_c), np.eye(4)])


def a_matrix(theta_e: float, theta_c: float) -> np.ndarray:
    return np.vstack([adjoint(-theta_e) @ adjoint(-theta_c), adjoint(-theta_e)])


def k_matrix(g: Gains, v: int) -> np.ndarray:
    return np.diag(np.concatenate([g.k_c, v * g.k_e]))


def consensus_term(self_est: Pose, neighbor_ests: Sequence[Pose], k_s: float) -> np.ndarray:
    out = np.zeros(4)
    for other in neighbor_ests:
        out += k_s * vec_of(relative(self_est, other))
    return out


def control_law(
    e: ErrorState, g: Gains, v: int, consensus, mu_poe=None
) -> ControlInput:
    """``u = -K N e - B consensus - A mu``; the feedforward term is dropped when ``mu_poe`` is None."""
    tc, te = e.g_c.theta, e.g_e.theta
    u = -k_matrix(g, v) @ n_matrix(tc) @ e.e - b_matrix(tc) @ np.asarray(consensus, dtype=float)
    if mu_poe is not None:
        u = u - a_matrix(te, tc) @ np.asarray(mu_poe, dtype=float)
    return ControlInput(u)


def error_dynamics(e: ErrorState, u: ControlInput, V_target) -> tuple[np.ndarray, np.ndarray]:
    """Matrix derivatives ``(d g_c/dt, d g_e/dt)``."""
    gc, ge = e.g_c.matrix(), e.g_e.matrix()
    uc, ue = hat(u.u_c), hat(u.u_e)
    dge = ue @ ge + ge @ hat(V_target)
    dgc = uc @ gc - gc @ ue
    return dgc, dge


def storage(e: ErrorState) -> float:
    return 0.5 * (
        float(e.g_e.p @ e.g_e.p) + phi(e.g_e.theta) + float(e.g_c.p @ e.g_c.p) + phi(e.g_c.theta)
    )


def total_storage(states: Sequence[ErrorState]) -> float:
    return sum(storage(s) for s in states)


def reconstruct_poses(g_w0: Pose, g_di: Pose, e: ErrorState):
    """Recover ``(g_wi, gbar_i0, gbar_wi, g_i0)`` from the target pose and error state."""
    gbar_i0 = compose(g_di, e.g_c)
    g_i0 = compose(gbar_i0, e.g_e)
    g_wi = compose(g_w0, inverse(g_i0))
    gbar_wi = compose(g_wi, gbar_i0)
    return g_wi, gbar_i0, gbar_wi, g_i0


# --- batched forms -----------------------------------------------------------


def rotate_batch(theta: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Apply Ad_{R(theta_i)} to each row of ``x`` (n, 4) (or R to (n, 3))."""
    c, s = np.cos(theta), np.sin(theta)
    out = x.copy()
    out[:, 0] = c * x[:, 0] - s * x[:, 1]
    out[:, 1] = s * x[:, 0] + c * x[:, 1]
    return out


def vec_batch(p: np.ndarray, theta: np.ndarray) -> np.ndarray:
    return np.column_stack([p, np.sin(theta)])


def control_law_batch(
    pc, tc, e_c, e_e, te, k_c, k_e, v, consensus, mu=None
) -> tuple[np.ndarray, np.ndarray]:
    """All drones at once; returns ``(u_c, u_e)`` each of shape (n, 4).

    ``e_e`` is passed separately from the true estimation-error pose so the
    measured (possibly noisy) error can drive the observer.
    """
    lower = e_e - rotate_batch(tc, e_c)
    u_c = -k_c * e_c - rotate_batch(-tc, consensus)
    u_e = -(v[:, None] * k_e) * lower - consensus
    if mu is not None:
        a_low = rotate_batch(-te, mu)
        u_c = u_c - rotate_batch(-tc, a_low)
        u_e = u_e - a_low
    return u_c, u_e


def error_rates_batch(pc, tc, pe, te, u_c, u_e, V):
    """Coordinate form of :func:`error_dynamics` for every drone.

    Returns ``(dpc, dtc, dpe, dte)``. ``V`` is the target body velocity (4,).
    """
    wc, we = u_c[:, 3], u_e[:, 3]
    dpe = u_e[:, :3].copy()
    dpe[:, 0] -= we * pe[:, 1]
    dpe[:, 1] += we * pe[:, 0]
    ce, se = np.cos(te), np.sin(te)
    dpe[:, 0] += ce * V[0] - se * V[1]
    dpe[:, 1] += se * V[0] + ce * V[1]
    dpe[:, 2] += V[2]
    dte = we + V[3]

    dpc = u_c[:, :3].copy()
    dpc[:, 0] -= wc * pc[:, 1]
    dpc[:, 1] += wc * pc[:, 0]
    cc, sc = np.cos(tc), np.sin(tc)
    dpc[:, 0] -= cc * u_e[:, 0] - sc * u_e[:, 1]
    dpc[:, 1] -= sc * u_e[:, 0] + cc * u_e[:, 1]
    dpc[:, 2] -= u_e[:, 2]
    dtc = wc - we
    return dpc, dtc, dpe, dte


def storage_batch(pc, tc, pe, te) -> np.ndarray:
    return 0.5 * ((pe * pe).sum(1) + 2 * (1 - np.cos(te)) + (pc * pc).sum(1) + 2 * (1 - np.cos(tc)))


RK4_REAL_LIMIT = 2.785293563405282


def linear_rates(g: Gains, laplacian: np.ndarray) -> np.ndarray:
    """Eigenvalues of the closed loop linearised at zero error, for v_i = 1 and v_i = 0.

    Near the origin the network decouples along the Laplacian eigenvectors;
    each mode and channel gives a 2x2 system in ``(e_c, e_e)``.
    """
    out = []
    for lam in np.linalg.eigvalsh(laplacian):
        for ch in range(4):
            kc, ke, ks = g.k_c[ch], g.k_e[ch], g.k_s
            for vis in (1.0, 0.0):
                A = np.array([[-kc - vis * ke, vis * ke], [vis * ke, -vis * ke - ks * lam]])
                out.extend(np.linalg.eigvals(A).real)
    return np.array(out)


def max_stable_dt(g: Gains, laplacian: np.ndarray) -> float:
    """Largest RK4 step keeping every linearised mode inside the stability interval."""
    return RK4_REAL_LIMIT / float(np.abs(linear_rates(g, laplacian)).max())
