"""Closed-loop simulation of the pursuit network.

The integrated state is the target pose plus every drone's error poses
``(g_c, g_e)`` in ``(p, theta)`` coordinates. World poses of the drones are
reconstructed from it whenever the camera model needs them. Control inputs
are re-evaluated at every RK4 stage from a common snapshot of all drones, so
the update does not depend on drone ordering. Visibility flags and pixel
noise are sampled once per step and held over it.
"""

from __future__ import annotations

import io
import json
import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..dgp_fusion import fuse_neighbourhoods
from ..geometry import Pose, compose
from ..gp_expert import (
    BoundReport,
    Dataset,
    GpExpert,
    HyperParams,
    bound_report,
    box_grid,
    ExpertBank,
    fit,
    optimize_hyperparams,
)
from ..io import neighbor_message
from ..network import adjacency, laplacian, neighbors
from ..pursuit_control import (
    control_law_batch,
    error_rates_batch,
    max_stable_dt,
    rotate_batch,
    storage_batch,
    vec_batch,
)
from ..vision import estimation_error, feature_vector, noisy_estimation_error, visible_batch
from .config import GP_MODES, ScenarioConfig, GpSettings
from .dataset import generate_dataset
from .target import world_rate

log = logging.getLogger(__name__)

STATUS_OK = "ok"
STATUS_THETA = "theta_violation"
STATUS_LOST = "target_lost"


def thread_cap() -> int:
    try:
        return max(1, int(os.environ.get("DGP_PURSUIT_THREADS", "1")))
    except ValueError:
        return 1


def initial_hyperparams(gp: GpSettings) -> HyperParams:
    return HyperParams(np.full(4, gp.init_sigma_f), np.full((4, 4), gp.init_lengthscale))


def train_experts(
    datasets: Sequence[Dataset],
    gp: GpSettings,
    hyperparams: Optional[Sequence[HyperParams]] = None,
) -> tuple[list[GpExpert], float]:
    """Fit one expert per dataset (optimising hyperparameters unless given).

    Experts are independent; up to ``DGP_PURSUIT_THREADS`` are trained at once.
    Returns the experts and the wall-clock training time.
    """
    start = time.perf_counter()

    def one(k):
        h = hyperparams[k] if hyperparams is not None else initial_hyperparams(gp)
        if hyperparams is None and gp.optimize:
            h = optimize_hyperparams(datasets[k], h, gp.budget)
        return fit(datasets[k], h, gp.var_floor)

    workers = min(thread_cap(), len(datasets))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            experts = list(pool.map(one, range(len(datasets))))
    else:
        experts = [one(k) for k in range(len(datasets))]
    return experts, time.perf_counter() - start


def expert_reports(experts: Sequence[GpExpert], gp: GpSettings) -> list[BoundReport]:
    grid = box_grid(gp.grid_low, gp.grid_high, gp.grid_points)
    return [bound_report(e, gp.delta, grid, gp.beta_formula, **gp.beta_kwargs()) for e in experts]


def scenario_datasets(cfg: ScenarioConfig, seed: Optional[int] = None) -> list[Dataset]:
    return generate_dataset(
        cfg.target,
        cfg.regions,
        cfg.gp.noise_var,
        cfg.seed if seed is None else seed,
        cfg.gp.dataset_duration,
    )


@dataclass
class RunTrace:
    n: int
    t: np.ndarray
    e_c: np.ndarray  # (steps, n, 4)
    e_e: np.ndarray
    u: np.ndarray  # (steps, n, 8)
    mu: np.ndarray  # (steps, n, 4); NaN when the mode has no feedforward
    var: np.ndarray
    radius: np.ndarray
    v: np.ndarray  # (steps, n)
    storage: np.ndarray  # (steps, n)
    target: np.ndarray  # (steps, 4) [px, py, pz, theta]
    V: np.ndarray  # (steps, 4) true target body velocity
    estimate: np.ndarray  # (steps, n, 4) each drone's estimate of the target pose
    own_mu: np.ndarray  # (steps, n, 4) each drone's own expert output (the message it sends)
    own_var: np.ndarray
    features: list = field(default_factory=list)

    @property
    def e_norm_sq(self) -> np.ndarray:
        return (self.e_c**2).sum(-1) + (self.e_e**2).sum(-1)

    @property
    def e_norm(self) -> np.ndarray:
        """Norm of the network error vector at each step."""
        return np.sqrt(self.e_norm_sq.sum(-1))

    @property
    def total_storage(self) -> np.ndarray:
        return self.storage.sum(-1)

    COLUMNS = (
        ["step", "t", "drone", "v"]
        + [f"ec{k}" for k in range(1, 5)]
        + [f"ee{k}" for k in range(1, 5)]
        + ["e_norm_sq", "S_i"]
        + [f"uc{k}" for k in range(1, 5)]
        + [f"ue{k}" for k in range(1, 5)]
        + [f"mu{k}" for k in range(1, 5)]
        + [f"var{k}" for k in range(1, 5)]
        + [f"radius{k}" for k in range(1, 5)]
        + [f"V{k}" for k in range(1, 5)]
        + ["tx", "ty", "tz", "ttheta"]
    )

    def rows(self) -> np.ndarray:
        steps, n = len(self.t), self.n
        step = np.repeat(np.arange(steps), n)
        drone = np.tile(np.arange(n), steps)
        return np.column_stack(
            [
                step,
                np.repeat(self.t, n),
                drone,
                self.v.reshape(-1),
                self.e_c.reshape(-1, 4),
                self.e_e.reshape(-1, 4),
                self.e_norm_sq.reshape(-1),
                self.storage.reshape(-1),
                self.u.reshape(-1, 8),
                self.mu.reshape(-1, 4),
                self.var.reshape(-1, 4),
                self.radius.reshape(-1, 4),
                np.repeat(self.V, n, axis=0),
                np.repeat(self.target, n, axis=0),
            ]
        )

    def to_csv(self, path) -> None:
        buf = io.StringIO()
        np.savetxt(buf, self.rows(), fmt="%.17g", delimiter=",", header=",".join(self.COLUMNS), comments="")
        with open(path, "w", newline="") as fh:
            fh.write(buf.getvalue())

    def messages(self):
        """Neighbour messages ``{"drone", "mu", "var", "pose"}`` per step, as sent in GP modes."""
        for k in range(len(self.t)):
            yield [
                neighbor_message(i, self.own_mu[k, i], self.own_var[k, i], Pose.from_flat(self.estimate[k, i]))
                for i in range(self.n)
            ]

    def messages_to_jsonl(self, path) -> None:
        with open(path, "w", newline="") as fh:
            for k, msgs in enumerate(self.messages()):
                fh.write(json.dumps({"t": float(self.t[k]), "messages": msgs}) + "\n")

    def features_to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("t,drone,point,u,v,visible\n")
            for t, i, k, u, v, vis in self.features:
                fh.write(f"{t!r},{i},{k},{u!r},{v!r},{vis}\n")


@dataclass
class RunMetrics:
    mode: str
    status: str
    message: str
    steps: int
    squared_mean_e: float
    peak_e: list
    visibility_losses: int
    target_in_region: bool
    fit_seconds: float = 0.0
    sim_seconds: float = 0.0

    def to_json(self, timings: bool = True) -> dict:
        out = {
            "mode": self.mode,
            "status": self.status,
            "message": self.message,
            "steps": self.steps,
            "squared_mean_e": self.squared_mean_e,
            "peak_e": self.peak_e,
            "visibility_losses": self.visibility_losses,
            "target_in_region": self.target_in_region,
        }
        if timings:
            out["fit_seconds"] = self.fit_seconds
            out["sim_seconds"] = self.sim_seconds
        return out


class _ClosedLoop:
    """Right-hand side of the joint target/error ODE for one configuration."""

    def __init__(self, cfg: ScenarioConfig, experts, reports):
        self.cfg = cfg
        self.n = n = cfg.n
        self.mode = cfg.mode
        self.experts = experts
        self.reports = reports
        self.adj = adjacency(cfg.graph)
        self.members = [sorted({i} | neighbors(cfg.graph, i)) for i in range(n)]
        self.member_mask = self.adj + np.eye(n)
        self.bank = ExpertBank(experts) if experts else None
        g = cfg.gains
        self.k_c, self.k_e, self.k_s = g.k_c, g.k_e, g.k_s
        if reports:
            self.delta_bar = np.stack([r.delta_bar for r in reports])
            self.l_mu = np.stack([r.l_mu for r in reports])

    def unpack(self, y):
        n = self.n
        x = y[:4]
        pc = y[4 : 4 + 3 * n].reshape(n, 3)
        tc = y[4 + 3 * n : 4 + 4 * n]
        pe = y[4 + 4 * n : 4 + 7 * n].reshape(n, 3)
        te = y[4 + 7 * n : 4 + 8 * n]
        return x, pc, tc, pe, te

    @staticmethod
    def pack(x, pc, tc, pe, te):
        return np.concatenate([x, pc.reshape(-1), tc, pe.reshape(-1), te])

    def estimates(self, x, pe, te):
        """Each drone's estimate of the target pose, ``g_w0 g_e^{-1}``."""
        rel = x[3] - te
        est_p = x[:3] - rotate_batch(rel, pe)
        return est_p, rel

    def rhs(self, t, y, v, e_noise, diag=False):
        n = self.n
        x, pc, tc, pe, te = self.unpack(y)
        V = self.cfg.target.body_velocity_flat(t, x)

        est_p, est_t = self.estimates(x, pe, te)
        # pairwise vec(gbar_i^{-1} gbar_j), summed over neighbours
        dp = est_p[None, :, :] - est_p[:, None, :]
        c, s = np.cos(est_t)[:, None], np.sin(est_t)[:, None]
        rel = np.empty((n, n, 4))
        rel[..., 0] = c * dp[..., 0] + s * dp[..., 1]
        rel[..., 1] = -s * dp[..., 0] + c * dp[..., 1]
        rel[..., 2] = dp[..., 2]
        rel[..., 3] = np.sin(est_t[None, :] - est_t[:, None])
        consensus = self.k_s * np.einsum("ij,ijk->ik", self.adj, rel)

        mu = var = own_mu = own_var = None
        inputs = None
        if self.mode == "oracle":
            mu = np.broadcast_to(V, (n, 4))
        elif self.mode in GP_MODES:
            inputs = np.column_stack([est_p, _wrap(est_t)])
            own_mu, own_var = self.bank.predict(inputs)
            if self.mode == "local_gp":
                mu, var = own_mu, own_var
            else:
                mu, var = fuse_neighbourhoods(own_mu, own_var, self.member_mask, self.cfg.gp.var_floor)

        e_c = vec_batch(pc, tc)
        e_e = vec_batch(pe, te) + e_noise
        u_c, u_e = control_law_batch(pc, tc, e_c, e_e, te, self.k_c, self.k_e, v, consensus, mu)
        dpc, dtc, dpe, dte = error_rates_batch(pc, tc, pe, te, u_c, u_e, V)
        dy = self.pack(world_rate(x, V), dpc, dtc, dpe, dte)
        if not diag:
            return dy, None

        radius = np.full((n, 4), np.nan)
        if self.mode == "distributed_gp" and self.reports:
            for i, mem in enumerate(self.members):
                spread = np.linalg.norm(inputs[mem] - inputs[i], axis=1).max()
                radius[i] = self.delta_bar[mem].max(0) + self.l_mu[mem].max(0) * spread
        elif self.mode == "local_gp" and self.reports:
            radius = self.delta_bar.copy()
        info = {
            "V": V,
            "u": np.hstack([u_c, u_e]),
            "mu": np.full((n, 4), np.nan) if mu is None else np.array(mu),
            "var": np.full((n, 4), np.nan) if var is None else var,
            "radius": radius,
            "e_c": e_c,
            "e_e": vec_batch(pe, te),
            "estimate": np.column_stack([est_p, _wrap(est_t)]),
            "own_mu": np.full((n, 4), np.nan) if own_mu is None else own_mu,
            "own_var": np.full((n, 4), np.nan) if own_var is None else own_var,
            "storage": storage_batch(pc, tc, pe, te),
        }
        return dy, info


def _wrap(theta):
    w = np.remainder(theta + math.pi, 2 * math.pi) - math.pi
    return np.where(w == -math.pi, math.pi, w)


def _initial_state(cfg: ScenarioConfig) -> np.ndarray:
    x = cfg.target.initial_pose.flat()
    pc = np.array([e.g_c.p for e in cfg.initial_errors])
    tc = np.array([e.g_c.theta for e in cfg.initial_errors])
    pe = np.array([e.g_e.p for e in cfg.initial_errors])
    te = np.array([e.g_e.theta for e in cfg.initial_errors])
    return _ClosedLoop.pack(x, pc, tc, pe, te)


def prepare_experts(cfg: ScenarioConfig, experts=None, datasets=None, hyperparams=None):
    """Experts and bound reports for GP modes (trained on generated data if none given)."""
    if cfg.mode not in GP_MODES:
        return None, None, 0.0
    fit_seconds = 0.0
    if experts is None:
        if datasets is None:
            datasets = scenario_datasets(cfg)
        experts, fit_seconds = train_experts(datasets, cfg.gp, hyperparams)
    if len(experts) != cfg.n:
        raise ValueError(f"{len(experts)} experts for {cfg.n} drones")
    return experts, expert_reports(experts, cfg.gp), fit_seconds


def run(
    cfg: ScenarioConfig,
    experts: Optional[Sequence[GpExpert]] = None,
    datasets: Optional[Sequence[Dataset]] = None,
    hyperparams: Optional[Sequence[HyperParams]] = None,
    reports: Optional[Sequence[BoundReport]] = None,
) -> tuple[RunTrace, RunMetrics]:
    """Simulate one configuration; deterministic given the config and its seed."""
    if reports is None or experts is None:
        experts, reports, fit_seconds = prepare_experts(cfg, experts, datasets, hyperparams)
    else:
        fit_seconds = 0.0
    start = time.perf_counter()
    n, dt, steps = cfg.n, cfg.dt, cfg.steps
    dt_max = max_stable_dt(cfg.gains, laplacian(cfg.graph))
    if dt > dt_max:
        log.warning("dt=%g exceeds the RK4 stability limit %.4g of the linearised loop", dt, dt_max)
    loop = _ClosedLoop(cfg, experts, reports)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1]))

    cap = steps + 1
    tr = RunTrace(
        n=n,
        t=np.zeros(cap),
        e_c=np.zeros((cap, n, 4)),
        e_e=np.zeros((cap, n, 4)),
        u=np.zeros((cap, n, 8)),
        mu=np.zeros((cap, n, 4)),
        var=np.zeros((cap, n, 4)),
        radius=np.zeros((cap, n, 4)),
        v=np.zeros((cap, n), dtype=int),
        storage=np.zeros((cap, n)),
        target=np.zeros((cap, 4)),
        V=np.zeros((cap, 4)),
        estimate=np.zeros((cap, n, 4)),
        own_mu=np.zeros((cap, n, 4)),
        own_var=np.zeros((cap, n, 4)),
    )
    y = _initial_state(cfg)
    status, message = STATUS_OK, ""
    lost_time = 0.0
    in_region = True
    last = 0
    for k in range(steps + 1):
        t = k * dt
        x, pc, tc, pe, te = loop.unpack(y)
        v, e_noise = _observe(cfg, t, x, pc, tc, pe, te, rng, tr.features)
        in_region &= cfg.target.in_region(x[:3])
        dy1, info = loop.rhs(t, y, v, e_noise, diag=True)
        _record(tr, k, t, x, v, info)
        last = k

        bad = np.flatnonzero((np.abs(tc) >= cfg.theta_limit) | (np.abs(te) >= cfg.theta_limit))
        if bad.size:
            status = STATUS_THETA
            message = f"error angle of drone {int(bad[0])} reached {cfg.theta_limit:.4g} rad at t={t:.4g}"
            break
        lost_time = lost_time + dt if not v.any() else 0.0
        if lost_time > cfg.lost_grace:
            status = STATUS_LOST
            message = f"no drone has seen the target for {lost_time:.4g} s (t={t:.4g})"
            break
        if k == steps:
            break

        h = 0.5 * dt
        dy2, _ = loop.rhs(t + h, y + h * dy1, v, e_noise)
        dy3, _ = loop.rhs(t + h, y + h * dy2, v, e_noise)
        dy4, _ = loop.rhs(t + dt, y + dt * dy3, v, e_noise)
        y = y + (dt / 6.0) * (dy1 + 2.0 * dy2 + 2.0 * dy3 + dy4)
        y[3] = _wrap(y[3])
        y[4 + 3 * n : 4 + 4 * n] = _wrap(y[4 + 3 * n : 4 + 4 * n])
        y[4 + 7 * n :] = _wrap(y[4 + 7 * n :])

    if last < steps:
        tr = _truncate(tr, last + 1)
    if status != STATUS_OK:
        log.warning("run stopped early: %s", message)
    e2 = tr.e_norm_sq
    metrics = RunMetrics(
        mode=cfg.mode,
        status=status,
        message=message,
        steps=len(tr.t),
        squared_mean_e=float(e2.sum(-1).mean()),
        peak_e=[float(x) for x in np.sqrt(e2.max(0))],
        visibility_losses=int((tr.v == 0).sum()),
        target_in_region=bool(in_region),
        fit_seconds=fit_seconds,
        sim_seconds=time.perf_counter() - start,
    )
    return tr, metrics


def _observe(cfg, t, x, pc, tc, pe, te, rng, features):
    """Visibility flags and held estimation-error noise for the current step."""
    n = cfg.n
    e_noise = np.zeros((n, 4))
    if not cfg.dump_features and cfg.pixel_noise_std <= 0:
        # g_i0 = g_di g_c g_e composed in coordinates
        pd = np.array([g.p for g in cfg.desired_poses])
        td = np.array([g.theta for g in cfg.desired_poses])
        p = pd + rotate_batch(td, pc + rotate_batch(tc, pe))
        return visible_batch(p, td + tc + te, cfg.features, cfg.camera).astype(int), e_noise
    v = np.zeros(n, dtype=int)
    for i in range(n):
        g_c = Pose(pc[i], tc[i])
        g_e = Pose(pe[i], te[i])
        gbar_i0 = compose(cfg.desired_poses[i], g_c)
        g_i0 = compose(gbar_i0, g_e)
        obs = feature_vector(g_i0, cfg.features, cfg.camera)
        v[i] = int(obs.visible)
        if cfg.dump_features:
            for kk, (uu, vv) in enumerate(obs.uv):
                features.append((t, i, kk, float(uu), float(vv), int(obs.visible)))
        if obs.visible and cfg.pixel_noise_std > 0:
            noisy = noisy_estimation_error(gbar_i0, g_i0, cfg.features, cfg.camera, cfg.pixel_noise_std, rng)
            e_noise[i] = noisy - estimation_error(gbar_i0, g_i0)
    return v, e_noise


def _record(tr: RunTrace, k, t, x, v, info):
    tr.t[k] = t
    tr.target[k] = [x[0], x[1], x[2], _wrap(x[3])]
    tr.v[k] = v
    tr.V[k] = info["V"]
    tr.u[k] = info["u"]
    tr.mu[k] = info["mu"]
    tr.var[k] = info["var"]
    tr.radius[k] = info["radius"]
    tr.e_c[k] = info["e_c"]
    tr.e_e[k] = info["e_e"]
    tr.storage[k] = info["storage"]
    tr.estimate[k] = info["estimate"]
    tr.own_mu[k] = info["own_mu"]
    tr.own_var[k] = info["own_var"]


def _truncate(tr: RunTrace, m: int) -> RunTrace:
    kw = {}
    for name in ("t", "e_c", "e_e", "u", "mu", "var", "radius", "v", "storage", "target", "V", "estimate", "own_mu", "own_var"):
        kw[name] = getattr(tr, name)[:m].copy()
    return RunTrace(n=tr.n, features=tr.features, **kw)
