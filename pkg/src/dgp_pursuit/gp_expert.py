"""Exact GP regression for one drone's private dataset.

Each of the four output channels (body-velocity components) has its own
SE-ARD kernel and is modelled independently with a zero prior mean. Arrays
indexed by channel come first: ``lengthscales[c, d]`` is the lengthscale of
channel ``c`` along input dimension ``d``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

N_CHANNELS = 4
N_INPUTS = 4
VAR_FLOOR = 1e-12
JITTER_START = 1e-10
JITTER_STOP = 1e-4
LOG_BOUNDS = (math.log(1e-3), math.log(1e3))


class FactorizationError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True, eq=False)
class Dataset:
    X: np.ndarray
    Y: np.ndarray
    sigma_n: np.ndarray

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        Y = np.atleast_2d(np.asarray(self.Y, dtype=float))
        s = np.broadcast_to(np.asarray(self.sigma_n, dtype=float), (N_CHANNELS,)).copy()
        if X.shape[0] < 1 or X.shape != (Y.shape[0], N_INPUTS) or Y.shape[1] != N_CHANNELS:
            raise ValueError(f"need matching (M, 4) inputs and outputs, got {X.shape} and {Y.shape}")
        if np.any(s <= 0):
            raise ValueError("observation noise std must be positive")
        for a in (X, Y, s):
            a.flags.writeable = False
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "sigma_n", s)

    @property
    def M(self) -> int:
        return self.X.shape[0]


@dataclass(frozen=True, eq=False)
class HyperParams:
    sigma_f: np.ndarray
    lengthscales: np.ndarray

    def __post_init__(self):
        sf = np.broadcast_to(np.asarray(self.sigma_f, dtype=float), (N_CHANNELS,)).copy()
        ls = np.broadcast_to(
            np.asarray(self.lengthscales, dtype=float), (N_CHANNELS, N_INPUTS)
        ).copy()
        if np.any(sf <= 0) or np.any(ls <= 0):
            raise ValueError("hyperparameters must be strictly positive")
        sf.flags.writeable = False
        ls.flags.writeable = False
        object.__setattr__(self, "sigma_f", sf)
        object.__setattr__(self, "lengthscales", ls)

    def channel(self, c: int) -> tuple[float, np.ndarray]:
        return float(self.sigma_f[c]), self.lengthscales[c]

    def to_json(self) -> list[dict]:
        return [
            {"sigma_f": float(self.sigma_f[c]), "lengthscales": [float(v) for v in self.lengthscales[c]]}
            for c in range(N_CHANNELS)
        ]

    @classmethod
    def from_json(cls, channels: list[dict]) -> HyperParams:
        return cls([ch["sigma_f"] for ch in channels], [ch["lengthscales"] for ch in channels])


@dataclass(frozen=True, eq=False)
class Prediction:
    mu: np.ndarray
    var: np.ndarray


@dataclass(frozen=True, eq=False)
class GpExpert:
    dataset: Dataset
    hyperparams: HyperParams
    chol: np.ndarray  # (4, M, M) lower factors of K + sigma_n^2 I (+ jitter)
    alpha: np.ndarray  # (4, M) weights (K + sigma_n^2 I)^-1 y
    chol_inv: np.ndarray = field(repr=False)
    jitter: np.ndarray = field(repr=False)
    var_floor: float = VAR_FLOOR


def kernel(x, x2, sigma_f: float, lengthscales) -> float:
    r = (np.asarray(x, dtype=float) - np.asarray(x2, dtype=float)) / np.asarray(lengthscales)
    return float(sigma_f**2 * math.exp(-0.5 * float(r @ r)))


def gram(X: np.ndarray, X2: np.ndarray, sigma_f: float, lengthscales) -> np.ndarray:
    A = X / lengthscales
    B = X2 / lengthscales
    sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    np.maximum(sq, 0.0, out=sq)
    return sigma_f**2 * np.exp(-0.5 * sq)


def _factor(K: np.ndarray, noise_var: float, sigma_f: float) -> tuple[np.ndarray, float]:
    """Cholesky of K + noise_var*I, escalating diagonal jitter if needed."""
    M = K.shape[0]
    A = K + noise_var * np.eye(M)
    jitter = 0.0
    while True:
        try:
            return np.linalg.cholesky(A + jitter * np.eye(M)), jitter
        except np.linalg.LinAlgError:
            jitter = JITTER_START * sigma_f**2 if jitter == 0.0 else jitter * 10.0
            if jitter > JITTER_STOP * sigma_f**2 * (1 + 1e-9):
                raise FactorizationError(
                    "Gram matrix not positive definite after jitter escalation "
                    "(duplicate inputs with near-zero noise?)"
                ) from None


def fit(d: Dataset, h: HyperParams, var_floor: float = VAR_FLOOR) -> GpExpert:
    M = d.M
    chol = np.empty((N_CHANNELS, M, M))
    chol_inv = np.empty((N_CHANNELS, M, M))
    alpha = np.empty((N_CHANNELS, M))
    jitter = np.empty(N_CHANNELS)
    eye = np.eye(M)
    for c in range(N_CHANNELS):
        sf, ls = h.channel(c)
        K = gram(d.X, d.X, sf, ls)
        L, jitter[c] = _factor(K, d.sigma_n[c] ** 2, sf)
        chol[c] = L
        alpha[c] = cho_solve((L, True), d.Y[:, c])
        chol_inv[c] = solve_triangular(L, eye, lower=True)
    return GpExpert(d, h, chol, alpha, chol_inv, jitter, var_floor)


def _cross(e: GpExpert, Xq: np.ndarray) -> np.ndarray:
    """Cross-covariances k(x*, X) for every channel: shape (4, Q, M)."""
    diff = Xq[:, None, :] - e.dataset.X[None, :, :]
    ls = e.hyperparams.lengthscales
    sq = np.einsum("qmd,cd->cqm", diff * diff, 1.0 / (ls * ls))
    return (e.hyperparams.sigma_f**2)[:, None, None] * np.exp(-0.5 * sq)


def predict_many(e: GpExpert, Xq) -> tuple[np.ndarray, np.ndarray]:
    """Posterior means and variances at ``Q`` inputs, each of shape (Q, 4)."""
    Xq = np.atleast_2d(np.asarray(Xq, dtype=float))
    ks = _cross(e, Xq)
    mu = np.einsum("cqm,cm->qc", ks, e.alpha)
    v = np.einsum("cij,cqj->cqi", e.chol_inv, ks)
    sf2 = e.hyperparams.sigma_f**2
    var = sf2[None, :] - np.einsum("cqi,cqi->qc", v, v)
    var = np.clip(var, e.var_floor, sf2[None, :])
    return mu, var


def predict(e: GpExpert, x_star) -> Prediction:
    mu, var = predict_many(e, np.asarray(x_star, dtype=float)[None, :])
    return Prediction(mu[0], var[0])


def channel_lml(X, y, noise_var: float, sigma_f: float, lengthscales) -> float:
    K = gram(X, X, sigma_f, lengthscales)
    L, _ = _factor(K, noise_var, sigma_f)
    a = cho_solve((L, True), y)
    M = len(y)
    return float(-0.5 * y @ a - np.log(np.diag(L)).sum() - 0.5 * M * math.log(2 * math.pi))


def log_marginal_likelihood(d: Dataset, h: HyperParams) -> float:
    return sum(
        channel_lml(d.X, d.Y[:, c], d.sigma_n[c] ** 2, *h.channel(c)) for c in range(N_CHANNELS)
    )


def coordinate_search(
    objective: Callable[[np.ndarray], float],
    x0: np.ndarray,
    budget: int,
    bounds: tuple[float, float] = LOG_BOUNDS,
    step: float = 1.0,
    min_step: float = 1e-3,
) -> tuple[np.ndarray, list[float]]:
    """Maximise ``objective`` by axis-aligned moves with step halving.

    Returns the best point and the history of accepted objective values
    (non-decreasing). A failing evaluation counts against the budget and is
    treated as -inf.
    """
    lo, hi = bounds
    x = np.clip(np.asarray(x0, dtype=float), lo, hi)

    def f(z):
        try:
            val = objective(z)
        except np.linalg.LinAlgError:
            return -math.inf
        return val if math.isfinite(val) else -math.inf

    best = f(x)
    history = [best]
    evals = 1
    while evals < budget and step >= min_step:
        improved = False
        for k in range(len(x)):
            for sign in (1.0, -1.0):
                if evals >= budget:
                    break
                cand = x.copy()
                cand[k] = min(max(cand[k] + sign * step, lo), hi)
                if cand[k] == x[k]:
                    continue
                val = f(cand)
                evals += 1
                if val > best:
                    x, best = cand, val
                    history.append(best)
                    improved = True
                    break
        if not improved:
            step *= 0.5
    return x, history


def optimize_hyperparams(d: Dataset, init: HyperParams, budget: int = 500) -> HyperParams:
    """Per-channel log-space coordinate ascent on the marginal likelihood.

    ``budget`` caps objective evaluations per channel. Channels whose search
    never finds a finite value keep their initial hyperparameters.
    """
    if budget < 1:
        raise ValueError("budget must be at least one evaluation")
    sigma_f = init.sigma_f.copy()
    ls = init.lengthscales.copy()
    for c in range(N_CHANNELS):
        y = d.Y[:, c]
        nv = d.sigma_n[c] ** 2

        def objective(z, y=y, nv=nv):
            ez = np.exp(z)
            return channel_lml(d.X, y, nv, ez[0], ez[1:])

        z0 = np.log(np.concatenate([[sigma_f[c]], ls[c]]))
        z, hist = coordinate_search(objective, z0, budget)
        if math.isfinite(hist[-1]) and len(hist) > 1:
            sigma_f[c] = math.exp(z[0])
            ls[c] = np.exp(z[1:])
    return HyperParams(sigma_f, ls)


def information_gain(e: GpExpert) -> np.ndarray:
    """Per-channel 0.5 * log det(I + K / sigma_n^2)."""
    d = e.dataset
    out = np.empty(N_CHANNELS)
    for c in range(N_CHANNELS):
        K = gram(d.X, d.X, *e.hyperparams.channel(c))
        _, logdet = np.linalg.slogdet(np.eye(d.M) + K / d.sigma_n[c] ** 2)
        out[c] = 0.5 * logdet
    return out


def _beta_srinivas(delta: float, M: int, gamma_sq: np.ndarray, **_) -> np.ndarray:
    return 2.0 * math.log(M * math.pi**2 / (6.0 * delta)) + 2.0 * gamma_sq


def _beta_fixed(delta: float, M: int, gamma_sq: np.ndarray, value: float = 4.0, **_) -> np.ndarray:
    return np.full_like(gamma_sq, float(value))


BETA_FORMULAS = {"srinivas": _beta_srinivas, "fixed": _beta_fixed}


def beta(
    delta: float, M: int, gamma_sq: np.ndarray, formula: str = "srinivas", **kwargs
) -> np.ndarray:
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    try:
        fn = BETA_FORMULAS[formula]
    except KeyError:
        raise ValueError(f"unknown beta formula {formula!r}") from None
    return np.asarray(fn(delta, M, np.asarray(gamma_sq, dtype=float), **kwargs), dtype=float)


def error_radius(
    e: GpExpert, delta: float, x_star, formula: str = "srinivas", **kwargs
) -> np.ndarray:
    """High-probability per-channel radius sqrt(beta) * posterior std at ``x_star``."""
    b = beta(delta, e.dataset.M, information_gain(e), formula, **kwargs)
    x_star = np.asarray(x_star, dtype=float)
    _, var = predict_many(e, x_star)
    r = np.sqrt(b)[None, :] * np.sqrt(var)
    return r[0] if x_star.ndim == 1 else r


def _mean_gradients(e: GpExpert, Xq: np.ndarray) -> np.ndarray:
    """Gradient of each channel's posterior mean at each query: (4, Q, 4)."""
    ks = _cross(e, Xq)  # (c, q, m)
    diff = Xq[:, None, :] - e.dataset.X[None, :, :]  # (q, m, d)
    inv_l2 = 1.0 / e.hyperparams.lengthscales**2  # (c, d)
    w = ks * e.alpha[:, None, :]
    return -np.einsum("cqm,qmd,cd->cqd", w, diff, inv_l2)


def lipschitz_of_mean(e: GpExpert, grid: Optional[np.ndarray] = None) -> tuple[np.ndarray, Optional[np.ndarray]]:
    """Analytic Lipschitz bound of each channel's mean, plus an optional grid estimate.

    Every kernel section has gradient norm at most ``sigma_f^2 e^{-1/2} / min(l)``,
    so ``||alpha||_1`` times that bounds the mean's Lipschitz constant.
    """
    sf2 = e.hyperparams.sigma_f**2
    per_kernel = sf2 * math.exp(-0.5) / e.hyperparams.lengthscales.min(axis=1)
    bound = np.abs(e.alpha).sum(axis=1) * per_kernel
    if grid is None:
        return bound, None
    grads = _mean_gradients(e, np.atleast_2d(grid))
    return bound, np.linalg.norm(grads, axis=2).max(axis=1)


@dataclass(frozen=True, eq=False)
class BoundReport:
    gamma_sq: np.ndarray
    beta: np.ndarray
    delta_bar: np.ndarray
    l_mu: np.ndarray
    l_mu_empirical: Optional[np.ndarray] = None

    def to_json(self) -> dict:
        out = {k: [float(v) for v in getattr(self, k)] for k in ("gamma_sq", "beta", "delta_bar", "l_mu")}
        if self.l_mu_empirical is not None:
            out["l_mu_empirical"] = [float(v) for v in self.l_mu_empirical]
        return out


def bound_report(
    e: GpExpert, delta: float, grid: np.ndarray, formula: str = "srinivas", **kwargs
) -> BoundReport:
    """Bound diagnostics with the error radius taken as its supremum over ``grid``."""
    g2 = information_gain(e)
    b = beta(delta, e.dataset.M, g2, formula, **kwargs)
    _, var = predict_many(e, grid)
    delta_bar = np.sqrt(b) * np.sqrt(var.max(axis=0))
    l_mu, l_emp = lipschitz_of_mean(e, grid)
    return BoundReport(g2, b, delta_bar, l_mu, l_emp)


def box_grid(low, high, points_per_dim: int) -> np.ndarray:
    axes = [np.linspace(a, b, points_per_dim) for a, b in zip(low, high)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=1)


class ExpertBank:
    """Several experts queried together, one input per expert.

    Training sets of different sizes are zero-padded; padded entries carry
    zero weight and zero inverse-factor rows, so results are unaffected.
    """

    def __init__(self, experts: list[GpExpert]):
        self.experts = list(experts)
        K = len(self.experts)
        M = max(e.dataset.M for e in self.experts)
        self.X = np.zeros((K, M, N_INPUTS))
        self.alpha = np.zeros((K, N_CHANNELS, M))
        self.chol_inv = np.zeros((K, N_CHANNELS, M, M))
        self.inv_l2 = np.empty((K, N_CHANNELS, N_INPUTS))
        self.sf2 = np.empty((K, N_CHANNELS))
        self.var_floor = np.empty((K, 1))
        for k, e in enumerate(self.experts):
            m = e.dataset.M
            self.X[k, :m] = e.dataset.X
            self.alpha[k, :, :m] = e.alpha
            self.chol_inv[k, :, :m, :m] = e.chol_inv
            self.inv_l2[k] = 1.0 / e.hyperparams.lengthscales**2
            self.sf2[k] = e.hyperparams.sigma_f**2
            self.var_floor[k] = e.var_floor

    def predict(self, inputs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Expert ``k`` evaluated at ``inputs[k]``; returns ``(mu, var)`` of shape (K, 4)."""
        diff = inputs[:, None, :] - self.X
        sq = np.einsum("kmd,kcd->kcm", diff * diff, self.inv_l2)
        ks = self.sf2[:, :, None] * np.exp(-0.5 * sq)
        mu = np.einsum("kcm,kcm->kc", ks, self.alpha)
        v = np.einsum("kcij,kcj->kci", self.chol_inv, ks)
        var = self.sf2 - np.einsum("kci,kci->kc", v, v)
        return mu, np.minimum(np.maximum(var, self.var_floor), self.sf2)
