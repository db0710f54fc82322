"""
Joint two-height model: spatial autoregressive mean with cross-height
coupling, and a spatiotemporal log-ARCH volatility equation.

Both stages are instances of the same linear simultaneous system

    Y_t = 1 b' + W Y_t Psi + Y_{t-1} Pi + u_t          (Y_t is N x 2)

fitted by Gaussian QML with the log-Jacobian (T-1) ln|det(I - Psi' kron W)|.
For fixed Psi the intercepts and Pi are pooled least squares per height and
each height's innovation variance is concentrated out, so the numerical
search runs over the four entries of Psi only.

For the volatility stage Y_t holds log-squared mean residuals and the
intercept plays the role of A.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from . import _optim
from .errors import AllZeroResiduals, NonConvergence, ShapeMismatch, SingularSystem
from .weights import WeightMatrix

# E[ln Z^2] for standard normal Z
LOG_CHI2_MEAN = -1.2703628454614782
HEIGHTS = 2


@dataclass(frozen=True)
class MvMeanParams:
    beta_mu: np.ndarray
    Psi_mu: np.ndarray
    Pi_mu: np.ndarray

    def __post_init__(self):
        _check_block(self.beta_mu, self.Psi_mu, self.Pi_mu)


@dataclass(frozen=True)
class MvVolParams:
    A: np.ndarray
    Psi_sigma: np.ndarray
    Pi_sigma: np.ndarray

    def __post_init__(self):
        _check_block(self.A, self.Psi_sigma, self.Pi_sigma)


def _check_block(b, psi, pi):
    b, psi, pi = (np.asarray(v, dtype=float) for v in (b, psi, pi))
    if b.shape != (HEIGHTS,) or psi.shape != (HEIGHTS, HEIGHTS) or pi.shape != (HEIGHTS, HEIGHTS):
        raise ShapeMismatch("need a 2-vector and two 2x2 matrices")
    if not all(np.all(np.isfinite(v)) for v in (b, psi, pi)):
        raise ShapeMismatch("parameters must be finite")


@dataclass(frozen=True)
class SystemFit:
    intercept: np.ndarray
    Psi: np.ndarray
    Pi: np.ndarray
    sigma2: np.ndarray
    loglik: float
    std_errors: dict
    residuals: np.ndarray = field(repr=False)
    spectral_radius: float = 0.0
    contemporaneous: bool = True
    converged: bool = True


@dataclass(frozen=True)
class MvMeanFit:
    params: MvMeanParams
    eps: np.ndarray = field(repr=False)
    system: SystemFit = field(repr=False)


@dataclass(frozen=True)
class MvVolFit:
    params: MvVolParams
    log_h: np.ndarray = field(repr=False)
    floor: float
    n_floored: int
    system: SystemFit = field(repr=False)


@dataclass(frozen=True)
class LogSquared:
    values: np.ndarray
    floor: float
    n_floored: int


def log_sq_transform(eps, floor: float | None = None) -> LogSquared:
    """ln(max(eps^2, floor)); the default floor is 1e-10 times the median eps^2."""
    e2 = np.asarray(eps, dtype=float) ** 2
    if floor is None:
        if not np.any(e2 > 0):
            raise AllZeroResiduals("all residuals are zero")
        med = float(np.median(e2))
        if med == 0.0:
            med = float(np.median(e2[e2 > 0]))
        floor = 1e-10 * med
    n_floored = int(np.sum(e2 < floor))
    return LogSquared(np.log(np.maximum(e2, floor)), float(floor), n_floored)


def _dense(W, n: int) -> np.ndarray:
    w = W.dense() if isinstance(W, WeightMatrix) else np.asarray(W, dtype=float)
    if w.shape != (n, n):
        raise ShapeMismatch(f"W is {w.shape} but the panel has {n} stations")
    return w


def _check_panel(Y) -> np.ndarray:
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 3 or Y.shape[2] != HEIGHTS:
        raise ShapeMismatch(f"expected a T x N x 2 array, got {Y.shape}")
    if Y.shape[0] < 3:
        raise NonConvergence("need at least three time points")
    if not np.all(np.isfinite(Y)):
        raise NonConvergence("panel contains non-finite values")
    return Y


def system_logdet(Psi, W) -> float:
    """ln det(I - Psi' kron W) by LU."""
    w = np.asarray(W, dtype=float)
    n = w.shape[0]
    sign, ld = np.linalg.slogdet(np.eye(HEIGHTS * n) - np.kron(np.asarray(Psi, dtype=float).T, w))
    if sign <= 0 or not np.isfinite(ld):
        raise SingularSystem("I - Psi' kron W has a non-positive determinant")
    return float(ld)


def spectral_radius(Psi, w_eigs: np.ndarray) -> float:
    """Largest |eig| of Psi' kron W from the eigenvalues of each factor."""
    return float(np.max(np.abs(np.outer(np.linalg.eigvals(np.asarray(Psi, dtype=float)), w_eigs))))


def _spatial(w: np.ndarray, Y: np.ndarray) -> np.ndarray:
    return np.einsum("ij,tjk->tik", w, Y)


def system_residuals(intercept, Psi, Pi, W, Y, contemporaneous: bool = True) -> np.ndarray:
    """u_t for t >= 2, shape (T-1) x N x 2."""
    Y = np.asarray(Y, dtype=float)
    w = _dense(W, Y.shape[1])
    cur, lag = Y[1:], Y[:-1]
    spat = _spatial(w, cur if contemporaneous else lag)
    return cur - np.asarray(intercept) - spat @ np.asarray(Psi) - lag @ np.asarray(Pi)


def system_loglik(intercept, Psi, Pi, sigma2, W, Y, contemporaneous: bool = True) -> float:
    Y = np.asarray(Y, dtype=float)
    w = _dense(W, Y.shape[1])
    u = system_residuals(intercept, Psi, Pi, w, Y, contemporaneous)
    n_t, N = u.shape[:2]
    s2 = np.asarray(sigma2, dtype=float)
    ld = system_logdet(Psi, w) if contemporaneous else 0.0
    quad = np.sum(u**2, axis=(0, 1)) / s2
    return float(n_t * ld - 0.5 * n_t * N * np.sum(np.log(2 * math.pi * s2)) - 0.5 * np.sum(quad))


def fit_system(Y, W, contemporaneous: bool = True) -> SystemFit:
    Y = _check_panel(Y)
    T, N, _ = Y.shape
    w = _dense(W, N)
    n_t = T - 1
    m = n_t * N
    cur = Y[1:].reshape(m, HEIGHTS)
    lag = Y[:-1].reshape(m, HEIGHTS)
    wy = _spatial(w, Y[1:] if contemporaneous else Y[:-1]).reshape(m, HEIGHTS)

    if not contemporaneous:
        X = np.column_stack([np.ones(m), wy, lag])
        coef, *_ = np.linalg.lstsq(X, cur, rcond=None)
        intercept, Psi, Pi = coef[0], coef[1:3], coef[3:5]
    else:
        X = np.column_stack([np.ones(m), lag])
        q, r = np.linalg.qr(X)
        if np.min(np.abs(np.diag(r))) < 1e-10 * math.sqrt(m):
            raise SingularSystem("lagged regressors are collinear")

        def resid(M):
            return M - q @ (q.T @ M)

        R = np.column_stack([resid(cur), resid(wy)])
        G = R.T @ R
        has_w = bool(np.any(w != 0))

        def ssr(psi):
            out = np.empty(HEIGHTS)
            for k in range(HEIGHTS):
                v = np.concatenate(([1.0], -psi[:, k]))
                idx = [k, 2, 3]
                out[k] = v @ G[np.ix_(idx, idx)] @ v
            return out

        def neg_conc(x):
            psi = x.reshape(HEIGHTS, HEIGHTS)
            try:
                ld = system_logdet(psi, w)
            except SingularSystem:
                return 1e10
            s = ssr(psi)
            if np.any(s <= 0):
                return 1e10
            return -(n_t * ld - 0.5 * m * np.sum(np.log(2 * math.pi * s / m) + 1.0)) / m

        if has_w:
            res = _optim.minimize(neg_conc, np.zeros(4))
            if not np.isfinite(res.fun) or res.fun >= 1e9:
                raise NonConvergence("concentrated likelihood search failed")
            Psi = res.x.reshape(HEIGHTS, HEIGHTS)
            converged = bool(res.success)
        else:
            Psi = np.zeros((HEIGHTS, HEIGHTS))
            converged = True
        Z = cur - wy @ Psi
        coef, *_ = np.linalg.lstsq(X, Z, rcond=None)
        intercept, Pi = coef[0], coef[1:3]

    u = cur - intercept - wy @ Psi - lag @ Pi
    sigma2 = np.mean(u**2, axis=0)
    if np.any(sigma2 <= 0):
        raise SingularSystem("zero innovation variance")
    w_eigs = np.linalg.eigvals(w)
    rad = spectral_radius(Psi, w_eigs) if contemporaneous else 0.0
    if rad >= 1.0:
        raise SingularSystem(f"fitted simultaneous system is unstable (spectral radius {rad:.4f})")

    theta = np.concatenate([intercept, Psi.ravel(), Pi.ravel(), sigma2])
    names = (["b1", "b2", "Psi11", "Psi12", "Psi21", "Psi22", "Pi11", "Pi12", "Pi21", "Pi22", "s2_1", "s2_2"])

    def neg_full(th):
        if np.any(th[10:] <= 0):
            return 1e10
        try:
            return -system_loglik(th[:2], th[2:6].reshape(2, 2), th[6:10].reshape(2, 2), th[10:], w, Y,
                                  contemporaneous)
        except SingularSystem:
            return 1e10

    free = np.ones(theta.size, bool)
    if not np.any(w != 0):
        free[2:6] = False
    se, _ = _optim.hessian_std_errors(neg_full, theta, free)
    ll = system_loglik(intercept, Psi, Pi, sigma2, w, Y, contemporaneous)
    return SystemFit(
        intercept=np.asarray(intercept, dtype=float),
        Psi=np.asarray(Psi, dtype=float),
        Pi=np.asarray(Pi, dtype=float),
        sigma2=sigma2,
        loglik=ll,
        std_errors=dict(zip(names, se.tolist())),
        residuals=u.reshape(n_t, N, HEIGHTS),
        spectral_radius=rad,
        contemporaneous=contemporaneous,
        converged=converged if contemporaneous else True,
    )


def fit_mv_mean(Y, W) -> MvMeanFit:
    """Mean equation; ``eps`` has T-1 rows (the first day has no lag)."""
    sys = fit_system(Y, W, contemporaneous=True)
    return MvMeanFit(MvMeanParams(sys.intercept, sys.Psi, sys.Pi), sys.residuals, sys)


def fit_mv_logarch(eps, W, contemporaneous: bool = True) -> MvVolFit:
    """Volatility equation on log-squared residuals.

    ``contemporaneous=False`` lags the spatial term by one day.
    """
    ls = log_sq_transform(_check_panel(eps))
    sys = fit_system(ls.values, W, contemporaneous)
    L = ls.values
    w = _dense(W, L.shape[1])
    spat = _spatial(w, L[1:] if contemporaneous else L[:-1])
    log_h = sys.intercept + spat @ sys.Psi + L[:-1] @ sys.Pi
    return MvVolFit(MvVolParams(sys.intercept, sys.Psi, sys.Pi), log_h, ls.floor, ls.n_floored, sys)


# --- forecasting ----------------------------------------------------------


def _solve_system(w, Psi, rhs) -> np.ndarray:
    """Solve X = rhs + W X Psi for the N x 2 matrix X."""
    n = w.shape[0]
    A = np.eye(HEIGHTS * n) - np.kron(np.asarray(Psi).T, w)
    x = np.linalg.solve(A, rhs.reshape(-1, order="F"))
    return x.reshape(n, HEIGHTS, order="F")


def mv_mean_forecast(mean: MvMeanParams, y_last, W) -> np.ndarray:
    y_last = np.asarray(y_last, dtype=float)
    w = _dense(W, y_last.shape[0])
    return _solve_system(w, mean.Psi_mu, mean.beta_mu + y_last @ mean.Pi_mu)


def mv_forecast(mean: MvMeanParams, vol: MvVolParams, history, W, floor: float | None = None,
                contemporaneous: bool = True) -> np.ndarray:
    """Next-day N x 2 variance matrix.

    ``history`` holds at least the last two days of levels (T x N x 2). The
    latest mean residual gives the lagged log-squared shock; the log-variance
    system is solved in reduced form and exponentiated.
    """
    h = np.asarray(history, dtype=float)
    if h.ndim != 3 or h.shape[0] < 2:
        raise ShapeMismatch("history needs at least two days of N x 2 levels")
    w = _dense(W, h.shape[1])
    eps_last = system_residuals(mean.beta_mu, mean.Psi_mu, mean.Pi_mu, w, h[-2:])[0]
    L_last = log_sq_transform(eps_last, floor).values
    return log_arch_step(vol, w, L_last, contemporaneous)


def log_arch_step(vol: MvVolParams, w, L_last, contemporaneous: bool = True) -> np.ndarray:
    """Variance forecast from the previous day's log-squared shocks."""
    if contemporaneous:
        log_h = _solve_system(w, vol.Psi_sigma, vol.A + L_last @ vol.Pi_sigma)
    else:
        log_h = vol.A + (w @ L_last) @ vol.Psi_sigma + L_last @ vol.Pi_sigma
    return np.exp(log_h)


def mv_forecast_path(mean_fit: MvMeanFit, vol_fit: MvVolFit, Y_full, W, n_train: int) -> np.ndarray:
    """Rolling one-step-ahead variances for days ``n_train..`` of ``Y_full``."""
    Y = np.asarray(Y_full, dtype=float)
    w = _dense(W, Y.shape[1])
    m = mean_fit.params
    eps = system_residuals(m.beta_mu, m.Psi_mu, m.Pi_mu, w, Y)
    L = log_sq_transform(eps, vol_fit.floor).values
    out = np.empty((Y.shape[0] - n_train,) + Y.shape[1:])
    for k, t in enumerate(range(n_train, Y.shape[0])):
        # eps row t-2 is the residual of day t-1
        out[k] = log_arch_step(vol_fit.params, w, L[t - 2], vol_fit.system.contemporaneous)
    return out


# --- simulation -----------------------------------------------------------


def simulate_mv_logarch(vol: MvVolParams, W, T: int, burn_in: int = 300, seed: int = 0) -> np.ndarray:
    """Shocks whose log-squares follow the volatility system exactly.

    The disturbance is scaled so that ln Xi^2 has mean zero, which makes A
    the intercept of the log-squared system.
    """
    w = np.asarray(W.dense() if isinstance(W, WeightMatrix) else W, dtype=float)
    N = w.shape[0]
    rng = np.random.default_rng(seed)
    A = np.eye(HEIGHTS * N) - np.kron(np.asarray(vol.Psi_sigma).T, w)
    lu = _lu(A)
    L = np.zeros((N, HEIGHTS))
    out = np.empty((T + burn_in, N, HEIGHTS))
    for t in range(T + burn_in):
        z = rng.standard_normal((N, HEIGHTS))
        u = np.log(z**2) - LOG_CHI2_MEAN
        L = _lu_solve(lu, vol.A + L @ vol.Pi_sigma + u, N)
        out[t] = np.sign(z) * np.exp(0.5 * L)
    return out[burn_in:]


def simulate_mv_mean(mean: MvMeanParams, W, T: int, burn_in: int = 300, seed: int = 0, eps=None) -> np.ndarray:
    """Levels from the mean system driven by ``eps`` (default: i.i.d. N(0, 1))."""
    w = np.asarray(W.dense() if isinstance(W, WeightMatrix) else W, dtype=float)
    N = w.shape[0]
    rng = np.random.default_rng(seed)
    if eps is None:
        eps = rng.standard_normal((T + burn_in, N, HEIGHTS))
        keep = burn_in
    else:
        eps = np.asarray(eps, dtype=float)
        keep = 0
    lu = _lu(np.eye(HEIGHTS * N) - np.kron(np.asarray(mean.Psi_mu).T, w))
    Y = np.zeros((N, HEIGHTS))
    out = np.empty(eps.shape)
    for t in range(eps.shape[0]):
        Y = _lu_solve(lu, mean.beta_mu + Y @ mean.Pi_mu + eps[t], N)
        out[t] = Y
    return out[keep:]


def _lu(A):
    from scipy import linalg

    return linalg.lu_factor(A)


def _lu_solve(lu, rhs, n):
    from scipy import linalg

    return linalg.lu_solve(lu, rhs.reshape(-1, order="F")).reshape(n, HEIGHTS, order="F")


# --- reporting ------------------------------------------------------------

_MEAN_ROWS = [("beta_mu_1", "b1"), ("beta_mu_2", "b2"), ("Psi_mu_11", "Psi11"), ("Psi_mu_22", "Psi22"),
              ("Psi_mu_12", "Psi12"), ("Psi_mu_21", "Psi21"), ("Pi_mu_11", "Pi11"), ("Pi_mu_22", "Pi22"),
              ("Pi_mu_12", "Pi12"), ("Pi_mu_21", "Pi21")]


def _value(sys: SystemFit, key: str) -> float:
    if key.startswith("b"):
        return float(sys.intercept[int(key[1]) - 1])
    mat = sys.Psi if key.startswith("Psi") else sys.Pi
    i, j = int(key[-2]) - 1, int(key[-1]) - 1
    return float(mat[i, j])


def params_frame(fits: dict) -> pd.DataFrame:
    """Parameter x weight table; ``fits`` maps weight name to (MvMeanFit, MvVolFit)."""
    rows = []
    for weight, (mf, vf) in fits.items():
        for label, key in _MEAN_ROWS:
            rows.append({"weight": weight, "equation": "mean", "param": label,
                         "estimate": _value(mf.system, key), "std_error": mf.system.std_errors[key]})
        for label, key in _MEAN_ROWS:
            vlabel = label.replace("beta_mu", "A").replace("_mu", "_sigma")
            rows.append({"weight": weight, "equation": "volatility", "param": vlabel,
                         "estimate": _value(vf.system, key), "std_error": vf.system.std_errors[key]})
    return pd.DataFrame(rows)
