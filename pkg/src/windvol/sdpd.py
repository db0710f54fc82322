"""Spatial dynamic panel mean model fitted by concentrated Gaussian QML.

    y_t = rho W y_t + gamma * y_{t-1} + lambda W y_{t-1} + c + eps_t

``gamma`` and the intercept ``c`` are per station; ``rho`` and ``lambda``
are shared. For a fixed ``rho`` the remaining coefficients have a closed
form, so the likelihood is profiled over ``rho`` alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import linalg, optimize

from .diagnostics import residual_diagnostics
from .errors import EmptyList, InvalidParameters, NonConvergence, ShapeMismatch, SingularRegression, SingularSystem
from .weights import WeightMatrix

RHO_GRID = np.round(np.arange(-0.98, 0.981, 0.02), 10)
MIN_T = 50


@dataclass(frozen=True)
class SdpdParams:
    rho: float
    gamma: np.ndarray
    lam: float
    intercept: np.ndarray | None = None

    def __post_init__(self):
        if not abs(self.rho) < 1:
            raise InvalidParameters(f"need |rho| < 1, got {self.rho}")
        g = np.asarray(self.gamma, dtype=float)
        if g.ndim != 1 or not np.all(np.isfinite(g)):
            raise InvalidParameters("gamma must be a finite vector")
        object.__setattr__(self, "gamma", g)
        if self.intercept is not None:
            c = np.asarray(self.intercept, dtype=float)
            if c.shape != g.shape:
                raise ShapeMismatch("intercept and gamma must have the same length")
            object.__setattr__(self, "intercept", c)


@dataclass(frozen=True)
class SdpdFit:
    params: SdpdParams
    residuals: np.ndarray = field(repr=False)
    sigma2: float
    loglik: float
    profile: dict = field(repr=False, default_factory=dict)


def _dense(W, n: int) -> np.ndarray:
    w = W.dense() if isinstance(W, WeightMatrix) else np.asarray(W, dtype=float)
    if w.shape != (n, n):
        raise ShapeMismatch(f"W is {w.shape} but the panel has {n} stations")
    return w


def spatial_logdet(W, rho: float) -> float:
    """ln det(I - rho W) by LU; raises SingularSystem unless the determinant is positive."""
    w = W.dense() if isinstance(W, WeightMatrix) else np.asarray(W, dtype=float)
    if not abs(rho) < 1:
        raise SingularSystem(f"rho={rho} is outside (-1, 1)")
    sign, ld = np.linalg.slogdet(np.eye(w.shape[0]) - rho * w)
    if sign <= 0 or not np.isfinite(ld):
        raise SingularSystem(f"det(I - rho W) is not positive at rho={rho}")
    return float(ld)


def sdpd_residuals(params: SdpdParams, W, y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    w = _dense(W, y.shape[1])
    cur, lag = y[1:], y[:-1]
    eps = cur - params.rho * cur @ w.T - params.gamma * lag - params.lam * lag @ w.T
    if params.intercept is not None:
        eps = eps - params.intercept
    return eps


def sdpd_loglik(params: SdpdParams, W, y, sigma2: float) -> float:
    y = np.asarray(y, dtype=float)
    if sigma2 <= 0:
        raise InvalidParameters("sigma2 must be positive")
    n_t, N = y.shape[0] - 1, y.shape[1]
    eps = sdpd_residuals(params, W, y)
    ld = spatial_logdet(_dense(W, N), params.rho)
    return float(n_t * ld - 0.5 * n_t * N * math.log(2 * math.pi * sigma2) - np.sum(eps**2) / (2 * sigma2))


class _Profile:
    """Closed-form coefficients for any rho via per-station partialling out."""

    def __init__(self, y: np.ndarray, w: np.ndarray, intercept: bool, station_ids: Sequence[str]):
        cur, lag = y[1:], y[:-1]
        self.w = w
        self.n_t, self.N = cur.shape
        self.intercept = intercept
        self.lag = lag
        self.wcur = cur @ w.T
        self.wlag = lag @ w.T
        self.cur = cur
        # per-station projection onto span{1, y_{t-1}} (or y_{t-1} alone)
        self.Q = []
        for i in range(self.N):
            X = np.column_stack([np.ones(self.n_t), lag[:, i]]) if intercept else lag[:, i : i + 1]
            q, r = np.linalg.qr(X)
            if np.min(np.abs(np.diag(r))) <= 1e-10 * max(1.0, np.abs(X).max()) * math.sqrt(self.n_t):
                raise SingularRegression("own-lag regressor is constant or degenerate", station=station_ids[i])
            self.Q.append(q)
        self.rc = self._resid(cur)
        self.rwc = self._resid(self.wcur)
        self.rwl = self._resid(self.wlag)
        self.sxx = float(np.sum(self.rwl**2))
        self.has_w = bool(np.any(w != 0))

    def _resid(self, M: np.ndarray) -> np.ndarray:
        out = np.empty_like(M)
        for i, q in enumerate(self.Q):
            out[:, i] = M[:, i] - q @ (q.T @ M[:, i])
        return out

    def lam(self, rho: float) -> float:
        if self.sxx <= 1e-12 * max(1.0, float(np.sum(self.rc**2))):
            return 0.0
        z = self.rc - rho * self.rwc
        return float(np.sum(z * self.rwl) / self.sxx)

    def ssr(self, rho: float) -> float:
        z = self.rc - rho * self.rwc
        return float(np.sum((z - self.lam(rho) * self.rwl) ** 2))

    def concentrated(self, rho: float) -> float:
        ld = spatial_logdet(self.w, rho) if self.has_w else 0.0
        s2 = self.ssr(rho) / (self.n_t * self.N)
        if s2 <= 0:
            raise SingularRegression("residual variance is zero")
        return self.n_t * ld - 0.5 * self.n_t * self.N * (math.log(2 * math.pi * s2) + 1.0)

    def coefficients(self, rho: float, lam: float):
        target = self.cur - rho * self.wcur - lam * self.wlag
        gamma = np.empty(self.N)
        c = np.zeros(self.N)
        for i in range(self.N):
            if self.intercept:
                X = np.column_stack([np.ones(self.n_t), self.lag[:, i]])
                b = np.linalg.lstsq(X, target[:, i], rcond=None)[0]
                c[i], gamma[i] = b
            else:
                x = self.lag[:, i]
                gamma[i] = x @ target[:, i] / (x @ x)
        return gamma, (c if self.intercept else None)


def fit_sdpd(y, W, *, intercept: bool = True, station_ids: Sequence[str] | None = None) -> SdpdFit:
    """Profile likelihood over rho on a grid, refined by golden-section search."""
    y = np.asarray(y, dtype=float)
    if y.ndim != 2:
        raise ShapeMismatch("expected a T x N panel")
    T, N = y.shape
    if T < MIN_T:
        raise NonConvergence(f"need at least {MIN_T} time points, got {T}")
    ids = tuple(station_ids) if station_ids is not None else tuple(str(i) for i in range(N))
    w = _dense(W, N)
    prof = _Profile(y, w, intercept, ids)

    if not prof.has_w:
        rho = 0.0
        grid_ll = {}
    else:
        grid_ll = {}
        for r in RHO_GRID:
            try:
                grid_ll[float(r)] = prof.concentrated(float(r))
            except SingularSystem:
                continue
        if not grid_ll:
            raise NonConvergence("concentrated likelihood undefined on the whole rho grid")
        keys = sorted(grid_ll)
        k = int(np.argmax([grid_ll[r] for r in keys]))
        rho = keys[k]
        if 0 < k < len(keys) - 1:
            res = optimize.minimize_scalar(
                lambda r: -prof.concentrated(r),
                bracket=(keys[k - 1], keys[k], keys[k + 1]),
                method="golden",
                options={"xtol": 1e-10},
            )
            if res.success and -res.fun >= grid_ll[rho]:
                rho = float(res.x)
        else:
            lo, hi = (keys[0] - 0.0199, keys[0] + 0.02) if k == 0 else (keys[-1] - 0.02, keys[-1] + 0.0199)
            lo, hi = max(lo, -0.9999), min(hi, 0.9999)
            res = optimize.minimize_scalar(lambda r: -prof.concentrated(r), bounds=(lo, hi), method="bounded")
            if res.success and -res.fun >= grid_ll[rho]:
                rho = float(res.x)

    lam = prof.lam(rho)
    gamma, c = prof.coefficients(rho, lam)
    params = SdpdParams(rho, gamma, lam, c)
    eps = sdpd_residuals(params, w, y)
    s2 = float(np.mean(eps**2))
    return SdpdFit(params, eps, s2, sdpd_loglik(params, w, y, s2), grid_ll)


def simulate_sdpd(params: SdpdParams, W, T: int, burn_in: int = 200, seed: int = 0, sigma: float = 1.0) -> np.ndarray:
    N = params.gamma.size
    w = _dense(W, N)
    lu = linalg.lu_factor(np.eye(N) - params.rho * w)
    rng = np.random.default_rng(seed)
    c = np.zeros(N) if params.intercept is None else params.intercept
    y = np.zeros(N)
    out = np.empty((T + burn_in, N))
    for t in range(T + burn_in):
        rhs = params.gamma * y + params.lam * (w @ y) + c + sigma * rng.standard_normal(N)
        y = linalg.lu_solve(lu, rhs)
        out[t] = y
    return out[burn_in:]


def sdpd_residual_diag(residuals, W, lags: int = 10, level: float = 0.05) -> dict[str, float]:
    """Ljung-Box (per station) and Moran's I (per day) pass rates, in percent."""
    r = np.asarray(residuals, dtype=float)
    if r.size == 0:
        raise EmptyList("empty residual panel")
    return residual_diagnostics(r, W, lags, level)
