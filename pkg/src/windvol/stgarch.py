"""
Joint spatiotemporal ARMA mean / spatially aggregated GARCH variance model.

Mean:     e_t - mu = phi W (e_{t-1} - mu) + theta W eps_{t-1} + eps_t
Variance: h_t = omega + alpha W (eps_{t-1}^2) + beta W h_{t-1}
Shocks:   eps_t = sqrt(h_t) * Z_t

Estimation is Gaussian QML over an unconstrained reparameterisation with a
small deterministic multistart. Forecasts are one step ahead with frozen
parameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from numba import njit

from . import _optim
from .errors import InsufficientSample, InvalidParameters, NonConvergence, ShapeMismatch
from .weights import WeightMatrix

LOG_2PI = math.log(2.0 * math.pi)
PARAM_NAMES = ("mu", "phi", "theta", "omega", "alpha", "beta")
MIN_T = 200
_BOUNDARY = 1e-4
_COEF_CAP = 0.999


@dataclass(frozen=True)
class StarmaGarchParams:
    mu: float
    phi: float
    theta: float
    omega: float | np.ndarray
    alpha: float
    beta: float

    def __post_init__(self):
        om = np.asarray(self.omega, dtype=float)
        if om.ndim > 1 or not np.all(om > 0):
            raise InvalidParameters(f"omega must be positive (scalar or per station), got {self.omega}")
        if self.alpha < 0 or self.beta < 0 or self.alpha + self.beta >= 1:
            raise InvalidParameters(f"need alpha, beta >= 0 and alpha + beta < 1, got {self.alpha}, {self.beta}")
        if not abs(self.phi) < 1 or not abs(self.theta) < 1:
            raise InvalidParameters(f"need |phi| < 1 and |theta| < 1, got {self.phi}, {self.theta}")
        if not np.isfinite(self.mu):
            raise InvalidParameters("mu must be finite")

    def omega_vector(self, n: int) -> np.ndarray:
        om = np.asarray(self.omega, dtype=float)
        if om.ndim == 0:
            return np.full(n, float(om))
        if om.shape != (n,):
            raise ShapeMismatch(f"omega has {om.size} entries for {n} stations")
        return om.copy()

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in PARAM_NAMES}


@dataclass(frozen=True)
class StFit:
    params: StarmaGarchParams
    std_errors: dict
    pvalues: dict
    boundary: dict
    loglik: float
    aic: float
    bic: float
    h_path: np.ndarray = field(repr=False)
    eps_path: np.ndarray = field(repr=False)
    h1: np.ndarray = field(repr=False)
    n_params: int = 6
    converged: bool = True
    message: str = ""


# --- kernels --------------------------------------------------------------


@njit(cache=True)
def _spmv(indptr, indices, data, x, out):
    for i in range(indptr.size - 1):
        s = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            s += data[k] * x[indices[k]]
        out[i] = s


@njit(cache=True)
def _mean_filter(indptr, indices, data, e, mu, phi, theta):
    T, N = e.shape
    eps = np.empty((T, N))
    lag_e = np.empty(N)
    lag_eps = np.empty(N)
    for i in range(N):
        eps[0, i] = e[0, i] - mu
    for t in range(1, T):
        _spmv(indptr, indices, data, e[t - 1] - mu, lag_e)
        _spmv(indptr, indices, data, eps[t - 1], lag_eps)
        for i in range(N):
            eps[t, i] = e[t, i] - mu - phi * lag_e[i] - theta * lag_eps[i]
    return eps


@njit(cache=True)
def _var_filter(indptr, indices, data, eps, omega, alpha, beta, h1):
    T, N = eps.shape
    h = np.empty((T, N))
    a = np.empty(N)
    b = np.empty(N)
    for i in range(N):
        h[0, i] = h1[i]
    for t in range(1, T):
        _spmv(indptr, indices, data, eps[t - 1] ** 2, a)
        _spmv(indptr, indices, data, h[t - 1], b)
        for i in range(N):
            h[t, i] = omega[i] + alpha * a[i] + beta * b[i]
    return h


@njit(cache=True)
def _panel_loglik(eps, h):
    T, N = eps.shape
    s = 0.0
    for t in range(T):
        for i in range(N):
            s += math.log(h[t, i]) + eps[t, i] ** 2 / h[t, i]
    return -0.5 * (T * N * LOG_2PI + s)


def _csr(W: WeightMatrix | np.ndarray, n: int):
    from scipy import sparse

    m = W.matrix if isinstance(W, WeightMatrix) else sparse.csr_matrix(np.asarray(W, dtype=float))
    if m.shape != (n, n):
        raise ShapeMismatch(f"W is {m.shape[0]}x{m.shape[1]} but data has {n} stations")
    m = sparse.csr_matrix(m)
    return m.indptr.astype(np.int64), m.indices.astype(np.int64), m.data.astype(float)


def _as_panel(e) -> np.ndarray:
    e = np.ascontiguousarray(e, dtype=float)
    if e.ndim != 2:
        raise ShapeMismatch(f"expected a T x N panel, got shape {e.shape}")
    return e


def _filter_arrays(csr, e, mu, phi, theta, omega_vec, alpha, beta, h1):
    eps = _mean_filter(*csr, e, mu, phi, theta)
    if h1 is None:
        h1 = eps.var(axis=0)
    h = _var_filter(*csr, eps, omega_vec, alpha, beta, np.asarray(h1, dtype=float))
    return eps, h


def st_filter(params: StarmaGarchParams, W, e, h1=None) -> tuple[np.ndarray, np.ndarray]:
    """Invert the mean recursion and run the variance recursion.

    ``h1`` overrides the initial variances (default: column variances of the
    implied shocks).
    """
    e = _as_panel(e)
    N = e.shape[1]
    csr = _csr(W, N)
    if h1 is not None and np.shape(h1) != (N,):
        raise ShapeMismatch(f"h1 must have {N} entries")
    return _filter_arrays(csr, e, params.mu, params.phi, params.theta, params.omega_vector(N),
                          params.alpha, params.beta, h1)


def st_loglik(params: StarmaGarchParams, W, e, h1=None) -> float:
    eps, h = st_filter(params, W, e, h1)
    return float(_panel_loglik(eps, h))


def st_simulate(params: StarmaGarchParams, W, T: int, N: int, burn_in: int = 500, seed: int = 0,
                return_shocks: bool = False):
    """Simulate a T x N panel; with ``return_shocks`` also return the shocks."""
    csr = _csr(W, N)
    omega = params.omega_vector(N)
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((T + burn_in, N))
    out = np.empty_like(z)
    shocks = np.empty_like(z)
    h = omega / (1.0 - params.alpha - params.beta)
    eps = np.zeros(N)
    dev = np.zeros(N)
    a, b, le, leps = (np.empty(N) for _ in range(4))
    for t in range(z.shape[0]):
        _spmv(*csr, eps**2, a)
        _spmv(*csr, h, b)
        h = omega + params.alpha * a + params.beta * b
        _spmv(*csr, dev, le)
        _spmv(*csr, eps, leps)
        eps = np.sqrt(h) * z[t]
        dev = params.phi * le + params.theta * leps + eps
        out[t] = params.mu + dev
        shocks[t] = eps
    if return_shocks:
        return out[burn_in:], shocks[burn_in:]
    return out[burn_in:]


# --- estimation -----------------------------------------------------------


def _unpack(x, n_omega: int):
    mu = float(x[0])
    phi = _COEF_CAP * math.tanh(x[1])
    theta = _COEF_CAP * math.tanh(x[2])
    omega = np.exp(x[3 : 3 + n_omega])
    a, b = _optim.raw_to_arch_pair(x[3 + n_omega], x[4 + n_omega])
    return mu, phi, theta, omega, a, b


def _pack(mu, phi, theta, omega, a, b) -> np.ndarray:
    return np.concatenate(
        ([mu, math.atanh(phi / _COEF_CAP), math.atanh(theta / _COEF_CAP)],
         np.log(np.atleast_1d(omega)), _optim.arch_pair_to_raw(a, b))
    )


def _starts(e: np.ndarray, n_omega: int, seed: int) -> list[np.ndarray]:
    mu0 = float(e.mean())
    var0 = float(e.var())
    om = np.full(n_omega, 0.3 * var0)
    out = [_pack(mu0, 0.0, 0.0, om, 0.1, 0.6)]
    rng = np.random.default_rng(seed)
    for _ in range(2):
        phi, theta = rng.uniform(-0.6, 0.6, 2)
        a = rng.uniform(0.05, 0.3)
        b = rng.uniform(0.2, 0.9 - a)
        out.append(_pack(mu0, phi, theta, om * (1 - a - b) / 0.3, a, b))
    return out


def fit_st(e, W, *, per_station_omega: bool = False, h1=None, seed: int = 0, n_starts: int = 3) -> StFit:
    """Gaussian QML fit; boundary estimates of alpha or beta get a flag,
    p-value 0.5 and no standard error."""
    e = _as_panel(e)
    T, N = e.shape
    if T < MIN_T:
        raise InsufficientSample(f"need at least {MIN_T} time points, got {T}")
    if N < 2:
        raise ShapeMismatch("need at least two stations")
    if not np.all(np.isfinite(e)):
        raise NonConvergence("input panel contains non-finite values")
    csr = _csr(W, N)
    n_om = N if per_station_omega else 1
    scale = T * N

    def omega_vec(om):
        return om if per_station_omega else np.full(N, om[0])

    def neg_ll(mu, phi, theta, om, a, b):
        eps, h = _filter_arrays(csr, e, mu, phi, theta, omega_vec(om), a, b, h1)
        if not np.all(h > 0):
            return 1e10
        ll = _panel_loglik(eps, h)
        return -ll if np.isfinite(ll) else 1e10

    def objective(x):
        return neg_ll(*_unpack(x, n_om)) / scale

    lvar = math.log(max(float(e.var()), 1e-12))
    bounds = [(None, None), (-8, 8), (-8, 8)] + [(lvar - 30, lvar + 10)] * n_om + [(-25, 25), (-25, 25)]
    best = None
    for x0 in _starts(e, n_om, seed)[:n_starts]:
        res = _optim.minimize(objective, x0, bounds)
        if np.isfinite(res.fun) and (best is None or res.fun < best.fun):
            best = res
    if best is None or best.fun >= 1e9:
        raise NonConvergence("no start reached a finite likelihood")

    mu, phi, theta, om, a, b = _unpack(best.x, n_om)
    params = StarmaGarchParams(mu, phi, theta, om if per_station_omega else float(om[0]), a, b)
    natural = np.concatenate(([mu, phi, theta], om, [a, b]))
    names = ["mu", "phi", "theta"] + (
        [f"omega_{i}" for i in range(N)] if per_station_omega else ["omega"]) + ["alpha", "beta"]
    at_bound = {"alpha": a < _BOUNDARY, "beta": b < _BOUNDARY}
    free = np.ones(natural.size, bool)
    free[-2] = not at_bound["alpha"]
    free[-1] = not at_bound["beta"]

    def neg_natural(th):
        om_, a_, b_ = th[3 : 3 + n_om], th[-2], th[-1]
        if np.any(om_ <= 0) or a_ < 0 or b_ < 0 or abs(th[1]) >= 1 or abs(th[2]) >= 1:
            return 1e10
        return neg_ll(th[0], th[1], th[2], om_, a_, b_)

    se, _ = _optim.hessian_std_errors(neg_natural, natural, free)
    pv = _optim.wald_pvalue(natural, se)
    for k, name in ((-2, "alpha"), (-1, "beta")):
        if at_bound[name]:
            pv[k] = 0.5

    eps, h = _filter_arrays(csr, e, mu, phi, theta, omega_vec(om), a, b, h1)
    ll = float(_panel_loglik(eps, h))
    k = natural.size
    return StFit(
        params=params,
        std_errors=dict(zip(names, se.tolist())),
        pvalues=dict(zip(names, pv.tolist())),
        boundary=at_bound,
        loglik=ll,
        aic=-2.0 * ll + 2.0 * k,
        bic=-2.0 * ll + k * math.log(T * N),
        h_path=h,
        eps_path=eps,
        h1=h[0].copy(),
        n_params=k,
        converged=bool(best.success),
        message=str(best.message),
    )


# --- forecasting ----------------------------------------------------------


def st_forecast(fit: StFit, e_hist, W) -> np.ndarray:
    """Next-day variance vector after filtering ``e_hist`` with frozen parameters."""
    e_hist = _as_panel(e_hist)
    N = e_hist.shape[1]
    p = fit.params
    h1 = fit.h1 if fit.h1.shape == (N,) else None
    eps, h = st_filter(p, W, e_hist, h1)
    Wm = W.matrix if isinstance(W, WeightMatrix) else np.asarray(W, dtype=float)
    return p.omega_vector(N) + p.alpha * (Wm @ eps[-1] ** 2) + p.beta * (Wm @ h[-1])


def st_forecast_path(fit: StFit, W, e_full, n_train: int) -> np.ndarray:
    """Rolling one-step-ahead variances for rows ``n_train..`` of ``e_full``.

    Row t of the filtered variance only uses data through t-1, so filtering
    the full sample with frozen parameters and the training start values is
    the recursive scheme.
    """
    _, h = st_filter(fit.params, W, e_full, fit.h1)
    return h[n_train:]


def summary_frame(fits: dict) -> pd.DataFrame:
    """Long-format parameter table keyed by (weight, height, source).

    ``fits`` maps ``(weight, height, source)`` tuples to :class:`StFit`.
    """
    rows = []
    for (weight, height, source), f in fits.items():
        d = f.params.as_dict()
        for name in PARAM_NAMES:
            est = d[name]
            if name == "omega" and np.ndim(est):
                est = float(np.mean(est))
            key = name if name in f.std_errors else f"{name}_0"
            rows.append({
                "weight": weight, "height": height, "source": source, "param": name,
                "estimate": float(est),
                "std_error": f.std_errors.get(key, np.nan),
                "p_value": f.pvalues.get(key, np.nan),
                "boundary": bool(f.boundary.get(name, False)),
            })
        for name in ("aic", "bic", "loglik"):
            rows.append({"weight": weight, "height": height, "source": source, "param": name,
                         "estimate": getattr(f, name), "std_error": np.nan, "p_value": np.nan,
                         "boundary": False})
    return pd.DataFrame(rows)
