"""
Station-wise GARCH(1,1) and EGARCH(1,1) with Gaussian likelihood.

Fits maximise the likelihood over unconstrained transforms of the
parameters (L-BFGS-B), report Hessian standard errors and information
criteria, and produce one-step-ahead variance forecasts.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
import pandas as pd
from numba import njit

from . import _optim
from .errors import DegenerateInput, InvalidParameters, NonConvergence, SeriesTooShort

LOG_2PI = math.log(2.0 * math.pi)
ABS_Z_MEAN = math.sqrt(2.0 / math.pi)
_LNH_CLIP = 300.0
_BOUNDARY = 1e-4

InitMode = Literal["sample_variance", "unconditional"]


@dataclass(frozen=True)
class GarchParams:
    omega: float
    alpha: float
    beta: float

    def __post_init__(self):
        if not self.omega > 0 or self.alpha < 0 or self.beta < 0:
            raise InvalidParameters(f"GARCH needs omega > 0, alpha >= 0, beta >= 0: {self}")
        if self.alpha + self.beta >= 1:
            raise InvalidParameters(f"GARCH needs alpha + beta < 1: {self}")

    @property
    def persistence(self) -> float:
        return self.alpha + self.beta

    def as_array(self) -> np.ndarray:
        return np.array([self.omega, self.alpha, self.beta])


@dataclass(frozen=True)
class EgarchParams:
    omega: float
    alpha: float
    gamma: float
    beta: float

    def __post_init__(self):
        if not abs(self.beta) < 1:
            raise InvalidParameters(f"EGARCH needs |beta| < 1: {self}")
        if not all(np.isfinite([self.omega, self.alpha, self.gamma, self.beta])):
            raise InvalidParameters(f"EGARCH parameters must be finite: {self}")

    @property
    def persistence(self) -> float:
        return self.beta

    def as_array(self) -> np.ndarray:
        return np.array([self.omega, self.alpha, self.gamma, self.beta])


@dataclass(frozen=True)
class UniFit:
    model: str
    params: GarchParams | EgarchParams
    std_errors: dict
    pvalues: dict
    loglik: float
    aic: float
    bic: float
    h: np.ndarray = field(repr=False)
    std_resid: np.ndarray = field(repr=False)
    h0: float
    converged: bool
    message: str = ""

    @property
    def nobs(self) -> int:
        return self.h.size


# --- recursions -----------------------------------------------------------


@njit(cache=True)
def _garch_var(omega, alpha, beta, e, h0):
    T = e.shape[0]
    h = np.empty(T)
    h[0] = h0
    for t in range(1, T):
        h[t] = omega + alpha * e[t - 1] ** 2 + beta * h[t - 1]
    return h


@njit(cache=True)
def _egarch_var(omega, alpha, gamma, beta, e, h0):
    T = e.shape[0]
    lnh = np.empty(T)
    lnh[0] = math.log(h0)
    for t in range(1, T):
        z = e[t - 1] * math.exp(-0.5 * lnh[t - 1])
        v = omega + beta * lnh[t - 1] + alpha * (abs(z) - ABS_Z_MEAN) + gamma * z
        lnh[t] = min(max(v, -_LNH_CLIP), _LNH_CLIP)
    return np.exp(lnh)


@njit(cache=True)
def _gauss_loglik(e, h):
    s = 0.0
    for t in range(e.shape[0]):
        s += math.log(h[t]) + e[t] ** 2 / h[t]
    return -0.5 * (e.shape[0] * LOG_2PI + s)


def garch_filter(params: GarchParams, e, h0: float) -> np.ndarray:
    return _garch_var(params.omega, params.alpha, params.beta, np.asarray(e, dtype=float), float(h0))


def egarch_filter(params: EgarchParams, e, h0: float) -> np.ndarray:
    return _egarch_var(params.omega, params.alpha, params.gamma, params.beta, np.asarray(e, dtype=float), float(h0))


def garch_loglik(params: GarchParams, e, h0: float | None = None) -> float:
    e = np.asarray(e, dtype=float)
    h = garch_filter(params, e, np.var(e) if h0 is None else h0)
    return float(_gauss_loglik(e, h))


def egarch_loglik(params: EgarchParams, e, h0: float | None = None) -> float:
    e = np.asarray(e, dtype=float)
    h = egarch_filter(params, e, np.var(e) if h0 is None else h0)
    return float(_gauss_loglik(e, h))


# --- estimation -----------------------------------------------------------


def _check_input(e) -> np.ndarray:
    e = np.asarray(e, dtype=float)
    if e.ndim != 1:
        raise DegenerateInput("expected a 1-D residual series")
    if not np.all(np.isfinite(e)):
        raise DegenerateInput("residual series contains non-finite values")
    if np.ptp(e) == 0.0:
        raise DegenerateInput("residual series is constant")
    if e.size < 100:
        raise SeriesTooShort(f"need at least 100 observations, got {e.size}")
    return e


def _finish(model, params, e, h0, free_names, natural, neg_ll_natural, free_mask, res) -> UniFit:
    h = (garch_filter if model == "garch" else egarch_filter)(params, e, h0)
    ll = float(_gauss_loglik(e, h))
    k = len(free_names)
    se, _ = _optim.hessian_std_errors(neg_ll_natural, natural, free_mask)
    pv = _optim.wald_pvalue(natural, se)
    if not np.isfinite(ll):
        raise NonConvergence(f"{model} fit produced a non-finite likelihood: {res.message}")
    return UniFit(
        model=model,
        params=params,
        std_errors=dict(zip(free_names, se.tolist())),
        pvalues=dict(zip(free_names, pv.tolist())),
        loglik=ll,
        aic=-2.0 * ll + 2.0 * k,
        bic=-2.0 * ll + k * math.log(e.size),
        h=h,
        std_resid=e / np.sqrt(h),
        h0=h0,
        converged=bool(res.success),
        message=str(res.message),
    )


def fit_garch(e, init: InitMode = "sample_variance") -> UniFit:
    e = _check_input(e)
    var = float(np.var(e))
    scale = e.size

    def unpack(x):
        a, b = _optim.raw_to_arch_pair(x[1], x[2])
        return math.exp(x[0]), a, b

    def h0_for(omega, a, b):
        return omega / (1.0 - a - b) if init == "unconditional" else var

    def objective(x):
        omega, a, b = unpack(x)
        ll = _gauss_loglik(e, _garch_var(omega, a, b, e, h0_for(omega, a, b)))
        return -ll / scale if np.isfinite(ll) else 1e10

    x0 = np.array([math.log(0.1 * var), *_optim.arch_pair_to_raw(0.05, 0.85)])
    bounds = [(math.log(var) - 30, math.log(var) + 10), (-25, 25), (-25, 25)]
    res = _optim.minimize(objective, x0, bounds)
    omega, a, b = unpack(res.x)
    params = GarchParams(omega, a, b)

    def neg_natural(th):
        if th[0] <= 0:
            return 1e10
        ll = _gauss_loglik(e, _garch_var(th[0], th[1], th[2], e, h0_for(*th)))
        return -ll if np.isfinite(ll) else 1e10

    free = np.array([True, a > _BOUNDARY, b > _BOUNDARY])
    return _finish("garch", params, e, h0_for(omega, a, b), ["omega", "alpha", "beta"],
                   params.as_array(), neg_natural, free, res)


def fit_egarch(e, init: InitMode = "sample_variance") -> UniFit:
    e = _check_input(e)
    var = float(np.var(e))
    scale = e.size

    def unpack(x):
        return float(x[0]), float(x[1]), float(x[2]), _optim.PERSISTENCE_CAP * math.tanh(x[3])

    def h0_for(omega, beta):
        return math.exp(omega / (1.0 - beta)) if init == "unconditional" else var

    def objective(x):
        omega, a, g, b = unpack(x)
        ll = _gauss_loglik(e, _egarch_var(omega, a, g, b, e, h0_for(omega, b)))
        return -ll / scale if np.isfinite(ll) else 1e10

    best = None
    for beta0, alpha0 in ((0.85, 0.1), (0.5, 0.2)):
        x0 = np.array([(1 - beta0) * math.log(var), alpha0, 0.0, math.atanh(beta0 / _optim.PERSISTENCE_CAP)])
        bounds = [(-50, 50), (-10, 10), (-10, 10), (-8, 8)]
        res = _optim.minimize(objective, x0, bounds)
        if best is None or res.fun < best.fun:
            best = res
    omega, a, g, b = unpack(best.x)
    params = EgarchParams(omega, a, g, b)

    def neg_natural(th):
        if abs(th[3]) >= 1:
            return 1e10
        ll = _gauss_loglik(e, _egarch_var(th[0], th[1], th[2], th[3], e, h0_for(th[0], th[3])))
        return -ll if np.isfinite(ll) else 1e10

    return _finish("egarch", params, e, h0_for(omega, b), ["omega", "alpha", "gamma", "beta"],
                   params.as_array(), neg_natural, None, best)


def fit_panel(values: np.ndarray, model: str = "garch", threads: int = 1) -> list[UniFit]:
    fit = {"garch": fit_garch, "egarch": fit_egarch}[model]
    cols = [np.ascontiguousarray(values[:, j]) for j in range(values.shape[1])]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fit, cols))
    return [fit(c) for c in cols]


# --- forecasting ----------------------------------------------------------


def uni_forecast(fit: UniFit, e_last: float, h_last: float) -> float:
    p = fit.params
    if isinstance(p, GarchParams):
        return p.omega + p.alpha * e_last**2 + p.beta * h_last
    z = e_last / math.sqrt(h_last)
    return math.exp(p.omega + p.beta * math.log(h_last) + p.alpha * (abs(z) - ABS_Z_MEAN) + p.gamma * z)


def uni_forecast_path(fit: UniFit, e_full, n_train: int) -> np.ndarray:
    """One-step-ahead variances for observations ``n_train..`` of ``e_full``.

    Parameters and the initial variance stay at their training values; each
    forecast uses realised residuals up to the previous day.
    """
    e_full = np.asarray(e_full, dtype=float)
    filt = garch_filter if fit.model == "garch" else egarch_filter
    return filt(fit.params, e_full, fit.h0)[n_train:]


def model_preference(fits_garch: Sequence[UniFit], fits_egarch: Sequence[UniFit], criterion: str = "aic") -> float:
    """Percentage of stations where EGARCH has the strictly lower criterion."""
    if len(fits_garch) != len(fits_egarch) or not fits_garch:
        raise InvalidParameters("need matching, non-empty fit lists")
    wins = [getattr(e, criterion) < getattr(g, criterion) for g, e in zip(fits_garch, fits_egarch)]
    return 100.0 * sum(wins) / len(wins)


def fits_table(station_ids: Sequence[str], fits: Sequence[UniFit]) -> pd.DataFrame:
    rows = []
    for sid, f in zip(station_ids, fits):
        p = f.params
        rows.append(
            {
                "station": sid,
                "model": f.model,
                "omega": p.omega,
                "alpha": p.alpha,
                "beta": p.beta,
                "gamma": getattr(p, "gamma", np.nan),
                "se_alpha": f.std_errors.get("alpha", np.nan),
                "se_beta": f.std_errors.get("beta", np.nan),
                "se_gamma": f.std_errors.get("gamma", np.nan),
                "persistence": p.persistence,
                "loglik": f.loglik,
                "aic": f.aic,
                "bic": f.bic,
                "converged": f.converged,
            }
        )
    return pd.DataFrame(rows)


# --- simulation -----------------------------------------------------------


def simulate_garch(params: GarchParams, T: int, seed: int, burn_in: int = 500) -> np.ndarray:
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(T + burn_in)
    e = np.empty_like(z)
    h = params.omega / (1.0 - params.persistence)
    for t in range(z.size):
        e[t] = math.sqrt(h) * z[t]
        h = params.omega + params.alpha * e[t] ** 2 + params.beta * h
    return e[burn_in:]


def simulate_egarch(params: EgarchParams, T: int, seed: int, burn_in: int = 500) -> np.ndarray:
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(T + burn_in)
    e = np.empty_like(z)
    lnh = params.omega / (1.0 - params.beta)
    for t in range(z.size):
        e[t] = math.exp(0.5 * lnh) * z[t]
        lnh = params.omega + params.beta * lnh + params.alpha * (abs(z[t]) - ABS_Z_MEAN) + params.gamma * z[t]
    return e[burn_in:]
