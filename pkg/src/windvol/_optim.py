"""Shared optimisation and inference helpers."""

from __future__ import annotations

import warnings

import numpy as np
from scipy import optimize, stats
from scipy.special import expit, logit
from statsmodels.tools.numdiff import approx_hess3

PERSISTENCE_CAP = 0.9999


def minimize(objective, x0, bounds=None, maxiter: int = 2000) -> optimize.OptimizeResult:
    """Box-constrained quasi-Newton (L-BFGS-B) with central-difference gradients."""
    with np.errstate(all="ignore"):
        return optimize.minimize(
            objective,
            np.asarray(x0, dtype=float),
            method="L-BFGS-B",
            jac="3-point",
            bounds=bounds,
            options={"maxiter": maxiter, "ftol": 1e-13, "gtol": 1e-8, "maxcor": 20},
        )


def arch_pair_to_raw(alpha: float, beta: float) -> tuple[float, float]:
    """Inverse of :func:`raw_to_arch_pair`."""
    s = np.clip((alpha + beta) / PERSISTENCE_CAP, 1e-6, 1 - 1e-6)
    share = np.clip(alpha / max(alpha + beta, 1e-12), 1e-6, 1 - 1e-6)
    return float(logit(s)), float(logit(share))


def raw_to_arch_pair(b: float, c: float) -> tuple[float, float]:
    """Map two reals onto alpha, beta >= 0 with alpha + beta <= PERSISTENCE_CAP."""
    s = PERSISTENCE_CAP * expit(b)
    share = expit(c)
    return float(s * share), float(s * (1.0 - share))


def hessian_std_errors(neg_loglik, theta, free=None):
    """Standard errors from the inverse numerical Hessian of ``neg_loglik``.

    Parameters flagged ``False`` in ``free`` are held fixed and get NaN.
    Returns ``(se, cov)``; both are NaN when the Hessian is not positive
    definite.
    """
    theta = np.asarray(theta, dtype=float)
    free = np.ones(theta.size, bool) if free is None else np.asarray(free, bool)
    se = np.full(theta.size, np.nan)
    cov = np.full((theta.size, theta.size), np.nan)
    if not free.any():
        return se, cov

    def f(sub):
        full = theta.copy()
        full[free] = sub
        return neg_loglik(full)

    with np.errstate(all="ignore"):
        H = approx_hess3(theta[free], f)
    try:
        np.linalg.cholesky(H)
        sub_cov = np.linalg.inv(H)
    except np.linalg.LinAlgError:
        warnings.warn("numerical Hessian is not positive definite; standard errors unavailable", RuntimeWarning)
        return se, cov
    se[free] = np.sqrt(np.diag(sub_cov))
    cov[np.ix_(free, free)] = sub_cov
    return se, cov


def wald_pvalue(est, se):
    est, se = np.asarray(est, float), np.asarray(se, float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return 2.0 * stats.norm.sf(np.abs(est / se))
