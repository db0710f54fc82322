"""Residual diagnostics: Ljung-Box, ARCH-LM, Moran's I, kurtosis, pass rates."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy import stats

from .errors import (
    AllZeroWeights,
    ConstantSeries,
    ConstantValues,
    DimensionMismatch,
    EmptyList,
    SingularRegression,
    TooFewObservations,
)
from .weights import WeightMatrix


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    df: int | None = None

    __test__ = False  # keep pytest from collecting this class


@dataclass(frozen=True)
class MoranResult(TestResult):
    expected: float = float("nan")
    variance: float = float("nan")
    z: float = float("nan")
    n_used: int = 0
    n_dropped: int = 0

    __test__ = False


def ljung_box(series, lags: int) -> TestResult:
    x = np.asarray(series, dtype=float)
    T = x.size
    if lags < 1 or T <= lags:
        raise TooFewObservations(f"Ljung-Box needs T > lags >= 1 (T={T}, lags={lags})")
    z = x - x.mean()
    denom = z @ z
    if denom == 0.0:
        raise ConstantSeries("Ljung-Box on a constant series")
    h = np.arange(1, lags + 1)
    rho = np.array([z[k:] @ z[:-k] for k in h]) / denom
    q = T * (T + 2) * np.sum(rho**2 / (T - h))
    return TestResult(float(q), float(stats.chi2.sf(q, lags)), lags)


def arch_lm(residuals, lags: int) -> TestResult:
    """Engle's test: T*R^2 from regressing e_t^2 on its own lags."""
    e2 = np.asarray(residuals, dtype=float) ** 2
    T = e2.size
    if lags < 1 or T <= 2 * lags:
        raise TooFewObservations(f"ARCH-LM needs T > 2*lags (T={T}, lags={lags})")
    y = e2[lags:]
    X = np.column_stack([np.ones(y.size)] + [e2[lags - k : T - k] for k in range(1, lags + 1)])
    tss = np.sum((y - y.mean()) ** 2)
    if tss <= 1e-14 * max(1.0, y @ y) or np.linalg.matrix_rank(X) < X.shape[1]:
        raise SingularRegression("ARCH-LM auxiliary regression is singular")
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    r2 = 1.0 - np.sum((y - X @ beta) ** 2) / tss
    stat = y.size * r2
    return TestResult(float(stat), float(stats.chi2.sf(stat, lags)), lags)


def _moran_moments(w: np.ndarray, z: np.ndarray):
    n = z.size
    s0 = w.sum()
    sym = w + w.T
    s1 = 0.5 * np.sum(sym**2)
    s2 = np.sum((w.sum(axis=1) + w.sum(axis=0)) ** 2)
    m2 = z @ z
    b2 = n * np.sum(z**4) / m2**2
    ei = -1.0 / (n - 1)
    ei2 = (
        n * ((n * n - 3 * n + 3) * s1 - n * s2 + 3 * s0**2)
        - b2 * ((n * n - n) * s1 - 2 * n * s2 + 6 * s0**2)
    ) / ((n - 1) * (n - 2) * (n - 3) * s0**2)
    return s0, ei, ei2 - ei**2


def morans_i(values, W: WeightMatrix | np.ndarray) -> MoranResult:
    """Global Moran's I with the randomisation variance and a two-sided p.

    Stations whose weight row is all zero are removed before computing
    the statistic; ``n_dropped`` reports how many.
    """
    x = np.asarray(values, dtype=float).ravel()
    w = W.dense() if isinstance(W, WeightMatrix) else np.asarray(W, dtype=float)
    if w.shape != (x.size, x.size):
        raise DimensionMismatch(f"weights {w.shape} do not match {x.size} values")
    keep = w.sum(axis=1) != 0
    if not keep.any():
        raise AllZeroWeights("weight matrix has no nonzero entries")
    n_dropped = int((~keep).sum())
    w = w[np.ix_(keep, keep)]
    x = x[keep]
    n = x.size
    if n < 4:
        raise TooFewObservations(f"Moran's I needs at least 4 connected units, got {n}")
    if w.sum() == 0:
        raise AllZeroWeights("no weights remain among connected units")
    z = x - x.mean()
    m2 = z @ z
    if m2 <= 1e-300 or np.ptp(x) == 0.0:
        raise ConstantValues("Moran's I is undefined for constant values")
    s0, ei, var = _moran_moments(w, z)
    i_stat = (n / s0) * (z @ w @ z) / m2
    zscore = (i_stat - ei) / np.sqrt(var) if var > 0 else float("nan")
    p = 2.0 * stats.norm.sf(abs(zscore)) if np.isfinite(zscore) else float("nan")
    return MoranResult(
        statistic=float(i_stat),
        p_value=float(p),
        df=None,
        expected=float(ei),
        variance=float(var),
        z=float(zscore),
        n_used=n,
        n_dropped=n_dropped,
    )


def excess_kurtosis(series) -> float:
    x = np.asarray(series, dtype=float)
    if x.size < 4:
        raise TooFewObservations("kurtosis needs at least 4 observations")
    z = x - x.mean()
    m2 = np.mean(z**2)
    if m2 == 0.0:
        raise ConstantSeries("kurtosis of a constant series")
    return float(np.mean(z**4) / m2**2 - 3.0)


def pass_rates(results: Iterable[TestResult | float], level: float = 0.05) -> float:
    """Percentage of tests whose p-value exceeds ``level``; undefined p-values are skipped."""
    p = [r.p_value if isinstance(r, TestResult) else float(r) for r in results]
    p = [v for v in p if np.isfinite(v)]
    if not p:
        raise EmptyList("no test results to aggregate")
    return 100.0 * sum(v > level for v in p) / len(p)


def ljung_box_panel(values: np.ndarray, lags: int = 10, squared: bool = False) -> list[TestResult]:
    """Per-column Ljung-Box on a T x N panel (optionally on squares)."""
    v = np.asarray(values, dtype=float)
    if squared:
        v = v**2
    return [ljung_box(v[:, j], lags) for j in range(v.shape[1])]


def moran_panel(values: np.ndarray, W, squared: bool = False) -> list[MoranResult]:
    """Moran's I on every cross-section (row) of a T x N panel.

    Cross-sections with constant values are skipped.
    """
    v = np.asarray(values, dtype=float)
    if squared:
        v = v**2
    w = W.dense() if isinstance(W, WeightMatrix) else W
    out = []
    for row in v:
        try:
            out.append(morans_i(row, w))
        except ConstantValues:
            continue
    return out


def residual_diagnostics(values: np.ndarray, W, lags: int = 10, level: float = 0.05) -> dict[str, float]:
    """Pass rates (percent) of temporal and spatial tests on residuals and squares."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise EmptyList("empty residual panel")
    return {
        "ljung_box_res": pass_rates(ljung_box_panel(v, lags), level),
        "ljung_box_sq": pass_rates(ljung_box_panel(v, lags, squared=True), level),
        "moran_res": _moran_rate(v, W, False, level),
        "moran_sq": _moran_rate(v, W, True, level),
    }


def _moran_rate(v, W, squared, level) -> float:
    # networks with fewer than four connected stations have no spatial test
    try:
        return pass_rates(moran_panel(v, W, squared), level)
    except (TooFewObservations, EmptyList):
        return float("nan")


def station_moran(values: np.ndarray, W) -> dict[str, MoranResult]:
    """Moran's I of station time-averages of e and e^2.

    Returns an all-NaN result where the statistic is undefined (too few
    connected stations or constant averages).
    """
    v = np.asarray(values, dtype=float)
    out = {}
    for key, x in (("mean", v.mean(axis=0)), ("mean_sq", (v**2).mean(axis=0))):
        try:
            out[key] = morans_i(x, W)
        except (TooFewObservations, ConstantValues):
            out[key] = MoranResult(statistic=float("nan"), p_value=float("nan"))
    return out


def arch_lm_rejection_rate(values: np.ndarray, lags: int = 10, level: float = 0.05) -> float:
    res = [arch_lm(values[:, j], lags) for j in range(values.shape[1])]
    return 100.0 - pass_rates(res, level)

