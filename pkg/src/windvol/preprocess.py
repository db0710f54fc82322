"""Seasonal-trend decomposition by loess and AR(1) prewhitening, per station."""

from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import DegenerateVariance, NonFinite, SeriesTooShort
from .ingest import Panel

logger = logging.getLogger(__name__)

PERIODIC = "periodic"


@dataclass(frozen=True)
class Decomposition:
    seasonal: np.ndarray
    trend: np.ndarray
    remainder: np.ndarray


@dataclass(frozen=True)
class Ar1Fit:
    phi: float
    residuals: np.ndarray
    sigma2: float
    clamped: bool = False


@dataclass(frozen=True)
class ResidualPanel:
    """(T-1) x N innovations from a mean filter, aligned to ``dates``."""

    values: np.ndarray
    dates: pd.DatetimeIndex
    station_ids: tuple[str, ...]
    variable: str
    source: str = "ar1"

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def N(self) -> int:
        return self.values.shape[1]

    def to_frame(self) -> pd.DataFrame:
        T, N = self.values.shape
        return pd.DataFrame(
            {
                "date": np.repeat(self.dates.strftime("%Y-%m-%d").to_numpy(), N),
                "station_id": np.tile(np.asarray(self.station_ids, dtype=object), T),
                "residual": self.values.ravel(),
            }
        )

    def to_csv(self, path, header_lines: tuple[str, ...] = ()) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            self.to_frame().to_csv(fh, index=False, float_format="%.17g", lineterminator="\n")

    @classmethod
    def from_csv(cls, path, variable: str = "", source: str = "ar1") -> "ResidualPanel":
        df = pd.read_csv(path, comment="#", dtype={"station_id": str}, float_precision="round_trip")
        wide = df.pivot(index="date", columns="station_id", values="residual")
        wide = wide.sort_index()
        return cls(
            wide.to_numpy(dtype=float),
            pd.DatetimeIndex(pd.to_datetime(wide.index)),
            tuple(wide.columns),
            variable,
            source,
        )


@dataclass(frozen=True)
class PreprocessResult:
    residuals: ResidualPanel
    phi: np.ndarray
    decompositions: tuple[Decomposition, ...]


def _next_odd(x: float) -> int:
    n = int(math.ceil(x))
    return n if n % 2 == 1 else n + 1


def loess(y, span: int, degree: int = 1, weights=None, x_eval=None) -> np.ndarray:
    """Local polynomial smoother on the equally spaced grid 0..n-1.

    Tricube neighbourhood of ``span`` nearest points, degree 0 or 1,
    optional robustness ``weights``; evaluated at ``x_eval`` (default: the
    grid itself, extrapolation allowed).
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    x_eval = np.arange(n, dtype=float) if x_eval is None else np.asarray(x_eval, dtype=float)
    rw = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    q = min(span, n)

    # nearest-q window, shifted inside the grid at the ends
    left = np.clip(np.floor(x_eval - (q - 1) / 2.0 + 0.5).astype(int), 0, n - q)
    idx = left[:, None] + np.arange(q)[None, :]
    xj = idx.astype(float)
    dist = np.abs(xj - x_eval[:, None])
    h = np.maximum(x_eval - left, left + q - 1 - x_eval)
    if span > n:
        h = h + (span - n) // 2
    h = np.maximum(h, 1e-12)[:, None]

    r = dist / h
    w = np.where(r <= 0.999, (1.0 - np.clip(r, 0, 1) ** 3) ** 3, 0.0)
    w = np.where(r <= 0.001, 1.0, w) * rw[idx]
    wsum = w.sum(axis=1, keepdims=True)
    ok = wsum[:, 0] > 0
    w = np.divide(w, wsum, out=np.zeros_like(w), where=wsum > 0)

    if degree >= 1:
        a = (w * xj).sum(axis=1, keepdims=True)
        c = (w * (xj - a) ** 2).sum(axis=1, keepdims=True)
        rng = float(n - 1)
        use = np.sqrt(c) > 0.001 * rng
        b = np.divide(x_eval[:, None] - a, c, out=np.zeros_like(c), where=use)
        w = w * (b * (xj - a) + 1.0)

    out = (w * y[idx]).sum(axis=1)
    return np.where(ok, out, np.nan)


def _moving_average(x: np.ndarray, length: int) -> np.ndarray:
    c = np.cumsum(np.concatenate(([0.0], x)))
    return (c[length:] - c[:-length]) / length


def stl_decompose(
    series,
    period: int = 365,
    *,
    cycle=None,
    seasonal: int | str = PERIODIC,
    trend: int | None = None,
    low_pass: int | None = None,
    inner: int = 2,
    outer: int = 1,
) -> Decomposition:
    """Additive seasonal-trend decomposition by iterated loess.

    ``cycle`` gives the subseries index (0..period-1) of every observation;
    by default it is the position modulo ``period``. A non-default cycle
    requires the periodic seasonal window. ``outer`` counts robustness
    reweighting passes after the first fit.
    """
    y = np.asarray(series, dtype=float)
    n = y.size
    if period < 2:
        raise SeriesTooShort(f"period must be >= 2, got {period}")
    if n < 2 * period:
        raise SeriesTooShort(f"need at least {2 * period} observations for period {period}, got {n}")
    if not np.all(np.isfinite(y)):
        raise NonFinite("series contains non-finite values")

    periodic = seasonal == PERIODIC
    if cycle is None:
        cycle = np.arange(n) % period
    else:
        cycle = np.asarray(cycle, dtype=int)
        if not periodic:
            raise ValueError("a custom cycle index requires the periodic seasonal window")
        if cycle.shape != (n,) or cycle.min() < 0 or cycle.max() >= period:
            raise ValueError("cycle must hold one index in [0, period) per observation")
    ns = 10 * n + 1 if periodic else int(seasonal)
    nt = trend if trend is not None else _next_odd(1.5 * period / (1.0 - 1.5 / ns))
    nl = low_pass if low_pass is not None else _next_odd(period)

    # cycle index of the padded sequence, one period on each side
    pad_before = (cycle[0] - period + np.arange(period)) % period
    pad_after = (cycle[-1] + 1 + np.arange(period)) % period
    cycle_ext = np.concatenate((pad_before, cycle, pad_after))

    rw = np.ones(n)
    tr = np.zeros(n)
    seas = np.zeros(n)
    for k in range(outer + 1):
        for _ in range(inner):
            detr = y - tr
            if periodic:
                num = np.bincount(cycle, weights=rw * detr, minlength=period)
                den = np.bincount(cycle, weights=rw, minlength=period)
                means = np.divide(num, den, out=np.zeros(period), where=den > 0)
                c_ext = means[cycle_ext]
            else:
                c_ext = np.empty(n + 2 * period)
                for j in range(period):
                    pos = np.arange(j, n, period)
                    m = pos.size
                    sm = loess(detr[pos], ns, 1, rw[pos], np.arange(-1, m + 1, dtype=float))
                    c_ext[j + period * np.arange(m + 2)] = sm
            low = _moving_average(_moving_average(_moving_average(c_ext, period), period), 3)
            low = loess(low, nl, 1)
            seas = c_ext[period : period + n] - low
            tr = loess(y - seas, nt, 1, rw)
        if k < outer:
            resid = np.abs(y - seas - tr)
            hh = 6.0 * np.median(resid)
            if hh <= 0:
                rw = np.ones(n)
            else:
                u = resid / hh
                rw = np.where(u <= 0.001, 1.0, np.where(u <= 0.999, (1 - np.clip(u, 0, 1) ** 2) ** 2, 0.0))
    return Decomposition(seasonal=seas, trend=tr, remainder=y - seas - tr)


def day_of_year_cycle(dates, period: int = 365) -> np.ndarray:
    """Subseries index from the calendar: day-of-year clamped to ``period``."""
    doy = pd.DatetimeIndex(dates).dayofyear.to_numpy()
    return np.minimum(doy, period) - 1


def fit_ar1(series) -> Ar1Fit:
    """Conditional least squares AR(1) without intercept."""
    x = np.asarray(series, dtype=float)
    if x.size < 30:
        raise SeriesTooShort(f"AR(1) needs at least 30 observations, got {x.size}")
    if np.ptp(x) == 0.0:
        raise DegenerateVariance("series is constant")
    lag, cur = x[:-1], x[1:]
    denom = lag @ lag
    if denom == 0.0:
        raise DegenerateVariance("lagged series has zero energy")
    phi = float(cur @ lag / denom)
    clamped = False
    if abs(phi) >= 1.0:
        warnings.warn(f"AR(1) coefficient {phi:.4f} outside (-1, 1); clamped", RuntimeWarning, stacklevel=2)
        phi = math.copysign(0.999, phi)
        clamped = True
    resid = cur - phi * lag
    return Ar1Fit(phi=phi, residuals=resid, sigma2=float(resid @ resid / (resid.size - 1)), clamped=clamped)


def _preprocess_one(args):
    sid, series, period, cycle = args
    try:
        if np.ptp(series) == 0.0:
            raise DegenerateVariance("series is constant")
        dec = stl_decompose(series, period, cycle=cycle)
        ar = fit_ar1(dec.remainder)
    except (SeriesTooShort, NonFinite, DegenerateVariance) as exc:
        raise type(exc)(str(exc), station=sid) from exc
    return dec, ar


def preprocess_panel(panel: Panel, period: int = 365, threads: int = 1) -> PreprocessResult:
    """STL then AR(1) for every station column.

    Errors raised for a station carry its id. Output does not depend on
    ``threads``.
    """
    cycle = day_of_year_cycle(panel.dates, period) if period == 365 else None
    jobs = [(sid, panel.values[:, j], period, cycle) for j, sid in enumerate(panel.station_ids)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_preprocess_one, jobs))
    else:
        results = [_preprocess_one(j) for j in jobs]
    decs = tuple(r[0] for r in results)
    fits = [r[1] for r in results]
    resid = np.column_stack([f.residuals for f in fits])
    rp = ResidualPanel(resid, panel.dates[1:], tuple(panel.station_ids), panel.variable, "ar1")
    return PreprocessResult(rp, np.array([f.phi for f in fits]), decs)
