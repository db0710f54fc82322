"""Volatility proxies, log-scale forecast scores and comparison reports."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from .errors import AllExcluded, BadLambda, ShapeMismatch, TooShort

PROXY_FLOOR = 1e-12
DEFAULT_LAMBDA = 0.94
RV5_WINDOW = 5
PROXY_KINDS = ("rv", "ewma", "rv5_sq", "rv5_abs")


@dataclass(frozen=True)
class ProxySeries:
    """T x N variance proxy; NaN marks cells with no value (rv5 warm-up)."""

    kind: str
    values: np.ndarray
    lam: float | None = None

    def __post_init__(self):
        if self.kind not in PROXY_KINDS:
            raise ValueError(f"unknown proxy kind {self.kind!r}")
        v = np.asarray(self.values, dtype=float)
        if np.any(v[np.isfinite(v)] < 0):
            raise ValueError("proxy values must be non-negative")
        object.__setattr__(self, "values", v)

    @property
    def label(self) -> str:
        return {"rv": "RV", "ewma": "EWMA", "rv5_sq": "RV5sq", "rv5_abs": "RV5abs"}[self.kind]


@dataclass(frozen=True)
class Score:
    rmsfe: float
    mafe: float
    n_used: int
    n_excluded: int


@dataclass(frozen=True)
class ScoreRow:
    model: str
    weight: str
    proxy: str
    height: str
    rmsfe: float
    mafe: float
    n_used: int = 0
    n_excluded: int = 0
    block: str = ""

    def __post_init__(self):
        if self.rmsfe < self.mafe - 1e-12 * max(1.0, self.rmsfe):
            raise ValueError(f"RMSFE {self.rmsfe} below MAFE {self.mafe}")


def _panel(eps) -> np.ndarray:
    e = np.asarray(eps, dtype=float)
    return e[:, None] if e.ndim == 1 else e


def rv(eps) -> ProxySeries:
    return ProxySeries("rv", _panel(eps) ** 2)


def ewma(eps, lam: float = DEFAULT_LAMBDA, init=None) -> ProxySeries:
    """RiskMetrics recursion, started at the first squared shock unless ``init`` is given."""
    if not 0.0 < lam < 1.0:
        raise BadLambda(f"lambda must lie in (0, 1), got {lam}")
    e2 = _panel(eps) ** 2
    out = np.empty_like(e2)
    prev = e2[0] if init is None else np.broadcast_to(np.asarray(init, dtype=float), e2.shape[1:])
    for t in range(e2.shape[0]):
        prev = e2[t] if (t == 0 and init is None) else lam * prev + (1.0 - lam) * e2[t]
        out[t] = prev
    return ProxySeries("ewma", out, lam)


def rv5(eps, mode: str = "sq") -> ProxySeries:
    """Trailing five-day proxy; the first four rows are NaN."""
    e = _panel(eps)
    if e.shape[0] < RV5_WINDOW:
        raise TooShort(f"rv5 needs at least {RV5_WINDOW} observations, got {e.shape[0]}")
    if mode == "sq":
        src = e**2
    elif mode == "abs":
        src = np.abs(e)
    else:
        raise ValueError(f"mode must be 'sq' or 'abs', got {mode!r}")
    c = np.cumsum(np.vstack([np.zeros((1, e.shape[1])), src]), axis=0)
    out = np.full(e.shape, np.nan)
    out[RV5_WINDOW - 1 :] = (c[RV5_WINDOW:] - c[:-RV5_WINDOW]) / RV5_WINDOW
    if mode == "abs":
        out = out**2
    return ProxySeries(f"rv5_{mode}", out)


def make_proxy(kind: str, eps, lam: float = DEFAULT_LAMBDA) -> ProxySeries:
    if kind == "rv":
        return rv(eps)
    if kind == "ewma":
        return ewma(eps, lam)
    if kind in ("rv5_sq", "rv5_abs"):
        return rv5(eps, kind.split("_")[1])
    raise ValueError(f"unknown proxy kind {kind!r}")


def score(h_hat, proxy: ProxySeries | np.ndarray) -> Score:
    """Pooled RMSFE and MAFE of log(h_hat) - log(proxy).

    Cells where the proxy is unavailable or at most ``PROXY_FLOOR`` are left
    out and counted.
    """
    h = _panel(h_hat)
    p = _panel(proxy.values if isinstance(proxy, ProxySeries) else proxy)
    if h.shape != p.shape:
        raise ShapeMismatch(f"forecast {h.shape} and proxy {p.shape} differ")
    if np.any(~(h > 0)):
        raise ValueError("forecast variances must be positive")
    keep = np.isfinite(p) & (p > PROXY_FLOOR)
    n_used = int(keep.sum())
    if n_used == 0:
        raise AllExcluded("every proxy cell is unavailable or zero")
    d = np.log(h[keep]) - np.log(p[keep])
    return Score(float(np.sqrt(np.mean(d**2))), float(np.mean(np.abs(d))), n_used, int(keep.size - n_used))


# --- report ---------------------------------------------------------------


@dataclass
class ForecastReport:
    table: pd.DataFrame
    diagnostics: pd.DataFrame = field(default_factory=pd.DataFrame)

    def wide(self) -> pd.DataFrame:
        """Block x matrix x proxy rows; height x metric columns (Table-7 layout)."""
        t = self.table
        if t.empty:
            return t
        value = t.melt(id_vars=["block", "model", "weight", "proxy", "height"], value_vars=["rmsfe", "mafe"],
                       var_name="metric", value_name="value")
        w = value.pivot_table(index=["block", "model", "weight", "proxy"], columns=["height", "metric"],
                              values="value", sort=False)
        return w

    def to_csv(self, path, header_lines: Sequence[str] = ()) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            self.table.to_csv(fh, index=False, float_format="%.6f", lineterminator="\n")


def mark_minima(table: pd.DataFrame) -> pd.DataFrame:
    """Add ``best_rmsfe`` / ``best_mafe`` flags: the block minimum for each
    (proxy, height). Ties mark every tied row."""
    out = table.copy()
    for metric in ("rmsfe", "mafe"):
        grp = out.groupby(["block", "proxy", "height"], sort=False)[metric]
        out[f"best_{metric}"] = out[metric] == grp.transform("min")
    return out


def build_report(rows: Iterable[ScoreRow], diagnostics: pd.DataFrame | None = None) -> ForecastReport:
    recs = []
    for r in rows:
        recs.append({
            "block": r.block or r.model,
            "model": r.model,
            "weight": r.weight,
            "proxy": r.proxy,
            "height": r.height,
            "rmsfe": r.rmsfe,
            "mafe": r.mafe,
            "n_used": r.n_used,
            "n_excluded": r.n_excluded,
        })
    cols = ["block", "model", "weight", "proxy", "height", "rmsfe", "mafe", "n_used", "n_excluded"]
    table = pd.DataFrame(recs, columns=cols)
    if not table.empty:
        table = mark_minima(table)
    else:
        table["best_rmsfe"] = pd.Series(dtype=bool)
        table["best_mafe"] = pd.Series(dtype=bool)
    return ForecastReport(table, diagnostics if diagnostics is not None else pd.DataFrame())
