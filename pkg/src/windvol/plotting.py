"""Static SVG figures: per-station forecast-vs-proxy curves and network maps."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from . import evaluate  # noqa: E402
from .ingest import load_panel  # noqa: E402
from .weights import WeightMatrix  # noqa: E402

# fixed salt and no timestamp keep SVG output byte-stable between runs
matplotlib.rcParams["svg.hashsalt"] = "windvol"
matplotlib.rcParams["svg.fonttype"] = "none"


def _save(fig, path: Path, description: str) -> Path:
    fig.savefig(path, format="svg", metadata={"Date": None, "Description": description})
    plt.close(fig)
    return path


def forecast_figure(dates, curves: dict[str, np.ndarray], proxies: dict[str, np.ndarray], title: str, path: Path,
                    description: str = "") -> Path:
    fig, ax = plt.subplots(figsize=(8, 3.5))
    for label, p in proxies.items():
        ax.plot(dates, p, lw=0.6, color="0.7" if label == "RV" else "0.35", label=label)
    for label, h in curves.items():
        ax.plot(dates, h, lw=1.0, label=label)
    ax.set_yscale("log")
    ax.set_ylabel("variance")
    ax.set_title(title)
    ax.legend(fontsize=6, ncol=3, loc="upper left")
    fig.tight_layout()
    return _save(fig, path, description)


def network_figure(W: WeightMatrix, stations, title: str, path: Path, description: str = "") -> Path:
    edges = W.edge_list(stations)
    fig, ax = plt.subplots(figsize=(5, 4.5))
    for r in edges.itertuples():
        ax.plot([r.lon_from, r.lon_to], [r.lat_from, r.lat_to], color="tab:blue",
                lw=0.3 + 2.0 * r.weight, alpha=0.6)
    ax.scatter([s.lon for s in stations], [s.lat for s in stations], s=12, color="k", zorder=3)
    iso = set(W.isolated)
    if iso:
        ax.scatter([stations[i].lon for i in iso], [stations[i].lat for i in iso], s=30, facecolors="none",
                   edgecolors="tab:red", zorder=4, label="no neighbours")
        ax.legend(fontsize=7)
    ax.set_xlabel("longitude")
    ax.set_ylabel("latitude")
    ax.set_title(title)
    fig.tight_layout()
    return _save(fig, path, description)


def write_figures(ctx) -> list[Path]:
    """Render figures for a finished pipeline run into ``<out>/figures``."""
    from .pipeline import _forecast_rel, _model_runs, _read_forecast

    cfg = ctx.cfg
    fig_dir = ctx.out / "figures"
    fig_dir.mkdir(parents=True, exist_ok=True)
    desc = " ".join(ctx.header)
    written = []

    first = cfg.variables[0]
    panel = load_panel(ctx.out / f"ingest/panel_{first}.csv", first)
    for spec in cfg.weights:
        W = WeightMatrix.from_csv(ctx.out / f"weights/{spec.name}_{first}.csv")
        written.append(network_figure(W, panel.stations, f"{spec.name} ({first})",
                                      fig_dir / f"network_{spec.name}_{first}.svg", desc))

    runs = _model_runs(cfg)
    for var in cfg.variables:
        curves: dict[str, np.ndarray] = {}
        dates = ids = base_eps = None
        for model, weight, v in runs:
            if v != var:
                continue
            d, ids_, h, eps = _read_forecast(ctx, _forecast_rel(model, weight, var))
            label = model if weight == "-" else f"{model}/{weight}"
            curves[label] = h
            if dates is None:
                dates, ids = d, ids_
            if model == "uni_garch" or base_eps is None:
                base_eps = eps
        if dates is None:
            continue
        rv = evaluate.rv(base_eps).values
        ew = evaluate.ewma(base_eps, cfg.ewma_lambda).values
        for j, sid in enumerate(ids):
            written.append(forecast_figure(
                dates, {k: c[:, j] for k, c in curves.items()},
                {"RV": np.maximum(rv[:, j], 1e-12), "EWMA": ew[:, j]},
                f"station {sid}, {var}: one-step variance forecasts",
                fig_dir / f"forecast_{var}_{sid}.svg", desc))
    return written
