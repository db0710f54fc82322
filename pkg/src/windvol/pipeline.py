"""
Experiment configuration and stage runner.

Each stage reads upstream artifacts from the output directory, writes CSV /
JSON / SVG artifacts stamped with the tool version and a configuration hash,
and records the SHA-256 of everything it wrote in ``manifest.json``. A stage
whose manifest entry matches the current configuration and whose outputs are
unchanged on disk is skipped.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Callable

import numpy as np
import pandas as pd
import tomli

from . import __version__, diagnostics, evaluate, published, unigarch
from .errors import ConfigInvalid, DataUnavailable, MissingUpstream
from .ingest import Panel, descriptive_stats, load_panel, split, stats_to_csv, write_panel
from .mvlogarch import (
    MvMeanParams,
    MvVolParams,
    fit_mv_logarch,
    fit_mv_mean,
    params_frame,
    system_residuals,
    log_arch_step,
    log_sq_transform,
)
from .preprocess import ResidualPanel, preprocess_panel
from .sdpd import SdpdParams, fit_sdpd, sdpd_residual_diag, sdpd_residuals
from .stgarch import StarmaGarchParams, StFit, fit_st, st_filter, summary_frame
from .weights import WeightMatrix, build_weights, combine_weights

logger = logging.getLogger(__name__)

VARIABLES = ("ws10", "ws100")
MEAN_MODELS = ("ar1", "sdpd")
VOL_MODELS = ("uni_garch", "uni_egarch", "starmagarch", "mv_logarch")
STAGES = ("ingest", "preprocess", "weights", "diagnose", "fit-uni", "fit-sdpd", "fit-st", "fit-mv",
          "forecast", "evaluate", "report")
FIT_STAGES = ("fit-uni", "fit-sdpd", "fit-st", "fit-mv")
AGRIMONIA_URL = "https://zenodo.org/records/7956006"


@dataclass(frozen=True)
class WeightSpec:
    name: str
    kind: str
    params: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"kind": self.kind, **self.params}


@dataclass(frozen=True)
class ExperimentConfig:
    data: dict
    split: str = "2021-01-01"
    variables: tuple = VARIABLES
    weights: tuple = ()
    combine_lambda: float = 0.5
    mean_models: tuple = MEAN_MODELS
    vol_models: tuple = VOL_MODELS
    proxies: tuple = evaluate.PROXY_KINDS
    ewma_lambda: float = evaluate.DEFAULT_LAMBDA
    period: int = 365
    lags: int = 10
    level: float = 0.05
    figures: bool = True
    synthetic: bool = False
    out: Path = Path("windvol-out")
    seed: int = 0
    threads: int = 1

    def hash(self) -> str:
        """Digest of everything that can change results (not ``out`` or ``threads``)."""
        d = asdict(self)
        d.pop("out")
        d.pop("threads")
        d["data"] = {k: _file_digest(Path(v)) if Path(v).exists() else str(v) for k, v in sorted(self.data.items())}
        blob = json.dumps(d, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _file_digest(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


DEFAULT_WEIGHTS = (
    WeightSpec("distance", "distance_band", {"r": 55_000.0}),
    WeightSpec("knn", "knn", {"k": 5}),
    WeightSpec("directional", "directional", {"half_angle": 45.0, "cutoff": 100_000.0, "decay": 50_000.0}),
)


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ConfigInvalid(msg)


def config_from_dict(raw: dict, base_dir: Path | None = None) -> ExperimentConfig:
    base_dir = Path(base_dir or ".")
    known = {"data", "weights", "models", "evaluate", "run"}
    unknown = set(raw) - known
    _require(not unknown, f"unknown config sections: {sorted(unknown)}")
    data = dict(raw.get("data", {}))
    split_date = str(data.pop("split", "2021-01-01"))
    synthetic = bool(data.pop("synthetic", False))
    variables = tuple(data.pop("variables", VARIABLES))
    _require(set(variables) <= set(VARIABLES) and len(variables) > 0, f"variables must be drawn from {VARIABLES}")
    paths = {}
    for v in variables:
        _require(v in data, f"[data] needs a path for {v}")
        p = Path(data[v])
        paths[v] = str(p if p.is_absolute() else (base_dir / p).resolve())
    try:
        pd.Timestamp(split_date)
    except ValueError as exc:
        raise ConfigInvalid(f"bad split date {split_date!r}") from exc

    wsec = raw.get("weights", {})
    specs = []
    for item in wsec.get("specs", []):
        item = dict(item)
        name = item.pop("name", None)
        kind = item.pop("kind", None)
        _require(bool(name) and kind in ("knn", "distance_band", "directional"), f"bad weight spec {item}")
        specs.append(WeightSpec(str(name), str(kind), item))
    if not specs:
        specs = list(DEFAULT_WEIGHTS)
    _require(len({s.name for s in specs}) == len(specs), "weight names must be unique")
    lam_mix = float(wsec.get("combine_lambda", 0.5))
    _require(0.0 <= lam_mix <= 1.0, "combine_lambda must lie in [0, 1]")

    msec = raw.get("models", {})
    mean_models = tuple(msec.get("mean", MEAN_MODELS))
    vol_models = tuple(msec.get("volatility", VOL_MODELS))
    _require(set(mean_models) <= set(MEAN_MODELS), f"mean models must be drawn from {MEAN_MODELS}")
    _require(set(vol_models) <= set(VOL_MODELS), f"volatility models must be drawn from {VOL_MODELS}")
    _require("ar1" in mean_models, "the ar1 mean track is required")

    esec = raw.get("evaluate", {})
    proxies = tuple(esec.get("proxies", evaluate.PROXY_KINDS))
    _require(set(proxies) <= set(evaluate.PROXY_KINDS), f"proxies must be drawn from {evaluate.PROXY_KINDS}")
    lam = float(esec.get("ewma_lambda", evaluate.DEFAULT_LAMBDA))
    _require(0.0 < lam < 1.0, "ewma_lambda must lie in (0, 1)")

    rsec = raw.get("run", {})
    out = Path(rsec["out"]) if "out" in rsec else Path.cwd() / "windvol-out"
    cfg = ExperimentConfig(
        data=paths,
        split=split_date,
        variables=variables,
        weights=tuple(specs),
        combine_lambda=lam_mix,
        mean_models=mean_models,
        vol_models=vol_models,
        proxies=proxies,
        ewma_lambda=lam,
        period=int(rsec.get("period", 365)),
        lags=int(rsec.get("lags", 10)),
        level=float(rsec.get("level", 0.05)),
        figures=bool(rsec.get("figures", True)),
        synthetic=synthetic,
        out=out if out.is_absolute() else (base_dir / out).resolve(),
        seed=int(rsec.get("seed", 0)),
        threads=int(rsec.get("threads", 1)),
    )
    _require(cfg.threads >= 1, "threads must be >= 1")
    _require(cfg.period >= 2 and cfg.lags >= 1, "period and lags must be positive")
    _require(0 < cfg.level < 1, "level must lie in (0, 1)")
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomli.load(fh)
    except FileNotFoundError as exc:
        raise ConfigInvalid(f"config file not found: {path}") from exc
    except tomli.TOMLDecodeError as exc:
        raise ConfigInvalid(f"{path}: {exc}") from exc
    return config_from_dict(raw, path.parent)


def bundled_config_path() -> Path:
    return Path(str(resources.files("windvol") / "data" / "synthetic.toml"))


def with_overrides(cfg: ExperimentConfig, *, seed=None, threads=None, out=None, decay=None) -> ExperimentConfig:
    kw = {}
    if decay is not None:
        _require(float(decay) > 0, "decay must be positive")
        kw["weights"] = tuple(
            WeightSpec(w.name, w.kind, {**w.params, "decay": float(decay)}) if w.kind == "directional" else w
            for w in cfg.weights
        )
    if seed is not None:
        kw["seed"] = int(seed)
    if threads is not None:
        if int(threads) < 1:
            raise ConfigInvalid("threads must be >= 1")
        kw["threads"] = int(threads)
    if out is not None:
        kw["out"] = Path(out).resolve()
    return replace(cfg, **kw)


# --- artifact bookkeeping ---------------------------------------------------


class Context:
    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.out = Path(cfg.out)
        self.hash = cfg.hash()
        self.written: list[Path] = []

    @property
    def header(self) -> list[str]:
        lines = [f"windvol {__version__} config={self.hash}"]
        if self.cfg.synthetic:
            lines.append("SYNTHETIC DATA - not the published dataset")
        return lines

    def path(self, rel: str) -> Path:
        p = self.out / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def need(self, rel: str, stage: str) -> Path:
        p = self.out / rel
        if not p.exists():
            raise MissingUpstream(f"{rel} not found; run the '{stage}' stage first")
        return p

    def _register(self, p: Path) -> Path:
        self.written.append(p)
        return p

    def write_frame(self, rel: str, df: pd.DataFrame, extra: tuple[str, ...] = (), float_format="%.10g") -> Path:
        p = self.path(rel)
        with open(p, "w", encoding="utf-8", newline="") as fh:
            for line in self.header + list(extra):
                fh.write(f"# {line}\n")
            df.to_csv(fh, index=False, float_format=float_format, lineterminator="\n")
        return self._register(p)

    def write_json(self, rel: str, obj: dict) -> Path:
        p = self.path(rel)
        payload = {"_provenance": {"tool": f"windvol {__version__}", "config": self.hash}, **obj}
        with open(p, "w", encoding="utf-8") as fh:
            json.dump(_plain(payload), fh, indent=1, sort_keys=True)
            fh.write("\n")
        return self._register(p)

    def read_json(self, rel: str, stage: str) -> dict:
        with open(self.need(rel, stage), encoding="utf-8") as fh:
            return json.load(fh)

    def write_residuals(self, rel: str, rp: ResidualPanel) -> Path:
        p = self.path(rel)
        rp.to_csv(p, tuple(self.header))
        return self._register(p)

    def write_weights(self, rel: str, W: WeightMatrix) -> Path:
        p = self.path(rel)
        W.to_csv(p, header_lines=self.header, provenance={"tool": f"windvol {__version__}", "config": self.hash})
        self._register(p.with_suffix(".json"))
        return self._register(p)

    def register(self, p: Path) -> Path:
        return self._register(p)


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _num(v) -> float:
    return float("nan") if v is None else float(v)


MANIFEST = "manifest.json"


def _load_manifest(out: Path) -> dict:
    p = out / MANIFEST
    if p.exists():
        with open(p, encoding="utf-8") as fh:
            return json.load(fh)
    return {}


def _save_manifest(out: Path, manifest: dict) -> None:
    out.mkdir(parents=True, exist_ok=True)
    with open(out / MANIFEST, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _is_cached(out: Path, entry: dict | None, cfg_hash: str) -> bool:
    if not entry or entry.get("config") != cfg_hash:
        return False
    for rel, digest in entry.get("outputs", {}).items():
        p = out / rel
        if not p.exists() or _file_digest(p) != digest:
            return False
    return True


# --- shared loaders -----------------------------------------------------------


def _panel(ctx: Context, var: str) -> Panel:
    return load_panel(ctx.need(f"ingest/panel_{var}.csv", "ingest"), var)


def _residuals(ctx: Context, rel: str, stage: str, var: str) -> ResidualPanel:
    return ResidualPanel.from_csv(ctx.need(rel, stage), var)


def _weights(ctx: Context, name: str, var: str) -> WeightMatrix:
    return WeightMatrix.from_csv(ctx.need(f"weights/{name}_{var}.csv", "weights"))


def _n_train(dates: pd.DatetimeIndex, boundary: str) -> int:
    return int(np.sum(dates < pd.Timestamp(boundary)))


def _tracks(cfg: ExperimentConfig) -> list[str]:
    return [m for m in MEAN_MODELS if m in cfg.mean_models]


def _track_residuals(ctx: Context, source: str, weight: str, var: str) -> ResidualPanel:
    if source == "ar1":
        return _residuals(ctx, f"preprocess/residuals_ar1_{var}.csv", "preprocess", var)
    return _residuals(ctx, f"fit/residuals_sdpd_{weight}_{var}.csv", "fit-sdpd", var)


# --- stages ---------------------------------------------------------------------


def stage_ingest(ctx: Context) -> None:
    cfg = ctx.cfg
    rows = []
    for var in cfg.variables:
        src = Path(cfg.data[var])
        if not src.exists():
            raise DataUnavailable(f"input file for {var} not found: {src}")
        panel = load_panel(src, var)
        split(panel, cfg.split)  # validates the boundary early
        p = ctx.path(f"ingest/panel_{var}.csv")
        write_panel(panel, p, ctx.header)
        ctx.register(p)
        rows.append(descriptive_stats(panel))
    p = ctx.path("ingest/stats.csv")
    stats_to_csv(rows, p, ctx.header)
    ctx.register(p)


def stage_preprocess(ctx: Context) -> None:
    cfg = ctx.cfg
    for var in cfg.variables:
        panel = _panel(ctx, var)
        res = preprocess_panel(panel, cfg.period, cfg.threads)
        rem = np.column_stack([d.remainder for d in res.decompositions])
        ctx.write_residuals(f"preprocess/remainder_{var}.csv",
                            ResidualPanel(rem, panel.dates, tuple(panel.station_ids), var, "stl"))
        ctx.write_residuals(f"preprocess/residuals_ar1_{var}.csv", res.residuals)
        ctx.write_frame(f"preprocess/ar1_{var}.csv", pd.DataFrame({"station": panel.station_ids, "phi": res.phi}))


def _build_weights(ctx: Context) -> dict[tuple[str, str], WeightMatrix]:
    cfg = ctx.cfg
    out = {}
    for var in cfg.variables:
        panel = _panel(ctx, var)
        for spec in cfg.weights:
            dirs = panel.directions if spec.kind == "directional" else None
            if spec.kind == "directional" and dirs is None:
                raise ConfigInvalid(f"directional weights need a direction column in the {var} data")
            out[(spec.name, var)] = build_weights(spec.as_dict(), panel.stations, dirs)
    return out


def stage_weights(ctx: Context) -> None:
    cfg = ctx.cfg
    Ws = _build_weights(ctx)
    for (name, var), W in Ws.items():
        ctx.write_weights(f"weights/{name}_{var}.csv", W)
    for spec in cfg.weights:
        per_height = [Ws[(spec.name, v)] for v in cfg.variables]
        if spec.kind == "directional" and len(per_height) == 2:
            W = combine_weights(per_height[0], per_height[1], cfg.combine_lambda)
        else:
            W = per_height[0]
        ctx.write_weights(f"weights/{spec.name}_mv.csv", W)


def stage_diagnose(ctx: Context) -> None:
    cfg = ctx.cfg
    rows, pass_rows, arch_rows = [], [], []
    for var in cfg.variables:
        rp = _residuals(ctx, f"preprocess/residuals_ar1_{var}.csv", "preprocess", var)
        arch_rows.append({"height": var, "arch_lm_rejection_pct": diagnostics.arch_lm_rejection_rate(rp.values, cfg.lags, cfg.level),
                          "mean_excess_kurtosis": float(np.mean([diagnostics.excess_kurtosis(rp.values[:, j]) for j in range(rp.N)]))})
        for spec in cfg.weights:
            W = _weights(ctx, spec.name, var)
            sm = diagnostics.station_moran(rp.values, W)
            for proxy, r in sm.items():
                rows.append({"weight": spec.name, "proxy": proxy, "height": var, "I": r.statistic, "Z": r.z,
                             "p_value": r.p_value, "expected": r.expected, "n_used": r.n_used, "n_dropped": r.n_dropped})
    ctx.write_frame("diagnose/moran_station_means.csv", pd.DataFrame(rows))
    ctx.write_frame("diagnose/ar1_residual_tests.csv", pd.DataFrame(arch_rows))


def _uni_json(fits, ids) -> dict:
    return {
        sid: {"model": f.model, "params": f.params.as_array(), "h0": f.h0, "aic": f.aic, "bic": f.bic}
        for sid, f in zip(ids, fits)
    }


def stage_fit_uni(ctx: Context) -> None:
    cfg = ctx.cfg
    models = [m for m in ("uni_garch", "uni_egarch") if m in cfg.vol_models]
    if not models:
        return
    pref, lb = [], []
    for var in cfg.variables:
        rp = _residuals(ctx, f"preprocess/residuals_ar1_{var}.csv", "preprocess", var)
        n_tr = _n_train(rp.dates, cfg.split)
        train = rp.values[:n_tr]
        fits = {}
        for m in models:
            fl = unigarch.fit_panel(train, m.split("_")[1], cfg.threads)
            fits[m] = fl
            ctx.write_frame(f"fit/{m}_{var}.csv", unigarch.fits_table(rp.station_ids, fl))
            ctx.write_json(f"fit/{m}_{var}.json", {"stations": _uni_json(fl, rp.station_ids)})
            z = np.column_stack([f.std_resid for f in fl])
            for lags in (10, 20):
                lb.append({"height": var, "model": m, "lags": lags,
                           "pass_res": diagnostics.pass_rates(diagnostics.ljung_box_panel(z, lags), cfg.level),
                           "pass_sq": diagnostics.pass_rates(diagnostics.ljung_box_panel(z, lags, squared=True), cfg.level)})
        if len(models) == 2:
            pref.append({"height": var,
                         "egarch_pref_aic": unigarch.model_preference(fits["uni_garch"], fits["uni_egarch"], "aic"),
                         "egarch_pref_bic": unigarch.model_preference(fits["uni_garch"], fits["uni_egarch"], "bic")})
    if pref:
        ctx.write_frame("fit/uni_ic_preference.csv", pd.DataFrame(pref))
    ctx.write_frame("fit/uni_ljung_box.csv", pd.DataFrame(lb))


def stage_fit_sdpd(ctx: Context) -> None:
    cfg = ctx.cfg
    if "sdpd" not in cfg.mean_models:
        return
    diag = []
    for var in cfg.variables:
        rem = _residuals(ctx, f"preprocess/remainder_{var}.csv", "preprocess", var)
        ar = _residuals(ctx, f"preprocess/residuals_ar1_{var}.csv", "preprocess", var)
        n_tr = _n_train(rem.dates, cfg.split)
        for spec in cfg.weights:
            W = _weights(ctx, spec.name, var)
            fit = fit_sdpd(rem.values[:n_tr], W, station_ids=rem.station_ids)
            p = fit.params
            full = sdpd_residuals(p, W, rem.values)
            ctx.write_residuals(f"fit/residuals_sdpd_{spec.name}_{var}.csv",
                                ResidualPanel(full, rem.dates[1:], rem.station_ids, var, "sdpd"))
            ctx.write_json(f"fit/sdpd_{spec.name}_{var}.json", {
                "rho": p.rho, "lambda": p.lam, "gamma": p.gamma, "intercept": p.intercept,
                "sigma2": fit.sigma2, "loglik": fit.loglik, "stations": list(rem.station_ids)})
            n_ar = _n_train(ar.dates, cfg.split)
            for source, vals in (("ar1", ar.values[:n_ar]), ("sdpd", fit.residuals)):
                d = sdpd_residual_diag(vals, W, cfg.lags, cfg.level)
                diag.append({"weight": spec.name, "source": source, "height": var, **d})
    ctx.write_frame("fit/residual_pass_rates.csv", pd.DataFrame(diag))


def _st_json(fit: StFit) -> dict:
    p = fit.params
    return {"params": {k: getattr(p, k) for k in ("mu", "phi", "theta", "omega", "alpha", "beta")},
            "h1": fit.h1, "loglik": fit.loglik, "aic": fit.aic, "bic": fit.bic,
            "std_errors": fit.std_errors, "pvalues": fit.pvalues, "boundary": fit.boundary,
            "converged": fit.converged}


def stage_fit_st(ctx: Context) -> None:
    cfg = ctx.cfg
    if "starmagarch" not in cfg.vol_models:
        return
    fits = {}
    for source in _tracks(cfg):
        for spec in cfg.weights:
            for var in cfg.variables:
                rp = _track_residuals(ctx, source, spec.name, var)
                W = _weights(ctx, spec.name, var)
                n_tr = _n_train(rp.dates, cfg.split)
                f = fit_st(rp.values[:n_tr], W, seed=cfg.seed)
                fits[(spec.name, var, source)] = f
                ctx.write_json(f"fit/st_{source}_{spec.name}_{var}.json", _st_json(f))
    ctx.write_frame("fit/st_params.csv", summary_frame(fits))


def stage_fit_mv(ctx: Context) -> None:
    cfg = ctx.cfg
    if "mv_logarch" not in cfg.vol_models or len(cfg.variables) != 2:
        return
    rems = [_residuals(ctx, f"preprocess/remainder_{v}.csv", "preprocess", v) for v in cfg.variables]
    Y = np.stack([r.values for r in rems], axis=2)
    n_tr = _n_train(rems[0].dates, cfg.split)
    fits = {}
    for spec in cfg.weights:
        W = WeightMatrix.from_csv(ctx.need(f"weights/{spec.name}_mv.csv", "weights"))
        mf = fit_mv_mean(Y[:n_tr], W)
        vf = fit_mv_logarch(mf.eps, W)
        fits[spec.name] = (mf, vf)
        ctx.write_json(f"fit/mv_{spec.name}.json", {
            "mean": {"beta_mu": mf.params.beta_mu, "Psi_mu": mf.params.Psi_mu, "Pi_mu": mf.params.Pi_mu},
            "vol": {"A": vf.params.A, "Psi_sigma": vf.params.Psi_sigma, "Pi_sigma": vf.params.Pi_sigma},
            "floor": vf.floor, "n_floored": vf.n_floored, "contemporaneous": vf.system.contemporaneous,
            "spectral_radius_mean": mf.system.spectral_radius, "spectral_radius_vol": vf.system.spectral_radius})
    ctx.write_frame("fit/mv_params.csv", params_frame(fits))


def stage_fit(ctx: Context) -> None:
    for s in FIT_STAGES:
        STAGE_FUNCS[s](ctx)


def _forecast_frame(dates, ids, h, eps, height=None) -> pd.DataFrame:
    T, N = h.shape
    d = {"date": np.repeat(pd.DatetimeIndex(dates).strftime("%Y-%m-%d").to_numpy(), N),
         "station": np.tile(np.asarray(ids, dtype=object), T)}
    if height is not None:
        d["height"] = height
    d["h_hat"] = h.ravel()
    d["eps"] = eps.ravel()
    return pd.DataFrame(d)


def _model_runs(cfg: ExperimentConfig) -> list[tuple[str, str, str]]:
    """(model id, weight, height) triples with a forecast artifact."""
    runs = []
    for m in ("uni_garch", "uni_egarch"):
        if m in cfg.vol_models:
            runs += [(m, "-", v) for v in cfg.variables]
    if "starmagarch" in cfg.vol_models:
        for src in _tracks(cfg):
            runs += [(f"st_{src}", s.name, v) for s in cfg.weights for v in cfg.variables]
    if "mv_logarch" in cfg.vol_models and len(cfg.variables) == 2:
        runs += [("mv_logarch", s.name, v) for s in cfg.weights for v in cfg.variables]
    return runs


def _forecast_rel(model: str, weight: str, var: str) -> str:
    return f"forecast/{model}_{var}.csv" if weight == "-" else f"forecast/{model}_{weight}_{var}.csv"


def stage_forecast(ctx: Context) -> None:
    cfg = ctx.cfg
    for m in ("uni_garch", "uni_egarch"):
        if m not in cfg.vol_models:
            continue
        for var in cfg.variables:
            rp = _residuals(ctx, f"preprocess/residuals_ar1_{var}.csv", "preprocess", var)
            n_tr = _n_train(rp.dates, cfg.split)
            st = ctx.read_json(f"fit/{m}_{var}.json", "fit-uni")["stations"]
            H = np.empty((rp.T - n_tr, rp.N))
            for j, sid in enumerate(rp.station_ids):
                rec = st[sid]
                par = _uni_params(rec)
                filt = unigarch.garch_filter if rec["model"] == "garch" else unigarch.egarch_filter
                H[:, j] = filt(par, rp.values[:, j], rec["h0"])[n_tr:]
            ctx.write_frame(_forecast_rel(m, "-", var),
                            _forecast_frame(rp.dates[n_tr:], rp.station_ids, H, rp.values[n_tr:]), float_format="%.12g")

    if "starmagarch" in cfg.vol_models:
        for src in _tracks(cfg):
            for spec in cfg.weights:
                for var in cfg.variables:
                    rp = _track_residuals(ctx, src, spec.name, var)
                    W = _weights(ctx, spec.name, var)
                    rec = ctx.read_json(f"fit/st_{src}_{spec.name}_{var}.json", "fit-st")
                    par = StarmaGarchParams(**{k: (np.asarray(v) if isinstance(v, list) else v)
                                               for k, v in rec["params"].items()})
                    n_tr = _n_train(rp.dates, cfg.split)
                    eps, h = st_filter(par, W, rp.values, np.asarray(rec["h1"]))
                    ctx.write_frame(_forecast_rel(f"st_{src}", spec.name, var),
                                    _forecast_frame(rp.dates[n_tr:], rp.station_ids, h[n_tr:], eps[n_tr:]),
                                    float_format="%.12g")

    if "mv_logarch" in cfg.vol_models and len(cfg.variables) == 2:
        rems = [_residuals(ctx, f"preprocess/remainder_{v}.csv", "preprocess", v) for v in cfg.variables]
        Y = np.stack([r.values for r in rems], axis=2)
        n_tr = _n_train(rems[0].dates, cfg.split)
        for spec in cfg.weights:
            W = WeightMatrix.from_csv(ctx.need(f"weights/{spec.name}_mv.csv", "weights"))
            rec = ctx.read_json(f"fit/mv_{spec.name}.json", "fit-mv")
            mean = MvMeanParams(*(np.asarray(rec["mean"][k]) for k in ("beta_mu", "Psi_mu", "Pi_mu")))
            vol = MvVolParams(*(np.asarray(rec["vol"][k]) for k in ("A", "Psi_sigma", "Pi_sigma")))
            w = W.dense()
            eps = system_residuals(mean.beta_mu, mean.Psi_mu, mean.Pi_mu, w, Y)
            L = log_sq_transform(eps, rec["floor"]).values
            H = np.stack([log_arch_step(vol, w, L[t - 2], rec["contemporaneous"]) for t in range(n_tr, Y.shape[0])])
            for k, var in enumerate(cfg.variables):
                ctx.write_frame(_forecast_rel("mv_logarch", spec.name, var),
                                _forecast_frame(rems[0].dates[n_tr:], rems[0].station_ids, H[:, :, k],
                                                eps[n_tr - 1:, :, k]), float_format="%.12g")


def _uni_params(rec):
    p = rec["params"]
    return unigarch.GarchParams(*p) if rec["model"] == "garch" else unigarch.EgarchParams(*p)


def _read_forecast(ctx: Context, rel: str) -> tuple[pd.DatetimeIndex, list, np.ndarray, np.ndarray]:
    df = pd.read_csv(ctx.need(rel, "forecast"), comment="#", dtype={"station": str}, float_precision="round_trip")
    h = df.pivot(index="date", columns="station", values="h_hat").sort_index()
    e = df.pivot(index="date", columns="station", values="eps").sort_index()
    return pd.DatetimeIndex(pd.to_datetime(h.index)), list(h.columns), h.to_numpy(), e.to_numpy()


def _block(model: str) -> str:
    return {"st_ar1": "STARMAGARCH (AR(1) residuals)", "st_sdpd": "STARMAGARCH (SDPD residuals)",
            "mv_logarch": "Multivariate log-ARCH"}.get(model, "Univariate GARCH benchmarks")


def stage_evaluate(ctx: Context) -> None:
    cfg = ctx.cfg
    rows = []
    for model, weight, var in _model_runs(cfg):
        _, _, h, eps = _read_forecast(ctx, _forecast_rel(model, weight, var))
        for kind in cfg.proxies:
            proxy = evaluate.make_proxy(kind, eps, cfg.ewma_lambda)
            s = evaluate.score(h, proxy)
            rows.append(evaluate.ScoreRow(model, weight, kind, var, s.rmsfe, s.mafe, s.n_used, s.n_excluded,
                                          _block(model)))
    rep = evaluate.build_report(rows)
    ctx.write_frame("evaluate/scores.csv", rep.table)


def stage_report(ctx: Context) -> None:
    cfg = ctx.cfg
    scores_p = ctx.need("evaluate/scores.csv", "evaluate")
    upstream = [scores_p, ctx.need("ingest/stats.csv", "ingest")]
    for rel in ("diagnose/moran_station_means.csv", "fit/st_params.csv", "fit/mv_params.csv",
                "fit/residual_pass_rates.csv", "fit/uni_ic_preference.csv"):
        if (ctx.out / rel).exists():
            upstream.append(ctx.out / rel)
    prov = tuple(f"upstream {p.relative_to(ctx.out).as_posix()} sha256={_file_digest(p)}" for p in upstream)
    scores = pd.read_csv(scores_p, comment="#")
    rep = evaluate.ForecastReport(scores)
    wide = rep.wide().reset_index()
    wide.columns = ["_".join(str(c) for c in col if str(c)) if isinstance(col, tuple) else str(col)
                    for col in wide.columns]
    ctx.write_frame("report/forecast_table.csv", wide, prov, float_format="%.4f")
    best = scores[scores["best_rmsfe"]][["block", "proxy", "height", "model", "weight", "rmsfe"]]
    ctx.write_frame("report/block_minima.csv", best, prov, float_format="%.4f")
    if cfg.figures:
        from . import plotting

        for p in plotting.write_figures(ctx):
            ctx.register(p)


STAGE_FUNCS: dict[str, Callable[[Context], None]] = {
    "ingest": stage_ingest,
    "preprocess": stage_preprocess,
    "weights": stage_weights,
    "diagnose": stage_diagnose,
    "fit-uni": stage_fit_uni,
    "fit-sdpd": stage_fit_sdpd,
    "fit-st": stage_fit_st,
    "fit-mv": stage_fit_mv,
    "fit": stage_fit,
    "forecast": stage_forecast,
    "evaluate": stage_evaluate,
    "report": stage_report,
}


def run_stage(stage: str, cfg: ExperimentConfig, force: bool = False) -> list[Path]:
    """Run one stage (or reuse its cached outputs) and return the artifact paths."""
    if stage not in STAGE_FUNCS:
        raise ConfigInvalid(f"unknown stage {stage!r}")
    if stage == "fit":
        out = []
        for s in FIT_STAGES:
            out += run_stage(s, cfg, force)
        return out
    ctx = Context(cfg)
    manifest = _load_manifest(ctx.out)
    if not force and _is_cached(ctx.out, manifest.get(stage), ctx.hash):
        logger.info("stage %s: cached", stage)
        return [ctx.out / rel for rel in manifest[stage]["outputs"]]
    STAGE_FUNCS[stage](ctx)
    outputs = {p.relative_to(ctx.out).as_posix(): _file_digest(p) for p in sorted(set(ctx.written))}
    manifest = _load_manifest(ctx.out)
    manifest[stage] = {"config": ctx.hash, "version": __version__, "outputs": outputs}
    _save_manifest(ctx.out, manifest)
    return [ctx.out / rel for rel in outputs]


def run_all(cfg: ExperimentConfig, force: bool = False) -> list[Path]:
    out = []
    for s in STAGES:
        out += run_stage(s, cfg, force)
    return out


# --- reproduction ---------------------------------------------------------------


def agrimonia_config(data_dir, out, seed: int = 0, threads: int = 1) -> ExperimentConfig:
    """Published design on converted Agrimonia files (``ws10.csv``, ``ws100.csv``)."""
    data_dir = Path(data_dir)
    missing = [v for v in VARIABLES if not (data_dir / f"{v}.csv").exists()]
    if missing:
        raise DataUnavailable(
            f"Agrimonia files {missing} not found in {data_dir}. Download the dataset from {AGRIMONIA_URL}, "
            f"then run 'windvol convert <raw.csv> --out {data_dir}' to produce ws10.csv and ws100.csv."
        )
    raw = {"data": {v: str((data_dir / f"{v}.csv").resolve()) for v in VARIABLES} | {"split": "2021-01-01"},
           "run": {"out": str(Path(out).resolve()), "seed": seed, "threads": threads}}
    return config_from_dict(raw)


def _compare_rows(ours: dict, ref: dict) -> pd.DataFrame:
    rows = []
    for key, pv in ref.items():
        ov = ours.get(key, float("nan"))
        rows.append({"key": "|".join(map(str, key)) if isinstance(key, tuple) else str(key),
                     "published": pv, "ours": ov, "abs_diff": abs(ov - pv) if np.isfinite(ov) else float("nan")})
    return pd.DataFrame(rows)


def write_comparisons(cfg: ExperimentConfig) -> list[Path]:
    """Side-by-side tables of our estimates and the published values, with |diff|."""
    ctx = Context(cfg)
    out = ctx.out
    stats = pd.read_csv(out / "ingest/stats.csv", comment="#")
    ours = {}
    for _, r in stats.iterrows():
        for col in ("Median", "Mean", "IQR", "SD", "min", "max"):
            ours[(r["Height"], col)] = float(r[col])
    ref = {(h, c): v for h, d in published.DESCRIPTIVE.items() for c, v in d.items() if c not in ("T", "N")}
    ctx.write_frame("report/compare_descriptive.csv", _compare_rows(ours, ref))

    mor = pd.read_csv(out / "diagnose/moran_station_means.csv", comment="#")
    ours = {(r["weight"], r["proxy"], r["height"]): float(r["I"]) for _, r in mor.iterrows()}
    ctx.write_frame("report/compare_moran.csv", _compare_rows(ours, {k: v[0] for k, v in published.MORAN.items()}))

    if (out / "fit/st_params.csv").exists():
        st = pd.read_csv(out / "fit/st_params.csv", comment="#")
        ours = {(r["weight"], r["source"], r["height"], r["param"]): float(r["estimate"]) for _, r in st.iterrows()}
        ref = {(w, s, h, p): v for (w, s, h), d in published.STARMAGARCH.items() for p, v in d.items()}
        ctx.write_frame("report/compare_starmagarch.csv", _compare_rows(ours, ref))

    if (out / "fit/mv_params.csv").exists():
        mv = pd.read_csv(out / "fit/mv_params.csv", comment="#")
        ours = {(r["weight"], r["param"]): float(r["estimate"]) for _, r in mv.iterrows()}
        ref = {(w, p): v[0] for w, d in published.MULTIVARIATE.items() for p, v in d.items()}
        ctx.write_frame("report/compare_multivariate.csv", _compare_rows(ours, ref))

    sc = pd.read_csv(out / "evaluate/scores.csv", comment="#")
    ours = {}
    for _, r in sc.iterrows():
        ours[(r["model"], r["weight"], r["proxy"], r["height"], "rmsfe")] = float(r["rmsfe"])
        ours[(r["model"], r["weight"], r["proxy"], r["height"], "mafe")] = float(r["mafe"])
    ref = {}
    for k, (a, b) in published.FORECAST.items():
        ref[k + ("rmsfe",)] = a
        ref[k + ("mafe",)] = b
    ctx.write_frame("report/compare_forecast.csv", _compare_rows(ours, ref))
    return ctx.written


def reproduce(cfg: ExperimentConfig, force: bool = False) -> list[Path]:
    paths = run_all(cfg, force)
    return paths + write_comparisons(cfg)
