"""Acceptance criteria, one test per criterion; each records a PASS/FAIL line."""

import os
import time
import warnings
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from conftest import tree_digest
from test_diagnostics import brute_moran
from test_sdpd import loop_loglik as sdpd_loop
from test_stgarch import loop_loglik as st_loop
from test_unigarch import naive_egarch_loglik, naive_garch_loglik
from windvol import pipeline, published
from windvol.cli import main
from windvol.diagnostics import morans_i
from windvol.evaluate import ScoreRow, ewma, score
from windvol.mvlogarch import MvVolParams, fit_mv_logarch, simulate_mv_logarch
from windvol.preprocess import fit_ar1
from windvol.sdpd import SdpdParams, fit_sdpd, sdpd_loglik, sdpd_residual_diag, simulate_sdpd
from windvol.stgarch import StarmaGarchParams, fit_st, st_loglik, st_simulate
from windvol.synthetic import random_network
from windvol.unigarch import (
    EgarchParams,
    GarchParams,
    egarch_loglik,
    fit_egarch,
    fit_garch,
    garch_loglik,
    simulate_egarch,
    simulate_garch,
)
from windvol.weights import DirectionalParams, angular_difference, bearings, directional_weights, distance_band_weights, knn_weights, pairwise_distances


def _report(record, label, ok, detail):
    print(f"{'PASS' if ok else 'FAIL'} {label}: {detail}")
    record(label, ok, detail)


def test_criterion_1_oracle_equivalence(record_criterion):
    rng = np.random.default_rng(2024)
    # warm the compiled kernels so the timing covers evaluation only
    garch_loglik(GarchParams(0.1, 0.1, 0.8), np.ones(3), 1.0)
    egarch_loglik(EgarchParams(0.0, 0.1, 0.0, 0.5), np.ones(3), 1.0)
    st_loglik(StarmaGarchParams(0.0, 0.1, 0.1, 0.1, 0.1, 0.1), np.zeros((2, 2)), np.arange(6.0).reshape(3, 2))
    worst = {}
    start = time.perf_counter()
    for _ in range(5):
        T = int(rng.integers(50, 201))
        e = rng.normal(size=T)
        a, b = rng.uniform(0, 0.3), rng.uniform(0, 0.6)
        d = abs(garch_loglik(GarchParams(0.1, a, b), e, 1.0) - naive_garch_loglik(0.1, a, b, e, 1.0))
        worst["garch"] = max(worst.get("garch", 0), d)
        g, bb = rng.uniform(-0.2, 0.2), rng.uniform(0, 0.95)
        d = abs(egarch_loglik(EgarchParams(-0.1, 0.15, g, bb), e, 1.0) - naive_egarch_loglik(-0.1, 0.15, g, bb, e, 1.0))
        worst["egarch"] = max(worst.get("egarch", 0), d)

        N = int(rng.integers(2, 6))
        W = knn_weights(random_network(N, int(rng.integers(1e6))), 1).dense()
        Y = rng.normal(size=(50, N))
        p = StarmaGarchParams(0.05, rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8), 0.2, 0.2, 0.5)
        d = abs(st_loglik(p, W, Y) - st_loop(p, W.tolist(), Y.tolist()))
        worst["st"] = max(worst.get("st", 0), d)

        N = int(rng.integers(5, 51))
        W = knn_weights(random_network(N, int(rng.integers(1e6))), 3).dense()
        Y = rng.normal(size=(50, N))
        gam, c = rng.uniform(-0.5, 0.5, N), rng.normal(size=N)
        rho, lam = rng.uniform(-0.8, 0.8), rng.uniform(-0.3, 0.3)
        d = abs(sdpd_loglik(SdpdParams(rho, gam, lam, c), W, Y, 1.1) - sdpd_loop(rho, gam, lam, c, W.tolist(), Y.tolist(), 1.1))
        worst["sdpd"] = max(worst.get("sdpd", 0), d)

        x = rng.normal(size=N)
        d = abs(morans_i(x, W).statistic - brute_moran(x, W.tolist()))
        worst["moran"] = max(worst.get("moran", 0), d)
    elapsed = time.perf_counter() - start
    ok = max(worst.values()) <= 1e-9 and elapsed < 1.0
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + f"; {elapsed:.2f} s"
    _report(record_criterion, "1 oracle equivalence", ok, detail)
    assert ok, detail


CHECKED = ("phi", "theta", "omega", "alpha", "beta")


def test_criterion_2_starmagarch_recovery(record_criterion):
    truth = StarmaGarchParams(-0.0061, -0.5969, 0.6601, 0.0962, 0.2040, 0.5018)
    W = distance_band_weights(random_network(30, seed=0), 55_000.0)
    start = time.perf_counter()
    passed, worst_names = 0, {}
    for seed in range(10):
        e = st_simulate(truth, W, 2000, 30, seed=seed)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            fit = fit_st(e, W)
        est = fit.params.as_dict()
        err = {k: abs(float(est[k]) - getattr(truth, k)) for k in CHECKED}
        if max(err.values()) <= 0.05:
            passed += 1
        for k, v in err.items():
            if v > 0.05:
                worst_names[k] = worst_names.get(k, 0) + 1
    elapsed = time.perf_counter() - start
    ok = passed >= 9 and elapsed < 300
    detail = f"{passed}/10 seeds within 0.05 (misses by parameter: {worst_names or 'none'}); {elapsed:.0f} s"
    _report(record_criterion, "2 STARMAGARCH recovery", ok, detail)
    assert ok, detail


def test_criterion_3_univariate_recovery(record_criterion):
    g_truth = GarchParams(0.1, 0.1, 0.8)
    e_truth = EgarchParams(-0.1, 0.15, -0.05, 0.9)
    start = time.perf_counter()
    worst = 0.0
    for seed in range(20):
        fg = fit_garch(simulate_garch(g_truth, 5000, seed=seed))
        fe = fit_egarch(simulate_egarch(e_truth, 5000, seed=seed))
        worst = max(worst, np.abs(fg.params.as_array() - g_truth.as_array()).max(),
                    np.abs(fe.params.as_array() - e_truth.as_array()).max())
    elapsed = time.perf_counter() - start
    ok = worst <= 0.05 and elapsed < 60
    detail = f"worst abs error {worst:.3f} over 20 seeds x 2 models; {elapsed:.1f} s"
    _report(record_criterion, "3 univariate recovery", ok, detail)
    assert ok, detail


def test_criterion_4_multivariate_recovery(record_criterion):
    truth = MvVolParams(np.array([-0.835, -0.372]), np.array([[0.558, 0.163], [0.135, 0.577]]),
                        np.array([[0.067, 0.054], [0.022, 0.113]]))
    W = distance_band_weights(random_network(20, seed=0), 55_000.0)
    start = time.perf_counter()
    errors = []
    for seed in range(10):
        fit = fit_mv_logarch(simulate_mv_logarch(truth, W, 1500, seed=seed), W)
        errors.append(np.concatenate([fit.params.A - truth.A, (fit.params.Psi_sigma - truth.Psi_sigma).ravel(),
                                      (fit.params.Pi_sigma - truth.Pi_sigma).ravel()]))
    errors = np.array(errors)
    per_seed = np.abs(errors).max(axis=1)
    passed = int((per_seed <= 0.08).sum())
    bias = np.abs(errors.mean(axis=0)).max()
    elapsed = time.perf_counter() - start
    ok = passed >= 9 and bias <= 0.08 and elapsed < 300
    detail = (f"{passed}/10 seeds with all 10 entries within 0.08 (worst per seed {per_seed.min():.3f}-{per_seed.max():.3f}); "
              f"max |mean error| {bias:.3f}; {elapsed:.1f} s")
    _report(record_criterion, "4 multivariate recovery", ok, detail)
    assert ok, detail


def test_criterion_5_sdpd_vs_ar1_moran(record_criterion):
    start = time.perf_counter()
    W = knn_weights(random_network(30, seed=0), 5)
    y = simulate_sdpd(SdpdParams(0.5, np.full(30, 0.3), 0.2), W, 2000, seed=0)
    ar_resid = np.column_stack([fit_ar1(y[:, j]).residuals for j in range(30)])
    sd_resid = fit_sdpd(y, W).residuals
    ar_rate = sdpd_residual_diag(ar_resid, W)["moran_res"]
    sd_rate = sdpd_residual_diag(sd_resid, W)["moran_res"]
    elapsed = time.perf_counter() - start
    ok = sd_rate - ar_rate >= 20 and elapsed < 120
    detail = f"Moran pass rate SDPD {sd_rate:.1f}% vs AR(1) {ar_rate:.1f}% (gap {sd_rate - ar_rate:.1f} pts); {elapsed:.1f} s"
    _report(record_criterion, "5 SDPD vs AR(1) residuals", ok, detail)
    assert ok, detail


def test_criterion_6_metric_identities(record_criterion, synthetic_run):
    scores = pd.read_csv(synthetic_run / "evaluate/scores.csv", comment="#")
    rows_ok = bool((scores["rmsfe"] >= scores["mafe"]).all())
    rng = np.random.default_rng(6)
    for _ in range(200):
        h, p = rng.lognormal(size=(20, 4)), rng.lognormal(size=(20, 4))
        s = score(h, p)
        ScoreRow("m", "-", "rv", "ws10", s.rmsfe, s.mafe)
        rows_ok &= s.rmsfe >= s.mafe
    p = rng.lognormal(size=(30, 5))
    identity = score(p, p)
    identity_ok = (identity.rmsfe, identity.mafe) == (0.0, 0.0)
    fixed = np.max(np.abs(ewma(np.full((40, 3), 0.8), 0.94).values - 0.64))
    hand = np.max(np.abs(ewma(np.array([1.0, 0.0, 0.0]), 0.5).values.ravel() - [1.0, 0.5, 0.25]))
    ok = rows_ok and identity_ok and fixed <= 1e-12 and hand <= 1e-12
    detail = (f"{len(scores)} pipeline rows + 200 random rows RMSFE>=MAFE: {rows_ok}; score(h,h)=(0,0): {identity_ok}; "
              f"EWMA fixed point {fixed:.1e}, hand recursion {hand:.1e}")
    _report(record_criterion, "6 metric identities", ok, detail)
    assert ok, detail


def test_criterion_7_weight_invariants(record_criterion):
    rng = np.random.default_rng(7)
    start = time.perf_counter()
    problems = []
    for net in range(200):
        n = int(rng.integers(6, 60))
        stations = random_network(n, seed=net)
        k = int(rng.integers(1, min(8, n)))
        dirs = rng.uniform(0, 360, n)
        half, cutoff = rng.uniform(10, 120), rng.uniform(10_000, 150_000)
        mats = {
            "knn": knn_weights(stations, k),
            "band": distance_band_weights(stations, rng.uniform(5_000, 120_000)),
            "dir": directional_weights(stations, DirectionalParams(dirs, half, cutoff, 50_000.0)),
        }
        for name, W in mats.items():
            s = W.row_sums
            if not np.all(np.isclose(s, 1.0, atol=1e-12) | (s == 0.0)):
                problems.append((net, name, "row sum"))
        if not (np.diff(mats["knn"].matrix.indptr) == k).all():
            problems.append((net, "knn", "cardinality"))
        d = pairwise_distances(stations)
        outside = (angular_difference(bearings(stations), dirs[:, None]) > half) | (d > cutoff)
        if np.any(mats["dir"].dense()[outside] != 0.0):
            problems.append((net, "dir", "outside cone"))
    elapsed = time.perf_counter() - start
    ok = not problems and elapsed < 10
    detail = f"200 networks, {len(problems)} violations; {elapsed:.1f} s"
    _report(record_criterion, "7 weight invariants", ok, detail)
    assert ok, detail


AGRIMONIA_DIR = os.environ.get("WINDVOL_AGRIMONIA_DIR")


def test_criterion_8_agrimonia(record_criterion, tmp_path):
    if not AGRIMONIA_DIR or not all((Path(AGRIMONIA_DIR) / f"{v}.csv").exists() for v in ("ws10", "ws100")):
        reason = ("Agrimonia data not available: set WINDVOL_AGRIMONIA_DIR to a folder with ws10.csv and ws100.csv "
                  "(produced by 'windvol convert' from the public Zenodo download)")
        record_criterion("8 Agrimonia reproduction", None, reason)
        pytest.skip(reason)
    cfg = pipeline.agrimonia_config(AGRIMONIA_DIR, tmp_path / "agrimonia")
    pipeline.reproduce(cfg)
    out = Path(cfg.out)
    failures = []
    stats = pd.read_csv(out / "ingest/stats.csv", comment="#").set_index("Height")
    for h, ref in published.DESCRIPTIVE.items():
        for col, v in ref.items():
            if abs(float(stats.loc[h, col]) - v) > 0.001:
                failures.append(f"Table-1 {h}/{col}")
    mor = pd.read_csv(out / "diagnose/moran_station_means.csv", comment="#")
    I = {(r.weight, r.proxy, r.height): r.I for r in mor.itertuples()}
    for key, (ref_i, _) in published.MORAN.items():
        if abs(I[key] - ref_i) > 0.02:
            failures.append(f"Moran {key}")
    for w in ("distance", "knn", "directional"):
        for h in ("ws10", "ws100"):
            if not I[(w, "mean_sq", h)] > I[(w, "mean", h)]:
                failures.append(f"Moran ordering {w}/{h}")
    mv = pd.read_csv(out / "fit/mv_params.csv", comment="#")
    est = {(r.weight, r.param): r.estimate for r in mv.itertuples()}
    for w in ("distance", "knn"):
        if not est[(w, "Psi_mu_21")] > est[(w, "Psi_mu_12")]:
            failures.append(f"cross-height sign {w}")
    for w in ("distance", "knn", "directional"):
        if not all(est[(w, f"Psi_sigma_{ij}")] > 0 for ij in ("11", "12", "21", "22")):
            failures.append(f"Psi_sigma positivity {w}")
    st = pd.read_csv(out / "fit/st_params.csv", comment="#")
    beta_dir = st[(st.weight == "directional") & (st.param == "beta")]
    if not (beta_dir["estimate"] < 5e-5).all():
        failures.append("directional beta boundary")
    assert (out / "report/compare_forecast.csv").exists()
    ok = not failures
    _report(record_criterion, "8 Agrimonia reproduction", ok, "all checks hold" if ok else "; ".join(failures))
    assert ok, failures


def test_criterion_9_determinism(record_criterion, synthetic_run, tmp_path):
    start = time.perf_counter()
    reference = tree_digest(synthetic_run)
    assert main(["reproduce", "--out", str(tmp_path / "again"), "--threads", "1"]) == 0
    assert main(["reproduce", "--out", str(tmp_path / "threads"), "--threads", "3"]) == 0
    again, threaded = tree_digest(tmp_path / "again"), tree_digest(tmp_path / "threads")
    diff = sorted(k for k in set(reference) | set(again) | set(threaded)
                  if not reference.get(k) == again.get(k) == threaded.get(k))
    elapsed = time.perf_counter() - start
    ok = not diff and len(reference) > 50
    detail = f"{len(reference)} artifacts byte-identical across 3 runs (threads 1, 1, 3): {not diff}; {elapsed:.0f} s"
    _report(record_criterion, "9 determinism", ok, detail if ok else f"differing: {diff[:5]}")
    assert ok, diff
