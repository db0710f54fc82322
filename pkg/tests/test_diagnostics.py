import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from statsmodels.stats.diagnostic import acorr_ljungbox, het_arch

from windvol.diagnostics import (
    MoranResult,
    TestResult,
    arch_lm,
    excess_kurtosis,
    ljung_box,
    moran_panel,
    morans_i,
    pass_rates,
    residual_diagnostics,
    station_moran,
)
from windvol.errors import ConstantSeries, EmptyList, SingularRegression, TooFewObservations
from windvol.synthetic import random_network
from windvol.unigarch import GarchParams, simulate_garch
from windvol.weights import distance_band_weights, knn_weights


def brute_moran(x, w):
    n = len(x)
    xbar = sum(x) / n
    num = den = s0 = 0.0
    for i in range(n):
        den += (x[i] - xbar) ** 2
        for j in range(n):
            num += w[i][j] * (x[i] - xbar) * (x[j] - xbar)
            s0 += w[i][j]
    return n / s0 * num / den


def two_block_network():
    w = np.zeros((10, 10))
    for block in (range(5), range(5, 10)):
        for i in block:
            for j in block:
                if i != j:
                    w[i, j] = 0.25
    return w


def test_ljung_box_matches_reference(rng):
    x = rng.normal(size=300)
    ref = acorr_ljungbox(x, lags=[10], return_df=True)
    r = ljung_box(x, 10)
    assert r.statistic == pytest.approx(ref["lb_stat"].iloc[0], rel=1e-12)
    assert r.p_value == pytest.approx(ref["lb_pvalue"].iloc[0], rel=1e-9)


def test_ljung_box_null_size():
    rng = np.random.default_rng(2024)
    p = np.array([ljung_box(rng.normal(size=2000), 10).p_value for _ in range(500)])
    # binomial(500, 0.05) has sd ~ 1 percentage point
    assert 0.02 < np.mean(p < 0.05) < 0.08


def test_ljung_box_detects_ar():
    rng = np.random.default_rng(5)
    x = np.zeros(2000)
    for t in range(1, x.size):
        x[t] = 0.8 * x[t - 1] + rng.normal()
    assert ljung_box(x, 10).p_value < 0.001


def test_ljung_box_contracts():
    with pytest.raises(TooFewObservations):
        ljung_box(np.arange(10.0), 10)
    with pytest.raises(ConstantSeries):
        ljung_box(np.ones(50), 5)


def test_arch_lm_matches_reference(rng):
    e = simulate_garch(GarchParams(0.1, 0.2, 0.5), 500, seed=3)
    lm, lmp, _, _ = het_arch(e, nlags=5)
    r = arch_lm(e, 5)
    assert r.statistic == pytest.approx(lm, rel=1e-9)
    assert r.p_value == pytest.approx(lmp, rel=1e-7, abs=1e-15)


def test_arch_lm_null_size():
    rng = np.random.default_rng(99)
    p = np.array([arch_lm(rng.normal(size=1000), 5).p_value for _ in range(300)])
    assert 0.02 < np.mean(p < 0.05) < 0.09


def test_arch_lm_detects_garch():
    e = simulate_garch(GarchParams(0.1, 0.2, 0.5), 2000, seed=8)
    assert arch_lm(e, 10).p_value < 0.01


def test_arch_lm_constant():
    with pytest.raises(SingularRegression):
        arch_lm(np.full(200, 0.7), 5)


def test_moran_two_block_clusters():
    w = two_block_network()
    x = np.r_[np.full(5, 1.0), np.full(5, 3.0)] + np.linspace(0, 0.1, 10)
    r = morans_i(x, w)
    assert r.statistic == pytest.approx(brute_moran(x, w), abs=1e-12)
    assert r.statistic > 0 and r.z > 2


def test_moran_exact_permutation_moments():
    # randomisation mean and variance equal the moments over every relabelling
    rng = np.random.default_rng(1)
    n = 7
    w = rng.uniform(size=(n, n)) * (rng.uniform(size=(n, n)) < 0.5)
    np.fill_diagonal(w, 0.0)
    w[w.sum(axis=1) == 0, 0] = 1.0
    w[0, 0] = 0.0
    w[0, 1] += 1.0
    x = rng.gamma(1.5, size=n)
    stats_ = np.array([brute_moran(x[list(p)], w) for p in itertools.permutations(range(n))])
    r = morans_i(x, w)
    assert r.expected == pytest.approx(stats_.mean(), abs=1e-12)
    assert r.variance == pytest.approx(stats_.var(), rel=1e-9)


def test_moran_permutation_mean_mc():
    rng = np.random.default_rng(4)
    W = knn_weights(random_network(20, seed=4), 4)
    x = rng.normal(size=20)
    vals = [morans_i(rng.permutation(x), W).statistic for _ in range(1000)]
    sd = np.sqrt(morans_i(x, W).variance / 1000)
    assert abs(np.mean(vals) + 1 / 19) < 4 * sd


def test_moran_drops_isolated():
    w = two_block_network()
    w = np.pad(w, ((0, 1), (0, 1)))
    x = np.r_[np.arange(10.0), 100.0]
    r = morans_i(x, w)
    assert r.n_dropped == 1 and r.n_used == 10
    assert r.statistic == pytest.approx(brute_moran(x[:10], w[:10, :10]), abs=1e-12)


def test_moran_too_few():
    with pytest.raises(TooFewObservations):
        morans_i([1.0, 2.0, 3.0], np.ones((3, 3)) - np.eye(3))


@settings(max_examples=30, deadline=None)
@given(n=st.integers(5, 50), seed=st.integers(0, 10_000))
def test_moran_oracle_random(n, seed):
    rng = np.random.default_rng(seed)
    W = distance_band_weights(random_network(n, seed), 80_000.0).dense()
    x = rng.normal(size=n)
    if (W.sum(axis=1) > 0).sum() < 4:
        return
    keep = W.sum(axis=1) > 0
    assert morans_i(x, W).statistic == pytest.approx(brute_moran(x[keep], W[np.ix_(keep, keep)]), abs=1e-9)


def test_kurtosis():
    x = np.random.default_rng(0).normal(size=100_000)
    assert abs(excess_kurtosis(x)) < 0.1
    assert excess_kurtosis(np.tile([1.0, -1.0], 50)) == pytest.approx(-2.0, abs=1e-12)
    with pytest.raises(ConstantSeries):
        excess_kurtosis(np.ones(10))


def test_pass_rates():
    assert pass_rates([TestResult(0.0, 1.0)] * 3) == 100.0
    assert pass_rates([TestResult(9.0, 0.0)] * 3) == 0.0
    assert pass_rates([0.01, 0.2, 0.8], 0.05) == pytest.approx(200 / 3)
    assert pass_rates([0.2, float("nan")]) == 100.0
    with pytest.raises(EmptyList):
        pass_rates([])


def test_residual_diagnostics_iid():
    rng = np.random.default_rng(21)
    W = knn_weights(random_network(30, seed=21), 5)
    d = residual_diagnostics(rng.normal(size=(400, 30)), W)
    assert set(d) == {"ljung_box_res", "ljung_box_sq", "moran_res", "moran_sq"}
    assert 85 <= d["ljung_box_res"] <= 100
    assert 92 <= d["moran_res"] <= 98


def test_moran_panel_skips_constant_rows():
    W = knn_weights(random_network(6, seed=0), 2)
    v = np.random.default_rng(0).normal(size=(5, 6))
    v[2] = 1.0
    assert len(moran_panel(v, W)) == 4


def test_station_moran_undefined_is_nan():
    w = np.zeros((5, 5))
    w[0, 1] = w[1, 0] = 1.0
    out = station_moran(np.random.default_rng(0).normal(size=(20, 5)), w)
    assert isinstance(out["mean"], MoranResult) and np.isnan(out["mean"].statistic)
