import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import optimize

from windvol.errors import EmptyList, SingularRegression, SingularSystem
from windvol.preprocess import fit_ar1
from windvol.sdpd import (
    SdpdParams,
    fit_sdpd,
    sdpd_loglik,
    sdpd_residual_diag,
    sdpd_residuals,
    simulate_sdpd,
    spatial_logdet,
)
from windvol.synthetic import random_network
from windvol.weights import knn_weights


def loop_loglik(rho, gamma, lam, c, w, y, s2):
    T, N = len(y), len(y[0])
    det = np.linalg.det(np.eye(N) - rho * np.asarray(w))
    total = 0.0
    for t in range(1, T):
        for i in range(N):
            r = y[t][i] - c[i] - gamma[i] * y[t - 1][i]
            for j in range(N):
                r -= rho * w[i][j] * y[t][j] + lam * w[i][j] * y[t - 1][j]
            total += r * r
    n = (T - 1) * N
    return (T - 1) * math.log(det) - 0.5 * n * math.log(2 * math.pi * s2) - total / (2 * s2)


def _w(n, seed=0, k=3):
    return knn_weights(random_network(n, seed), min(k, n - 1)).dense()


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000), N=st.integers(2, 6), T=st.integers(3, 60), rho=st.floats(-0.9, 0.9),
       lam=st.floats(-0.5, 0.5))
def test_loglik_matches_loop_oracle(seed, N, T, rho, lam):
    rng = np.random.default_rng(seed)
    w = _w(N, seed)
    y = rng.normal(size=(T, N))
    g, c = rng.uniform(-0.5, 0.5, N), rng.normal(size=N)
    p = SdpdParams(rho, g, lam, c)
    expected = loop_loglik(rho, g, lam, c, w.tolist(), y.tolist(), 1.3)
    assert sdpd_loglik(p, w, y, 1.3) == pytest.approx(expected, abs=1e-9)


@pytest.mark.parametrize("n", [5, 20, 50])
def test_logdet_matches_dense_det(n):
    w = _w(n, n, 4)
    for rho in (-0.7, 0.0, 0.45, 0.95):
        assert spatial_logdet(w, rho) == pytest.approx(math.log(np.linalg.det(np.eye(n) - rho * w)), abs=1e-9)


def test_logdet_boundary():
    w = _w(6)
    with pytest.raises(SingularSystem):
        spatial_logdet(w, 1.0)
    with pytest.raises(SingularSystem):
        spatial_logdet(w, -1.2)


def test_decoupled_is_plain_gaussian(rng):
    y = rng.normal(size=(40, 3))
    p = SdpdParams(0.0, np.zeros(3), 0.0)
    s2 = 0.8
    ref = -0.5 * y[1:].size * math.log(2 * math.pi * s2) - np.sum(y[1:] ** 2) / (2 * s2)
    assert sdpd_loglik(p, _w(3), y, s2) == pytest.approx(ref, abs=1e-10)


def test_residuals_recover_shocks():
    w = _w(8, 2)
    p = SdpdParams(0.4, np.full(8, 0.3), 0.2, np.linspace(0, 1, 8))
    y = simulate_sdpd(p, w, 200, seed=3, sigma=0.5)
    eps = sdpd_residuals(p, w, y)
    # rows of (I - rho W) y_t - ... are the unit shocks times sigma
    assert eps.shape == (199, 8)
    assert eps.std() == pytest.approx(0.5, rel=0.05)


def test_fit_recovers_spec_example():
    w = knn_weights(random_network(30, seed=0), 5)
    truth = SdpdParams(0.5, np.full(30, 0.3), 0.2)
    y = simulate_sdpd(truth, w, 2000, seed=0)
    fit = fit_sdpd(y, w)
    assert 0.45 <= fit.params.rho <= 0.55
    assert 0.15 <= fit.params.lam <= 0.25
    np.testing.assert_allclose(fit.params.gamma, 0.3, atol=0.06)


def test_fit_matches_full_numerical_optimum():
    # concentrated solution equals a brute-force optimisation over every coefficient
    N, T = 3, 120
    w = _w(N, 7, 1)
    y = simulate_sdpd(SdpdParams(0.3, np.array([0.2, 0.5, 0.1]), -0.2, np.array([0.5, 0.0, -0.5])), w, T, seed=9)
    fit = fit_sdpd(y, w)

    def neg(x):
        rho, lam, g, c, ls2 = x[0], x[1], x[2 : 2 + N], x[2 + N : 2 + 2 * N], x[-1]
        if abs(rho) >= 0.99:
            return 1e10
        return -sdpd_loglik(SdpdParams(rho, g, lam, c), w, y, math.exp(ls2))

    x0 = np.r_[0.0, 0.0, np.zeros(N), np.zeros(N), 0.0]
    res = optimize.minimize(neg, x0, method="BFGS", options={"gtol": 1e-8})
    assert fit.loglik >= -res.fun - 1e-6
    assert fit.params.rho == pytest.approx(res.x[0], abs=1e-3)
    assert fit.params.lam == pytest.approx(res.x[1], abs=1e-3)


def test_zero_w_equals_ar1():
    rng = np.random.default_rng(5)
    y = np.zeros((400, 4))
    for t in range(1, 400):
        y[t] = 0.5 * y[t - 1] + rng.normal(size=4)
    fit = fit_sdpd(y, np.zeros((4, 4)), intercept=False)
    assert fit.params.rho == 0.0 and fit.params.lam == 0.0
    for i in range(4):
        assert fit.params.gamma[i] == pytest.approx(fit_ar1(y[:, i]).phi, abs=1e-6)


def test_constant_column_tagged():
    y = np.random.default_rng(1).normal(size=(100, 3))
    y[:, 1] = 2.0
    with pytest.raises(SingularRegression) as info:
        fit_sdpd(y, _w(3), station_ids=["A", "B", "C"])
    assert info.value.station == "B"


def test_residual_diag_iid():
    W = knn_weights(random_network(30, seed=3), 5)
    d = sdpd_residual_diag(np.random.default_rng(3).normal(size=(500, 30)), W)
    assert d["ljung_box_res"] >= 85
    assert 92 <= d["moran_res"] <= 98
    with pytest.raises(EmptyList):
        sdpd_residual_diag(np.empty((0, 30)), W)
