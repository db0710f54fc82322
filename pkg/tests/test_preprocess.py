import numpy as np
import pandas as pd
import pytest
from statsmodels.tsa.seasonal import STL

from conftest import make_panel
from windvol.errors import DegenerateVariance, SeriesTooShort
from windvol.preprocess import ResidualPanel, day_of_year_cycle, fit_ar1, preprocess_panel, stl_decompose


def _noisy_weekly(n=213, seed=1):
    rng = np.random.default_rng(seed)
    t = np.arange(n)
    y = np.sin(2 * np.pi * t / 7) + 0.01 * t + rng.normal(0, 0.3, n)
    y[50] += 8.0
    return y


@pytest.mark.parametrize("outer, robust", [(0, False), (1, True)])
def test_stl_matches_reference_general_window(outer, robust):
    y = _noisy_weekly()
    ref = STL(y, period=7, seasonal=9, robust=robust).fit(inner_iter=2, outer_iter=outer)
    ours = stl_decompose(y, 7, seasonal=9, low_pass=9, inner=2, outer=outer)
    np.testing.assert_allclose(ours.seasonal, ref.seasonal, atol=1e-10)
    np.testing.assert_allclose(ours.trend, ref.trend, atol=1e-10)


def test_stl_periodic_matches_reference():
    # degree-0 loess with a window far longer than the series is the subseries mean
    rng = np.random.default_rng(3)
    n = 4 * 365
    t = np.arange(n)
    y = np.sin(2 * np.pi * t / 365) + 0.001 * t + rng.normal(0, 0.2, n)
    ref = STL(y, period=365, seasonal=10 * n + 1, seasonal_deg=0, low_pass=367, robust=False).fit(inner_iter=2, outer_iter=0)
    ours = stl_decompose(y, 365, low_pass=367, outer=0)
    np.testing.assert_allclose(ours.seasonal, ref.seasonal, atol=1e-9)
    np.testing.assert_allclose(ours.trend, ref.trend, atol=1e-9)


def test_stl_components_add_up():
    y = _noisy_weekly()
    d = stl_decompose(y, 7, seasonal=9)
    np.testing.assert_allclose(d.seasonal + d.trend + d.remainder, y, atol=1e-12)


def test_stl_pure_sine():
    t = np.arange(1460)
    y = np.sin(2 * np.pi * t / 365)
    d = stl_decompose(y, 365)
    assert np.sqrt(np.mean(d.remainder**2)) < 0.05 * np.sqrt(np.mean(y**2))


def test_stl_constant():
    d = stl_decompose(np.full(800, 3.0), 365)
    assert np.abs(d.seasonal).max() < 1e-6
    assert np.abs(d.trend - 3.0).max() < 1e-6
    assert np.abs(d.remainder).max() < 1e-6


def test_stl_trend_tracking():
    rng = np.random.default_rng(7)
    t = np.arange(1460)
    trend = 0.002 * t
    y = np.sin(2 * np.pi * t / 365) + trend + rng.normal(0, 0.1, t.size)
    d = stl_decompose(y, 365)
    assert np.corrcoef(d.trend, trend)[0, 1] > 0.99


def test_stl_too_short():
    with pytest.raises(SeriesTooShort):
        stl_decompose(np.ones(500), 365)


def test_day_of_year_cycle_clamps_leap_day():
    dates = pd.date_range("2020-12-29", "2021-01-02", freq="D")
    np.testing.assert_array_equal(day_of_year_cycle(dates), [363, 364, 364, 0, 1])


def test_ar1_white_noise():
    x = np.random.default_rng(11).normal(size=5000)
    assert abs(fit_ar1(x).phi) < 0.05


def test_ar1_recovers_coefficient():
    rng = np.random.default_rng(12)
    x = np.zeros(5000)
    for t in range(1, x.size):
        x[t] = 0.6 * x[t - 1] + rng.normal()
    fit = fit_ar1(x)
    assert 0.55 <= fit.phi <= 0.65
    np.testing.assert_allclose(fit.residuals, x[1:] - fit.phi * x[:-1])


def test_ar1_closed_form():
    x = np.array([1.0, 2.0, 0.5, -1.0] * 10)
    lag, cur = x[:-1], x[1:]
    assert fit_ar1(x).phi == pytest.approx(lag @ cur / (lag @ lag), abs=1e-15)


def test_ar1_constant():
    with pytest.raises(DegenerateVariance):
        fit_ar1(np.full(100, 2.5))


def test_ar1_explosive_clamped():
    x = 1.05 ** np.arange(60)
    with pytest.warns(RuntimeWarning):
        fit = fit_ar1(x)
    assert fit.phi == 0.999 and fit.clamped


def _seasonal_panel(N=2, years=3, seed=0):
    rng = np.random.default_rng(seed)
    T = 365 * years
    t = np.arange(T)[:, None]
    vals = 2 + np.sin(2 * np.pi * t / 365) + rng.normal(0, 0.3, (T, N))
    return make_panel(vals, start="2017-01-01")


def test_preprocess_panel_shape():
    p = _seasonal_panel()
    res = preprocess_panel(p)
    assert res.residuals.values.shape == (p.T - 1, p.N)
    assert res.residuals.dates[0] == p.dates[1]
    assert len(res.decompositions) == p.N


def test_preprocess_constant_station_tagged():
    p = _seasonal_panel(3)
    vals = p.values.copy()
    vals[:, 1] = 4.0
    with pytest.raises(DegenerateVariance) as info:
        preprocess_panel(make_panel(vals, start="2017-01-01"))
    assert info.value.station == "S1"


def test_preprocess_threads_identical():
    p = _seasonal_panel(4)
    a = preprocess_panel(p, threads=1).residuals.values
    b = preprocess_panel(p, threads=3).residuals.values
    assert a.tobytes() == b.tobytes()


def test_residual_panel_csv_round_trip(tmp_path, rng):
    rp = ResidualPanel(rng.normal(size=(5, 3)), pd.date_range("2020-01-02", periods=5), ("A", "B", "C"), "ws10")
    rp.to_csv(tmp_path / "r.csv", header_lines=("windvol test",))
    back = ResidualPanel.from_csv(tmp_path / "r.csv", "ws10")
    assert back.values.tobytes() == rp.values.tobytes()
    assert back.station_ids == rp.station_ids
