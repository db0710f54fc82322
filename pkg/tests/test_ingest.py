import math

import numpy as np
import pandas as pd
import pytest
from scipy import integrate

from conftest import make_panel
from windvol.errors import BoundaryOutsideRange, DuplicateRow, MissingCell, NonDailySpacing, OutOfDomain, UnparseableValue
from windvol.ingest import (
    convert_agrimonia,
    descriptive_stats,
    load_panel,
    make_stations,
    project_coordinates,
    split,
    write_panel,
)

WGS84_A = 6378137.0
WGS84_F = 1 / 298.257223563
UTM_SCALE = 0.9996


def _meridian_arc(lat_deg):
    # arc length from the equator by direct quadrature of the meridian radius of curvature
    e2 = WGS84_F * (2 - WGS84_F)
    f = lambda p: WGS84_A * (1 - e2) / (1 - e2 * math.sin(p) ** 2) ** 1.5
    return integrate.quad(f, 0.0, math.radians(lat_deg), epsabs=1e-6, epsrel=1e-13)[0]


def _write_long(path, rows, extra_cols=()):
    cols = ["date", "station_id", "lon", "lat", "value", *extra_cols]
    pd.DataFrame(rows, columns=cols).to_csv(path, index=False)


def test_load_two_station_three_day(tmp_path):
    rows = [(f"2020-01-0{d}", s, lon, 45.0, d * 1.5) for d in (1, 2, 3) for s, lon in (("A", 9.0), ("B", 9.5))]
    _write_long(tmp_path / "p.csv", rows)
    p = load_panel(tmp_path / "p.csv", "ws10")
    assert (p.T, p.N) == (3, 2)
    assert p.station_ids == ["A", "B"]
    np.testing.assert_allclose(p.values[:, 0], [1.5, 3.0, 4.5])


def test_missing_cell(tmp_path):
    rows = [(f"2020-01-0{d}", s, 9.0, 45.0, 1.0) for d in (1, 2, 3) for s in ("A", "B")]
    del rows[3]
    _write_long(tmp_path / "p.csv", rows)
    with pytest.raises(MissingCell):
        load_panel(tmp_path / "p.csv", "ws10")


def test_duplicate_and_unparseable(tmp_path):
    rows = [("2020-01-01", "A", 9.0, 45.0, 1.0), ("2020-01-01", "A", 9.0, 45.0, 2.0)]
    _write_long(tmp_path / "d.csv", rows)
    with pytest.raises(DuplicateRow):
        load_panel(tmp_path / "d.csv", "ws10")
    _write_long(tmp_path / "u.csv", [("2020-01-01", "A", 9.0, 45.0, "calm")])
    with pytest.raises(UnparseableValue) as info:
        load_panel(tmp_path / "u.csv", "ws10")
    assert info.value.station == "A"


def test_gap_in_dates(tmp_path):
    rows = [(d, "A", 9.0, 45.0, 1.0) for d in ("2020-01-01", "2020-01-03")]
    _write_long(tmp_path / "g.csv", rows)
    with pytest.raises(NonDailySpacing):
        load_panel(tmp_path / "g.csv", "ws10")


def test_write_then_load_round_trip(tmp_path, rng):
    p = make_panel(rng.gamma(2.0, 1.0, (6, 3)), directions=rng.uniform(0, 360, (6, 3)))
    write_panel(p, tmp_path / "r.csv")
    q = load_panel(tmp_path / "r.csv", "ws10")
    np.testing.assert_array_equal(p.values, q.values)
    np.testing.assert_array_equal(p.directions, q.directions)
    assert list(q.dates) == list(p.dates)


def test_stats_constant_panel():
    s = descriptive_stats(make_panel(np.full((4, 3), 2.0)))
    assert s.median == s.mean == 2.0
    assert s.sd == s.iqr == 0.0


def test_stats_hand_values():
    s = descriptive_stats(make_panel([[1.0, 2.0], [3.0, 4.0]]))
    assert s.mean == 2.5 and s.median == 2.5
    assert s.sd == pytest.approx(math.sqrt(5 / 3), abs=1e-12)
    assert (s.min, s.max, s.T, s.N) == (1.0, 4.0, 2, 2)


def test_projection_origin():
    x, y = project_coordinates(9.0, 0.0)
    assert x == pytest.approx(500000.0, abs=1e-6)
    assert y == pytest.approx(0.0, abs=1e-6)


def test_projection_equator_step():
    _, y0 = project_coordinates(9.0, 0.0)
    _, y1 = project_coordinates(9.0, 0.01)
    assert abs(y1 - y0) == pytest.approx(1105.7, rel=0.002)


@pytest.mark.parametrize("lat", [0.0, 30.0, 45.5, 60.0])
def test_projection_central_meridian_matches_arc(lat):
    # on the central meridian northing is the scaled meridian arc
    _, y = project_coordinates(9.0, lat)
    assert y == pytest.approx(UTM_SCALE * _meridian_arc(lat), abs=1e-3)


def test_projection_same_point_and_domain():
    a = np.array(project_coordinates(9.7, 45.3))
    b = np.array(project_coordinates(9.7, 45.3))
    assert np.hypot(*(a - b)) == 0.0
    with pytest.raises(OutOfDomain):
        project_coordinates(9.0, 89.5)


def test_split_counts():
    p = make_panel(np.ones((10, 2)), start="2020-01-01")
    train, test = split(p, "2020-01-04")
    assert (train.T, test.T) == (3, 7)
    with pytest.raises(BoundaryOutsideRange):
        split(p, "2020-01-01")


def test_split_full_period():
    dates = pd.date_range("2016-01-01", "2021-12-31", freq="D")
    p = make_panel(np.ones((dates.size, 1)), start="2016-01-01")
    train, test = split(p, "2021-01-01")
    assert (train.T, test.T) == (1827, 365)


def test_station_coordinates_validated():
    with pytest.raises(OutOfDomain):
        make_stations(["A"], [200.0], [45.0])


def test_convert_agrimonia(tmp_path):
    raw = pd.DataFrame({
        "IDStations": ["1"] * 2 + ["2"] * 2,
        "Latitude": [45.0] * 2 + [45.2] * 2,
        "Longitude": [9.0] * 2 + [9.3] * 2,
        "Time": ["2016-01-01", "2016-01-02"] * 2,
        "WE_wind_speed_10m_mean": [1.0, 2.0, 3.0, 4.0],
        "WE_wind_speed_100m_mean": [2.0, 3.0, 4.0, 5.0],
        "WE_mode_wind_direction_10m": [90.0] * 4,
        "WE_mode_wind_direction_100m": [180.0] * 4,
    })
    raw.to_csv(tmp_path / "raw.csv", index=False)
    paths = convert_agrimonia(tmp_path / "raw.csv", tmp_path / "out")
    p = load_panel(paths["ws100"], "ws100")
    np.testing.assert_array_equal(p.values, [[2.0, 4.0], [3.0, 5.0]])
    assert np.all(p.directions == 180.0)
