"""Station panel loading, descriptive statistics, projection and splitting."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from .errors import (
    BoundaryOutsideRange,
    DataError,
    DuplicateRow,
    EmptyPanel,
    MissingCell,
    NonDailySpacing,
    OutOfDomain,
    UnparseableValue,
)

VARIABLES = ("ws10", "ws100")
REQUIRED_COLUMNS = ("date", "station_id", "lon", "lat", "value")

# WGS84 / UTM zone 32N
_A = 6378137.0
_F = 1.0 / 298.257223563
_E2 = _F * (2.0 - _F)
_EP2 = _E2 / (1.0 - _E2)
_K0 = 0.9996
_LON0 = 9.0
_FALSE_EASTING = 500000.0


@dataclass(frozen=True)
class Station:
    id: str
    lon: float
    lat: float
    x: float
    y: float

    def __post_init__(self):
        if not -180.0 <= self.lon <= 180.0 or not -90.0 <= self.lat <= 90.0:
            raise OutOfDomain(f"coordinates out of range: lon={self.lon}, lat={self.lat}", station=self.id)


@dataclass(frozen=True)
class Panel:
    """T x N matrix of daily values with its date and station axes.

    ``directions`` optionally carries the matching T x N wind-direction
    bearings (degrees clockwise from north) used by directional weights.
    """

    values: np.ndarray
    dates: pd.DatetimeIndex
    stations: tuple[Station, ...]
    variable: str
    directions: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise DataError(f"panel values must be 2-D, got shape {values.shape}")
        if values.shape != (len(self.dates), len(self.stations)):
            raise DataError(
                f"values shape {values.shape} does not match "
                f"{len(self.dates)} dates x {len(self.stations)} stations"
            )
        if np.isnan(values).any():
            raise DataError("panel contains NaN")
        if len({s.id for s in self.stations}) != len(self.stations):
            raise DuplicateRow("station ids are not unique")
        _check_daily(self.dates)
        object.__setattr__(self, "values", values)

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def N(self) -> int:
        return self.values.shape[1]

    @property
    def station_ids(self) -> list[str]:
        return [s.id for s in self.stations]

    def select_dates(self, mask: np.ndarray) -> "Panel":
        directions = None if self.directions is None else self.directions[mask]
        return replace(self, values=self.values[mask], dates=self.dates[mask], directions=directions)


@dataclass(frozen=True)
class StatsRow:
    variable: str
    T: int
    N: int
    median: float
    mean: float
    iqr: float
    sd: float
    min: float
    max: float

    COLUMNS = ("Height", "T", "N", "Median", "Mean", "IQR", "SD", "min", "max")

    def as_row(self) -> list:
        return [self.variable, self.T, self.N, self.median, self.mean, self.iqr, self.sd, self.min, self.max]


def _check_daily(dates: pd.DatetimeIndex) -> None:
    if len(dates) > 1:
        steps = np.diff(dates.values).astype("timedelta64[D]").astype(int)
        if (steps != 1).any():
            raise NonDailySpacing("dates must be strictly increasing with daily spacing")


def project_coordinates(lon, lat):
    """Forward transverse Mercator, UTM zone 32N on the WGS84 ellipsoid.

    Accepts scalars or arrays; returns ``(x, y)`` in metres.
    """
    lon = np.asarray(lon, dtype=float)
    lat = np.asarray(lat, dtype=float)
    if np.any(np.abs(lat) >= 89.0):
        raise OutOfDomain("transverse Mercator undefined for |lat| >= 89 degrees")
    if np.any(np.abs(lon) > 180.0):
        raise OutOfDomain("longitude outside [-180, 180]")

    phi = np.radians(lat)
    sin_phi, cos_phi, tan_phi = np.sin(phi), np.cos(phi), np.tan(phi)
    e4, e6 = _E2**2, _E2**3

    nu = _A / np.sqrt(1.0 - _E2 * sin_phi**2)
    t = tan_phi**2
    c = _EP2 * cos_phi**2
    a = np.radians(lon - _LON0) * cos_phi
    m = _A * (
        (1 - _E2 / 4 - 3 * e4 / 64 - 5 * e6 / 256) * phi
        - (3 * _E2 / 8 + 3 * e4 / 32 + 45 * e6 / 1024) * np.sin(2 * phi)
        + (15 * e4 / 256 + 45 * e6 / 1024) * np.sin(4 * phi)
        - (35 * e6 / 3072) * np.sin(6 * phi)
    )

    x = _FALSE_EASTING + _K0 * nu * (
        a + (1 - t + c) * a**3 / 6 + (5 - 18 * t + t**2 + 72 * c - 58 * _EP2) * a**5 / 120
    )
    y = _K0 * (
        m
        + nu
        * tan_phi
        * (
            a**2 / 2
            + (5 - t + 9 * c + 4 * c**2) * a**4 / 24
            + (61 - 58 * t + t**2 + 600 * c - 330 * _EP2) * a**6 / 720
        )
    )
    if x.ndim == 0:
        return float(x), float(y)
    return x, y


def make_stations(ids: Sequence[str], lon, lat) -> tuple[Station, ...]:
    x, y = project_coordinates(np.asarray(lon, dtype=float), np.asarray(lat, dtype=float))
    x, y = np.atleast_1d(x), np.atleast_1d(y)
    return tuple(
        Station(str(i), float(lo), float(la), float(xx), float(yy))
        for i, lo, la, xx, yy in zip(ids, np.atleast_1d(lon), np.atleast_1d(lat), x, y)
    )


def load_panel(path, variable: str) -> Panel:
    """Read a long-format CSV (date, station_id, lon, lat, value) into a Panel.

    Optional columns: ``variable`` (rows for other variables are dropped) and
    ``direction`` (wind bearing in degrees, carried along for directional
    weights). Every (date, station) cell must be present exactly once.
    """
    try:
        df = pd.read_csv(path, dtype={"station_id": str}, encoding="utf-8", comment="#", float_precision="round_trip")
    except FileNotFoundError as exc:
        raise DataError(f"input file not found: {path}") from exc
    missing = [c for c in REQUIRED_COLUMNS if c not in df.columns]
    if missing:
        raise DataError(f"{path}: missing columns {missing}")
    if "variable" in df.columns:
        df = df[df["variable"] == variable]
    if df.empty:
        raise EmptyPanel(f"{path}: no rows for variable {variable!r}")

    try:
        df["date"] = pd.to_datetime(df["date"], format="%Y-%m-%d")
    except (ValueError, TypeError) as exc:
        raise UnparseableValue(f"{path}: bad date: {exc}") from exc
    for col in ("value", "lon", "lat") + (("direction",) if "direction" in df.columns else ()):
        converted = pd.to_numeric(df[col], errors="coerce")
        bad = converted.isna() & df[col].notna()
        if bad.any():
            row = df.loc[bad].iloc[0]
            raise UnparseableValue(
                f"{path}: cannot parse {col}={row[col]!r} on {row['date'].date()}",
                station=row["station_id"],
            )
        df[col] = converted

    dup = df.duplicated(["date", "station_id"])
    if dup.any():
        row = df.loc[dup].iloc[0]
        raise DuplicateRow(f"{path}: duplicate row for {row['date'].date()}", station=row["station_id"])

    coords = df.groupby("station_id", sort=True)[["lon", "lat"]].agg(["min", "max"])
    if ((coords.xs("min", axis=1, level=1) - coords.xs("max", axis=1, level=1)).abs() > 1e-9).any(axis=None):
        raise DataError(f"{path}: station coordinates vary between rows")
    ids = list(coords.index)

    dates = pd.DatetimeIndex(sorted(df["date"].unique()))
    _check_daily(dates)
    wide = df.pivot(index="date", columns="station_id", values="value").reindex(index=dates, columns=ids)
    if wide.isna().to_numpy().any():
        r, c = np.argwhere(wide.isna().to_numpy())[0]
        raise MissingCell(dates[r].date(), ids[c])

    directions = None
    if "direction" in df.columns:
        dwide = df.pivot(index="date", columns="station_id", values="direction").reindex(index=dates, columns=ids)
        directions = dwide.to_numpy(dtype=float)

    stations = make_stations(ids, coords[("lon", "min")].to_numpy(), coords[("lat", "min")].to_numpy())
    return Panel(wide.to_numpy(dtype=float), dates, stations, variable, directions)


def write_panel(panel: Panel, path, header_lines: Sequence[str] = ()) -> None:
    rows = []
    for t, d in enumerate(panel.dates):
        ds = d.strftime("%Y-%m-%d")
        for j, s in enumerate(panel.stations):
            row = [ds, s.id, repr(s.lon), repr(s.lat), repr(float(panel.values[t, j]))]
            if panel.directions is not None:
                row.append(repr(float(panel.directions[t, j])))
            rows.append(row)
    header = list(REQUIRED_COLUMNS) + (["direction"] if panel.directions is not None else [])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def descriptive_stats(panel: Panel) -> StatsRow:
    cells = panel.values.ravel()
    if cells.size == 0:
        raise EmptyPanel("cannot summarise an empty panel")
    q25, q50, q75 = np.quantile(cells, [0.25, 0.5, 0.75])
    sd = float(np.std(cells, ddof=1)) if cells.size > 1 else 0.0
    return StatsRow(
        variable=panel.variable,
        T=panel.T,
        N=panel.N,
        median=float(q50),
        mean=float(cells.mean()),
        iqr=float(q75 - q25),
        sd=sd,
        min=float(cells.min()),
        max=float(cells.max()),
    )


def stats_to_csv(rows: Sequence[StatsRow], path, header_lines: Sequence[str] = ()) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(StatsRow.COLUMNS)
        for r in rows:
            w.writerow(r.as_row())


def split(panel: Panel, boundary) -> tuple[Panel, Panel]:
    """Train = days strictly before ``boundary``; test = the rest."""
    boundary = pd.Timestamp(boundary)
    if not panel.dates[0] < boundary <= panel.dates[-1]:
        raise BoundaryOutsideRange(
            f"boundary {boundary.date()} not inside ({panel.dates[0].date()}, {panel.dates[-1].date()}]"
        )
    mask = np.asarray(panel.dates < boundary)
    return panel.select_dates(mask), panel.select_dates(~mask)


def convert_agrimonia(raw_path, out_dir, columns: dict | None = None) -> dict[str, Path]:
    """Reshape an Agrimonia export into one long CSV per height.

    ``columns`` overrides the source column names.
    """
    names = {
        "station": "IDStations",
        "lat": "Latitude",
        "lon": "Longitude",
        "date": "Time",
        "ws10": "WE_wind_speed_10m_mean",
        "ws100": "WE_wind_speed_100m_mean",
        "dir10": "WE_mode_wind_direction_10m",
        "dir100": "WE_mode_wind_direction_100m",
    }
    names.update(columns or {})
    raw = pd.read_csv(raw_path, dtype={names["station"]: str})
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    out = {}
    for var, dcol in (("ws10", "dir10"), ("ws100", "dir100")):
        frame = pd.DataFrame(
            {
                "date": pd.to_datetime(raw[names["date"]]).dt.strftime("%Y-%m-%d"),
                "station_id": raw[names["station"]],
                "lon": raw[names["lon"]],
                "lat": raw[names["lat"]],
                "value": raw[names[var]],
            }
        )
        if names[dcol] in raw.columns:
            frame["direction"] = raw[names[dcol]]
        path = out_dir / f"{var}.csv"
        frame.sort_values(["date", "station_id"]).to_csv(path, index=False)
        out[var] = path
    return out
