"""Row-standardised spatial weight matrices over a station network."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import pandas as pd
from scipy import sparse

from .errors import DimensionMismatch, InvalidParameters, KTooLarge, UndefinedDirection
from .ingest import Station

DEFAULT_K = 5
DEFAULT_RADIUS = 55_000.0
DEFAULT_CUTOFF = 100_000.0
DEFAULT_HALF_ANGLE = 45.0
DEFAULT_DECAY = 50_000.0
DEFAULT_MIX = 0.5


@dataclass(frozen=True)
class DirectionalParams:
    prevailing_dir: np.ndarray
    half_angle: float = DEFAULT_HALF_ANGLE
    cutoff: float = DEFAULT_CUTOFF
    decay: float = DEFAULT_DECAY

    def __post_init__(self):
        if not 0.0 < self.half_angle <= 180.0:
            raise InvalidParameters(f"half_angle must lie in (0, 180], got {self.half_angle}")
        if self.cutoff <= 0 or self.decay <= 0:
            raise InvalidParameters("cutoff and decay must be positive")
        dirs = np.asarray(self.prevailing_dir, dtype=float)
        if not np.all(np.isfinite(dirs)):
            raise InvalidParameters("every station needs a finite prevailing direction")
        object.__setattr__(self, "prevailing_dir", np.mod(dirs, 360.0))


@dataclass(frozen=True)
class WeightMatrix:
    """Sparse N x N connectivity; every row sums to one or is all zero."""

    matrix: sparse.csr_matrix
    kind: str
    params: dict = field(default_factory=dict)
    station_ids: tuple[str, ...] = ()

    def __post_init__(self):
        m = sparse.csr_matrix(self.matrix, dtype=float)
        m.eliminate_zeros()
        m.sort_indices()
        if m.shape[0] != m.shape[1]:
            raise DimensionMismatch(f"weight matrix must be square, got {m.shape}")
        object.__setattr__(self, "matrix", m)
        if not self.station_ids:
            object.__setattr__(self, "station_ids", tuple(str(i) for i in range(m.shape[0])))

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def row_sums(self) -> np.ndarray:
        return np.asarray(self.matrix.sum(axis=1)).ravel()

    @property
    def isolated(self) -> list[int]:
        return [int(i) for i in np.flatnonzero(np.diff(self.matrix.indptr) == 0)]

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def entries(self) -> list[tuple[int, int, float]]:
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        return [(int(coo.row[k]), int(coo.col[k]), float(coo.data[k])) for k in order]

    def metadata(self) -> dict:
        return {
            "kind": self.kind,
            "n": self.n,
            "params": _jsonable(self.params),
            "isolated": [self.station_ids[i] for i in self.isolated],
            "station_ids": list(self.station_ids),
        }

    def to_csv(self, path, sidecar=None, header_lines=(), provenance: dict | None = None) -> None:
        """Coordinate-list CSV (i, j, w) plus a JSON metadata sidecar."""
        rows = self.entries()
        with open(path, "w", encoding="utf-8", newline="") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            fh.write("i,j,w\n")
            for i, j, w in rows:
                fh.write(f"{i},{j},{w!r}\n")
        sidecar = sidecar or str(path).rsplit(".", 1)[0] + ".json"
        with open(sidecar, "w", encoding="utf-8") as fh:
            meta = self.metadata() if provenance is None else {"_provenance": provenance, **self.metadata()}
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_csv(cls, path, sidecar=None) -> "WeightMatrix":
        sidecar = sidecar or str(path).rsplit(".", 1)[0] + ".json"
        with open(sidecar, encoding="utf-8") as fh:
            meta = json.load(fh)
        df = pd.read_csv(path, comment="#", float_precision="round_trip")
        n = int(meta["n"])
        m = sparse.csr_matrix((df["w"].to_numpy(float), (df["i"].to_numpy(int), df["j"].to_numpy(int))), shape=(n, n))
        return cls(m, meta["kind"], meta.get("params", {}), tuple(meta["station_ids"]))

    def edge_list(self, stations: Sequence[Station]) -> pd.DataFrame:
        """Edges with projected endpoint coordinates, for network plots."""
        rows = []
        for i, j, w in self.entries():
            a, b = stations[i], stations[j]
            rows.append((a.id, b.id, w, a.x, a.y, b.x, b.y, a.lon, a.lat, b.lon, b.lat))
        return pd.DataFrame(
            rows,
            columns=["from_id", "to_id", "weight", "x_from", "y_from", "x_to", "y_to",
                     "lon_from", "lat_from", "lon_to", "lat_to"],
        )


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def row_standardize(m) -> sparse.csr_matrix:
    """Divide each row by its sum; rows summing to zero stay zero."""
    m = sparse.csr_matrix(m, dtype=float)
    sums = np.asarray(m.sum(axis=1)).ravel()
    inv = np.divide(1.0, sums, out=np.zeros_like(sums), where=sums > 0)
    return sparse.csr_matrix(sparse.diags(inv) @ m)


def _coords(stations: Sequence[Station]) -> np.ndarray:
    return np.array([[s.x, s.y] for s in stations], dtype=float).reshape(-1, 2)


def pairwise_distances(stations: Sequence[Station]) -> np.ndarray:
    xy = _coords(stations)
    diff = xy[:, None, :] - xy[None, :, :]
    return np.sqrt((diff**2).sum(axis=-1))


def knn_weights(stations: Sequence[Station], k: int = DEFAULT_K) -> WeightMatrix:
    n = len(stations)
    if k < 1:
        raise InvalidParameters(f"k must be positive, got {k}")
    if k >= n:
        raise KTooLarge(f"k={k} requires more than {n} stations")
    d = np.round(pairwise_distances(stations), 6)
    id_rank = np.argsort(np.argsort([s.id for s in stations], kind="stable"), kind="stable")
    rows, cols = [], []
    for i in range(n):
        others = np.array([j for j in range(n) if j != i])
        order = np.lexsort((id_rank[others], d[i, others]))
        nbrs = others[order[:k]]
        rows.extend([i] * k)
        cols.extend(nbrs.tolist())
    m = sparse.csr_matrix((np.full(len(rows), 1.0 / k), (rows, cols)), shape=(n, n))
    return WeightMatrix(m, "knn", {"k": k}, tuple(s.id for s in stations))


def distance_band_weights(stations: Sequence[Station], r: float = DEFAULT_RADIUS) -> WeightMatrix:
    if r <= 0:
        raise InvalidParameters(f"radius must be positive, got {r}")
    d = pairwise_distances(stations)
    adj = (d > 0) & (d <= r)
    m = row_standardize(sparse.csr_matrix(adj.astype(float)))
    return WeightMatrix(m, "distance_band", {"r": float(r)}, tuple(s.id for s in stations))


def bearings(stations: Sequence[Station]) -> np.ndarray:
    """Bearing from station i to station j, degrees clockwise from north."""
    xy = _coords(stations)
    dx = xy[None, :, 0] - xy[:, None, 0]
    dy = xy[None, :, 1] - xy[:, None, 1]
    return np.mod(np.degrees(np.arctan2(dx, dy)), 360.0)


def angular_difference(a, b) -> np.ndarray:
    """Circular distance between bearings, in [0, 180]."""
    diff = np.mod(np.asarray(a, dtype=float) - np.asarray(b, dtype=float), 360.0)
    return np.minimum(diff, 360.0 - diff)


def directional_weights(stations: Sequence[Station], params: DirectionalParams) -> WeightMatrix:
    n = len(stations)
    if params.prevailing_dir.shape != (n,):
        raise DimensionMismatch(f"need {n} prevailing directions, got {params.prevailing_dir.shape}")
    d = pairwise_distances(stations)
    dtheta = angular_difference(bearings(stations), params.prevailing_dir[:, None])
    upwind = (d > 0) & (d <= params.cutoff) & (dtheta <= params.half_angle)
    # cos floored at 0 so cones wider than 90 degrees keep weights non-negative
    raw = np.where(upwind, np.exp(-d / params.decay) * np.maximum(np.cos(np.radians(dtheta)), 0.0), 0.0)
    m = row_standardize(sparse.csr_matrix(raw))
    p = {
        "cutoff": float(params.cutoff),
        "half_angle": float(params.half_angle),
        "decay": float(params.decay),
        "prevailing_dir": params.prevailing_dir.round(6).tolist(),
    }
    return WeightMatrix(m, "directional", p, tuple(s.id for s in stations))


def prevailing_direction(dir_series) -> float:
    """Circular mean bearing in [0, 360)."""
    theta = np.radians(np.asarray(dir_series, dtype=float).ravel())
    if theta.size == 0:
        raise UndefinedDirection("no direction observations")
    s, c = np.sin(theta).mean(), np.cos(theta).mean()
    if np.hypot(s, c) < 1e-12:
        raise UndefinedDirection("directions cancel; mean resultant length is zero")
    return float(np.mod(np.degrees(np.arctan2(s, c)), 360.0))


def combine_weights(w_a: WeightMatrix, w_b: WeightMatrix, lambda_mix: float = DEFAULT_MIX) -> WeightMatrix:
    if w_a.n != w_b.n:
        raise DimensionMismatch(f"cannot combine {w_a.n}x{w_a.n} with {w_b.n}x{w_b.n}")
    if not 0.0 <= lambda_mix <= 1.0:
        raise InvalidParameters(f"lambda_mix must lie in [0, 1], got {lambda_mix}")
    m = row_standardize(lambda_mix * w_a.matrix + (1.0 - lambda_mix) * w_b.matrix)
    p = {"lambda": float(lambda_mix), "a": w_a.kind, "b": w_b.kind}
    return WeightMatrix(m, "combined", p, w_a.station_ids)


def build_weights(spec: dict, stations: Sequence[Station], directions=None) -> WeightMatrix:
    """Construct a matrix from a declarative spec such as ``{"kind": "knn", "k": 5}``.

    ``directions`` is a T x N bearing matrix (or an N-vector of prevailing
    bearings) and is only needed for the directional kind.
    """
    kind = spec.get("kind")
    if kind == "knn":
        return knn_weights(stations, int(spec.get("k", DEFAULT_K)))
    if kind == "distance_band":
        return distance_band_weights(stations, float(spec.get("r", DEFAULT_RADIUS)))
    if kind == "directional":
        if directions is None:
            raise InvalidParameters("directional weights need wind directions")
        directions = np.asarray(directions, dtype=float)
        prevailing = (
            np.array([prevailing_direction(directions[:, j]) for j in range(directions.shape[1])])
            if directions.ndim == 2
            else directions
        )
        params = DirectionalParams(
            prevailing,
            half_angle=float(spec.get("half_angle", DEFAULT_HALF_ANGLE)),
            cutoff=float(spec.get("cutoff", DEFAULT_CUTOFF)),
            decay=float(spec.get("decay", DEFAULT_DECAY)),
        )
        return directional_weights(stations, params)
    raise InvalidParameters(f"unknown weight kind {kind!r}")
