"""Time-series containers, lag lifting and train/val/test partitioning."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    CsvFormatError,
    InsufficientDataError,
    InvalidArgument,
    ZeroVarianceError,
)

DEFAULT_LAGS = 10


def _frozen(a, ndim=2):
    a = np.array(a, dtype=np.float64)
    if a.ndim == 1 and ndim == 2:
        a = a[:, None]
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class TimeSeries:
    """Uniformly sampled signal, stored as an N x c matrix."""

    values: np.ndarray
    dt: float = 1.0
    name: str = ""

    def __post_init__(self):
        v = _frozen(self.values)
        if v.ndim != 2:
            raise InvalidArgument(f"values must be 1-D or 2-D, got {v.ndim}-D")
        if v.shape[0] < 2:
            raise InsufficientDataError(f"need at least 2 samples, got {v.shape[0]}")
        if not np.all(np.isfinite(v)):
            raise InvalidArgument("time series contains non-finite values")
        if not self.dt > 0:
            raise InvalidArgument(f"dt must be positive, got {self.dt}")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "dt", float(self.dt))

    def __len__(self):
        return self.values.shape[0]

    @property
    def n_channels(self):
        return self.values.shape[1]

    def channel(self, i):
        return TimeSeries(self.values[:, i], self.dt, f"{self.name}[{i}]")

    def slice(self, start, stop):
        return TimeSeries(self.values[start:stop], self.dt, self.name)


@dataclass(frozen=True)
class HankelMatrix:
    """Sliding windows of T consecutive samples, one window per row."""

    rows: np.ndarray
    T: int
    source_dt: float = 1.0

    def __post_init__(self):
        r = _frozen(self.rows)
        if self.T < 2 or r.shape[1] != self.T:
            raise InvalidArgument(f"bad lag count T={self.T} for rows of width {r.shape[1]}")
        object.__setattr__(self, "rows", r)

    def __len__(self):
        return self.rows.shape[0]


@dataclass(frozen=True)
class PointCloud:
    """Time-ordered set of states, one per row."""

    points: np.ndarray
    dt: float = 1.0

    def __post_init__(self):
        p = _frozen(self.points)
        if p.shape[1] < 1:
            raise InvalidArgument("point cloud needs at least one column")
        if not np.all(np.isfinite(p)):
            raise InvalidArgument("point cloud contains non-finite values")
        object.__setattr__(self, "points", p)

    def __len__(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]


def standardize(series: TimeSeries) -> TimeSeries:
    """Z-score every channel (population variance)."""
    v = series.values
    sd = v.std(axis=0)
    if np.any(sd == 0):
        bad = np.flatnonzero(sd == 0).tolist()
        raise ZeroVarianceError(f"constant channel(s) {bad} cannot be standardized")
    return TimeSeries((v - v.mean(axis=0)) / sd, series.dt, series.name)


def build_hankel(series: TimeSeries, T: int = DEFAULT_LAGS) -> HankelMatrix:
    """Row i holds x_i ... x_{i+T-1} of a univariate series."""
    if series.n_channels != 1:
        raise InvalidArgument("build_hankel expects a univariate series")
    if T < 2:
        raise InvalidArgument(f"T must be >= 2, got {T}")
    x = series.values[:, 0]
    n = len(x)
    if n < T:
        raise InsufficientDataError(f"series of length {n} is shorter than T={T}")
    rows = np.lib.stride_tricks.sliding_window_view(x, T)
    return HankelMatrix(rows.copy(), T, series.dt)


def downsample(series: TimeSeries, factor: int) -> TimeSeries:
    if int(factor) != factor or factor < 1:
        raise InvalidArgument(f"downsampling factor must be a positive integer, got {factor}")
    factor = int(factor)
    return TimeSeries(series.values[::factor], series.dt * factor, series.name)


def split_train_val_test(series: TimeSeries, segment_len: int = 5000, gap: int = 1000):
    """Three disjoint, ordered segments separated by ``gap`` samples.

    Segments are packed tightly from the start of the series.
    """
    n = len(series)
    need = 3 * segment_len + 2 * gap
    if n < need:
        raise InsufficientDataError(
            f"need {need} samples for 3 segments of {segment_len} with gap {gap}, got {n}")
    starts = [k * (segment_len + gap) for k in range(3)]
    return tuple(series.slice(s, s + segment_len) for s in starts)


def read_csv(path, dt: float = 1.0, name: str | None = None) -> TimeSeries:
    """Load a numeric CSV (one column per channel, optional single header row)."""
    path = Path(path)
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise CsvFormatError(f"{path} is empty")

    def parse(row):
        return [float(c) for c in row]

    start = 0
    try:
        parse(rows[0])
    except ValueError:
        start = 1  # header
    width = len(rows[start]) if start < len(rows) else 0
    data = []
    for i, row in enumerate(rows[start:], start=start + 1):
        if len(row) != width:
            raise CsvFormatError(f"expected {width} columns, found {len(row)}", row=i)
        vals = []
        for j, cell in enumerate(row, start=1):
            try:
                vals.append(float(cell))
            except ValueError:
                raise CsvFormatError(f"non-numeric value {cell!r}", row=i, column=j) from None
        data.append(vals)
    if len(data) < 2:
        raise CsvFormatError(f"{path} has fewer than 2 data rows")
    arr = np.array(data)
    if not np.all(np.isfinite(arr)):
        r, c = np.argwhere(~np.isfinite(arr))[0]
        raise CsvFormatError("non-finite value", row=int(r) + start + 1, column=int(c) + 1)
    return TimeSeries(arr, dt, name or path.stem)


def write_csv(path, matrix, header=None):
    """Write a matrix with 17 significant digits (round-trip exact)."""
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim == 1:
        m = m[:, None]
    with open(path, "w", newline="") as fh:
        if header:
            fh.write(",".join(header) + "\n")
        for row in m:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
