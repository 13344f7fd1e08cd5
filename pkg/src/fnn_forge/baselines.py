"""Linear delay-embedding baselines and the classical false-nearest-neighbor test."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.spatial import cKDTree

from .errors import InsufficientDataError, InvalidArgument
from .timeseries import HankelMatrix, PointCloud, TimeSeries

TICA_REG = 1e-10


@dataclass(frozen=True)
class LinearEmbedding:
    """Fitted linear projection of Hankel rows, columns ordered by importance."""

    projection: np.ndarray
    center: np.ndarray
    kind: str
    spectrum: np.ndarray
    lag: int = 0

    def transform(self, X) -> np.ndarray:
        rows = X.rows if isinstance(X, HankelMatrix) else np.asarray(X, dtype=np.float64)
        return (rows - self.center) @ self.projection

    def to_dict(self):
        return {"kind": self.kind, "lag": self.lag,
                "projection": self.projection.tolist(), "center": self.center.tolist(),
                "spectrum": self.spectrum.tolist()}

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["projection"]), np.array(d["center"]), d["kind"],
                   np.array(d["spectrum"]), int(d.get("lag", 0)))


def _fix_signs(vectors):
    """Flip columns so each one's largest-magnitude entry is positive."""
    v = np.array(vectors, dtype=np.float64)
    pivot = np.argmax(np.abs(v), axis=0)
    signs = np.sign(v[pivot, np.arange(v.shape[1])])
    signs[signs == 0] = 1.0
    return v * signs


def _check_width(X: HankelMatrix, L):
    if L < 1 or L > X.T:
        raise InvalidArgument(f"requested {L} components from a width-{X.T} Hankel matrix")


def etd_embed(X: HankelMatrix, L: int):
    """Eigen-time-delay coordinates: principal components of the Hankel rows."""
    _check_width(X, L)
    if len(X) < X.T:
        raise InsufficientDataError(f"need at least T={X.T} rows, got {len(X)}")
    center = X.rows.mean(axis=0)
    Xc = X.rows - center
    _, s, vt = np.linalg.svd(Xc, full_matrices=False)
    proj = _fix_signs(vt[:L].T)
    emb = LinearEmbedding(proj, center, "etd", s)
    return emb, PointCloud(Xc @ proj, X.source_dt)


def tica_embed(X: HankelMatrix, lag: int = 1, L: int = 10):
    """Time-lagged independent components of the Hankel rows.

    Solves the symmetrized generalized eigenproblem between the lagged and the
    instantaneous covariance; both are estimated on the same pair of windows
    so the spectrum is bounded by 1.
    """
    _check_width(X, L)
    if lag < 0 or len(X) <= lag:
        raise InsufficientDataError(f"lag {lag} needs more than {lag} rows, got {len(X)}")
    center = X.rows.mean(axis=0)
    Xc = X.rows - center
    if lag == 0:
        c0 = Xc.T @ Xc / len(Xc)
        ct = c0
    else:
        a, b = Xc[:-lag], Xc[lag:]
        n = len(a)
        c0 = 0.5 * (a.T @ a + b.T @ b) / n
        ct = 0.5 * (a.T @ b + b.T @ a) / n
    c0_reg = c0 + TICA_REG * np.eye(X.T)
    evals, evecs = linalg.eigh(0.5 * (ct + ct.T), c0_reg)
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order], evecs[:, order]
    proj = _fix_signs(evecs[:, :L])
    emb = LinearEmbedding(proj, center, "tica", evals, lag)
    return emb, PointCloud(Xc @ proj, X.source_dt)


def tica_covariances(X: HankelMatrix, lag: int):
    """The (instantaneous, lagged) covariance pair used by ``tica_embed``."""
    Xc = X.rows - X.rows.mean(axis=0)
    if lag == 0:
        c = Xc.T @ Xc / len(Xc)
        return c, c
    a, b = Xc[:-lag], Xc[lag:]
    n = len(a)
    return 0.5 * (a.T @ a + b.T @ b) / n, 0.5 * (a.T @ b + b.T @ a) / n


def _as_1d(series):
    if isinstance(series, TimeSeries):
        if series.n_channels != 1:
            raise InvalidArgument("expected a univariate series")
        return series.values[:, 0]
    x = np.asarray(series, dtype=np.float64)
    if x.ndim != 1:
        x = x.reshape(-1)
    return x


def lagged_embed(series, d_E: int, tau: int) -> PointCloud:
    """Row i is (x[i-(d_E-1)tau], ..., x[i-tau], x[i]) for every valid i."""
    x = _as_1d(series)
    if d_E < 1 or tau < 1:
        raise InvalidArgument(f"d_E and tau must be >= 1, got d_E={d_E}, tau={tau}")
    span = (d_E - 1) * tau
    if len(x) <= span:
        raise InsufficientDataError(f"series of length {len(x)} too short for d_E={d_E}, tau={tau}")
    n = len(x) - span
    cols = [x[k * tau: k * tau + n] for k in range(d_E)]
    dt = series.dt if isinstance(series, TimeSeries) else 1.0
    return PointCloud(np.stack(cols, axis=1), dt)


def first_autocorrelation_zero(series, max_lag=None) -> int:
    """Smallest lag at which the sample autocorrelation turns non-positive."""
    x = _as_1d(series)
    x = x - x.mean()
    n = len(x)
    max_lag = max_lag or n // 2
    spec = np.fft.rfft(x, 2 * n)
    acf = np.fft.irfft(spec * np.conj(spec))[:max_lag + 1]
    acf /= acf[0]
    hits = np.flatnonzero(acf <= 0)
    if len(hits) == 0:
        raise InvalidArgument("autocorrelation never crosses zero within max_lag")
    return int(hits[0])


@dataclass(frozen=True)
class KennelResult:
    dimension: int
    fractions: np.ndarray
    saturated: bool


def _nearest_other(tree, pts):
    dist, idx = tree.query(pts, k=2)
    self_idx = np.arange(len(pts))
    first_is_self = idx[:, 0] == self_idx
    return np.where(first_is_self, idx[:, 1], idx[:, 0])


def kennel_fractions(series, tau: int, d_max: int, r_tol: float = 10.0, a_tol: float = 2.0,
                     form: str = "kennel"):
    """False-neighbor fraction for each lift d -> d+1, d = 1..d_max, single nearest neighbor.

    ``form="kennel"`` is the original test: the lifted distance to the
    d-dimensional neighbor is compared with its d-dimensional distance
    (ratio of distances >= r_tol) and with the attractor size
    (lifted distance >= a_tol * std of the series).
    ``form="latent"`` applies the latent regularizer's criteria verbatim:
    squared-distance jump relative to the nearest neighbor in d+1
    dimensions, and that neighbor's distance against the cumulative
    per-coordinate size.
    """
    if form not in ("kennel", "latent"):
        raise InvalidArgument(f"unknown criterion form {form!r}")
    x = _as_1d(series)
    if d_max < 1:
        raise InvalidArgument("d_max must be >= 1")
    # columns x_i, x_{i-tau}, ...: every prefix is a valid delay vector
    full = lagged_embed(x, d_max + 1, tau).points[:, ::-1]
    n = len(full)
    centered = full - full.mean(axis=0)
    cum_var = np.cumsum((centered ** 2).sum(axis=0)) / n
    size = np.sqrt(cum_var / np.arange(1, d_max + 2))
    spread = x.std()
    fractions = np.empty(d_max)
    for d in range(1, d_max + 1):
        low, high = full[:, :d], full[:, :d + 1]
        j_low = _nearest_other(cKDTree(low), low)
        lifted_d2 = np.sum((high - high[j_low]) ** 2, axis=1)
        if form == "kennel":
            low_d2 = np.sum((low - low[j_low]) ** 2, axis=1)
            jump = np.sqrt(np.maximum(lifted_d2 - low_d2, 0.0) / np.maximum(low_d2, 1e-24))
            far = np.sqrt(lifted_d2) >= a_tol * spread
        else:
            j_high = _nearest_other(cKDTree(high), high)
            sorted_d2 = np.sum((high - high[j_high]) ** 2, axis=1)
            jump = (lifted_d2 - sorted_d2) / np.maximum(sorted_d2, 1e-12)
            far = np.sqrt(sorted_d2) >= a_tol * max(size[d], 1e-12)
        fractions[d - 1] = np.mean((jump >= r_tol) | far)
    return fractions


def kennel_fnn_dimension(series, tau: int, d_max: int = 10, r_tol: float = 10.0,
                         a_tol: float = 2.0, threshold: float = 0.01,
                         form: str = "kennel") -> KennelResult:
    """First embedding dimension whose false-neighbor fraction drops below ``threshold``.

    Returns ``d_max`` with ``saturated=True`` when no dimension qualifies.
    """
    fractions = kennel_fractions(series, tau, d_max, r_tol, a_tol, form)
    below = np.flatnonzero(fractions < threshold)
    if len(below):
        return KennelResult(int(below[0]) + 1, fractions, False)
    return KennelResult(d_max, fractions, True)
