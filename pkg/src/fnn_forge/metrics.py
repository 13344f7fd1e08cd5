"""Similarity scores between a reconstructed attractor and the ground truth.

Scores follow the convention 1 = identical; most are normalized so that an
uninformative reconstruction scores near 0.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import pdist

from .errors import (
    DegenerateReferenceError,
    FnnForgeError,
    InsufficientDataError,
    InvalidArgument,
)
from .timeseries import PointCloud

THEILER_WINDOW = 10
NN_MAX_POINTS = 2000
CORR_MAX_POINTS = 3000
CORR_RADII = 32
CORR_PERCENTILES = (0.1, 10.0)


def _pts(cloud):
    if isinstance(cloud, PointCloud):
        return cloud.points
    a = np.asarray(cloud, dtype=np.float64)
    return a[:, None] if a.ndim == 1 else a


def pad_attractor(Y, L: int) -> np.ndarray:
    """Append zero columns so the cloud has L coordinates."""
    y = _pts(Y)
    d = y.shape[1]
    if d > L:
        raise InvalidArgument(f"cannot pad a {d}-dimensional cloud down to {L}")
    return np.hstack([y, np.zeros((len(y), L - d))])


def _match_widths(yhat, y):
    if len(yhat) != len(y):
        raise InvalidArgument(f"row counts differ: {len(yhat)} vs {len(y)}")
    if y.shape[1] < yhat.shape[1]:
        y = pad_attractor(y, yhat.shape[1])
    elif yhat.shape[1] < y.shape[1]:
        yhat = pad_attractor(yhat, y.shape[1])
    return yhat, y


# -- Procrustes ---------------------------------------------------------------

@dataclass
class ProcrustesResult:
    rotation: np.ndarray
    scale: float
    aligned: np.ndarray
    reference: np.ndarray


def procrustes_align(Yhat, Y) -> ProcrustesResult:
    """Orthogonal alignment of Yhat onto Y after centering and unit-norm scaling.

    Reflections are allowed. After the rotation, Yhat is rescaled by the
    least-squares optimal factor. ``reference`` is the normalized Y.
    """
    yhat, y = _match_widths(_pts(Yhat), _pts(Y))
    if len(y) < 2:
        raise InvalidArgument("Procrustes alignment needs at least 2 points")
    a = y - y.mean(axis=0)
    b = yhat - yhat.mean(axis=0)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0:
        raise DegenerateReferenceError("reference cloud has no spread")
    a = a / na
    if nb == 0:
        return ProcrustesResult(np.eye(y.shape[1]), 0.0, b, a)
    b = b / nb
    u, s, vt = np.linalg.svd(b.T @ a)
    rot = u @ vt
    scale = float(s.sum())
    return ProcrustesResult(rot, scale, scale * (b @ rot), a)


def s_proc(Yhat, Y) -> float:
    """1 - |P Yhat - Y| / |Y - mean(Y)| on the normalized, aligned clouds."""
    r = procrustes_align(Yhat, Y)
    return float(1.0 - np.linalg.norm(r.aligned - r.reference) / np.linalg.norm(r.reference))


# -- dynamic time warping -------------------------------------------------------

def dtw_distance(A, B) -> float:
    """Classic DTW with Euclidean local cost, full window, both ends matched.

    The dynamic program sweeps anti-diagonals so memory stays linear.
    """
    a, b = _pts(A), _pts(B)
    if len(a) == 0 or len(b) == 0:
        raise InvalidArgument("DTW needs non-empty sequences")
    if a.shape[1] != b.shape[1]:
        a, b = _match_widths_any(a, b)
    n, m = len(a), len(b)
    inf = np.inf
    # prev2, prev hold accumulated costs on diagonals k-2, k-1 indexed by row i
    prev2 = np.full(n, inf)
    prev = np.full(n, inf)
    prev[0] = np.linalg.norm(a[0] - b[0])
    if n == 1 and m == 1:
        return float(prev[0])
    for k in range(1, n + m - 1):
        lo, hi = max(0, k - m + 1), min(n - 1, k)
        i = np.arange(lo, hi + 1)
        j = k - i
        cost = np.sqrt(np.sum((a[i] - b[j]) ** 2, axis=1))
        cur = np.full(n, inf)
        up = prev[i - 1] if lo > 0 else np.concatenate([[inf], prev[i[1:] - 1]])
        left = prev[i]                        # (i, j-1) lies on diagonal k-1 at row i
        diag = prev2[i - 1] if lo > 0 else np.concatenate([[inf], prev2[i[1:] - 1]])
        left = np.where(j >= 1, left, inf)
        cur[i] = cost + np.minimum(np.minimum(up, left), diag)
        prev2, prev = prev, cur
    return float(prev[n - 1])


def _match_widths_any(a, b):
    w = max(a.shape[1], b.shape[1])
    return pad_attractor(a, w), pad_attractor(b, w)


def s_dtw(Yhat, Y) -> float:
    """1 - DTW(P Yhat, Y) / DTW(centroid path, Y) on Procrustes-normalized clouds."""
    r = procrustes_align(Yhat, Y)
    centroid = np.zeros_like(r.reference)  # reference is centered
    denom = dtw_distance(centroid, r.reference)
    if denom == 0:
        raise DegenerateReferenceError("reference cloud has no spread")
    return float(1.0 - dtw_distance(r.aligned, r.reference) / denom)


# -- simplex cross-mapping ----------------------------------------------------------

def simplex_forecast(Yhat, Y, tau: int = 0, n_neighbors: int | None = None,
                     theiler: int = THEILER_WINDOW) -> float:
    """Forecast skill of Y from neighbor simplices found in Yhat.

    For each point i, the ``k = d_E + 1`` nearest neighbors of Yhat[i] (outside
    a Theiler window) are advanced ``tau`` steps and their centroid in Y
    predicts Y[i + tau]. Returns 1 - MSE / (summed per-dimension variance of Y).
    ``d_E`` defaults to the column count of Yhat.
    """
    yhat, y = _pts(Yhat), _pts(Y)
    if len(yhat) != len(y):
        raise InvalidArgument(f"row counts differ: {len(yhat)} vs {len(y)}")
    k = n_neighbors or yhat.shape[1] + 1
    n = len(y)
    if tau < 0 or n <= k + tau + 2 * theiler + 1:
        raise InsufficientDataError(f"{n} points too few for k={k}, tau={tau}, theiler={theiler}")
    usable = n - tau                              # library and targets: indices with a future
    lib = yhat[:usable]
    tree = cKDTree(lib)
    extra = 2 * theiler + 1
    _, idx = tree.query(lib, k=min(usable, k + extra))
    if idx.ndim == 1:
        idx = idx[:, None]
    rows = np.arange(usable)[:, None]
    valid = np.abs(idx - rows) > theiler
    # keep the first k valid neighbors of each row (query results are distance-ordered)
    rank = np.cumsum(valid, axis=1)
    keep = valid & (rank <= k)
    if np.any(keep.sum(axis=1) < k):
        raise InsufficientDataError("not enough neighbors outside the Theiler window")
    nbr = idx[keep].reshape(usable, k)
    pred = y[nbr + tau].mean(axis=1)
    target = y[tau:tau + usable]
    mse = np.mean(np.sum((pred - target) ** 2, axis=1))
    var = np.sum(y.var(axis=0))
    if var == 0:
        raise DegenerateReferenceError("reference cloud has zero variance")
    return float(1.0 - mse / var)


# -- global neighbor coverage -----------------------------------------------------

def _neighbor_ranks(pts):
    """ranks[i, j]: position of j in i's neighbor list (1-based, self excluded)."""
    n = len(pts)
    d = np.sqrt(np.maximum(np.sum(pts ** 2, 1)[:, None] + np.sum(pts ** 2, 1)[None, :]
                           - 2 * pts @ pts.T, 0.0))
    d[np.arange(n), np.arange(n)] = -np.inf
    order = np.argsort(d, axis=1, kind="stable")
    ranks = np.empty_like(order)
    np.put_along_axis(ranks, order, np.arange(n)[None, :], axis=1)
    return ranks


def neighbor_coverage(Yhat, Y, max_points: int = NN_MAX_POINTS, seed: int = 0):
    """Area between the observed neighbor-overlap curve and the random baseline.

    Returns ``(score, n_used)``. Clouds larger than ``max_points`` are
    subsampled (same rows in both) with a seeded uniform draw.
    """
    yhat, y = _pts(Yhat), _pts(Y)
    if len(yhat) != len(y):
        raise InvalidArgument(f"row counts differ: {len(yhat)} vs {len(y)}")
    n = len(y)
    if n < 3:
        raise InvalidArgument("neighbor coverage needs at least 3 points")
    if n > max_points:
        rows = np.sort(np.random.default_rng(seed).choice(n, max_points, replace=False))
        yhat, y, n = yhat[rows], y[rows], max_points
    ra, rb = _neighbor_ranks(yhat), _neighbor_ranks(y)
    both = np.maximum(ra, rb)
    both[np.arange(n), np.arange(n)] = n  # self never counted
    # kappa(k) summed over points = number of (i, j) with max rank <= k
    counts = np.bincount(both.ravel(), minlength=n + 1)
    kappa = np.cumsum(counts)[1:n] / n   # k = 1 .. n-1
    k = np.arange(1, n, dtype=np.float64)
    null = k * k / n
    score = np.sum((kappa - null) / (k - null)) / (n - 1)
    return float(score), n


def s_nn(Yhat, Y, max_points: int = NN_MAX_POINTS, seed: int = 0) -> float:
    return neighbor_coverage(Yhat, Y, max_points, seed)[0]


# -- dimension ----------------------------------------------------------------

def s_dim(var_truth, var_embed) -> float:
    """Compare sorted, unit-sum variance profiles (truth padded with zeros)."""
    t = np.asarray(var_truth, dtype=np.float64)
    e = np.asarray(var_embed, dtype=np.float64)
    if len(t) < len(e):
        t = np.concatenate([t, np.zeros(len(e) - len(t))])
    if len(t) != len(e):
        raise InvalidArgument(f"variance vectors differ in length: {len(t)} vs {len(e)}")
    if t.sum() <= 0:
        raise DegenerateReferenceError("truth variance is all zero")
    t = np.sort(t / t.sum())[::-1]
    e = np.sort(e / e.sum())[::-1] if e.sum() > 0 else np.zeros_like(e)
    return float(1.0 - np.linalg.norm(t - e) / np.linalg.norm(t))


def effective_dimension(var_embed, threshold: float = 0.01):
    """(units above ``threshold`` of total variance, participation ratio)."""
    v = np.asarray(var_embed, dtype=np.float64)
    if np.any(v < 0) or v.sum() <= 0:
        raise DegenerateReferenceError("variance vector must be non-negative and not all zero")
    frac = v / v.sum()
    return int(np.sum(frac > threshold)), float(v.sum() ** 2 / np.sum(v * v))


# -- correlation dimension ----------------------------------------------------

@dataclass
class CorrelationDimension:
    value: float
    radii: np.ndarray
    integral: np.ndarray
    fit_slice: tuple
    n_used: int


def correlation_dimension(cloud, max_points: int = CORR_MAX_POINTS, seed: int = 0,
                          n_radii: int = CORR_RADII, percentiles=CORR_PERCENTILES,
                          details: bool = False):
    """Grassberger-Procaccia slope of log C(r) against log r.

    C(r) is the fraction of point pairs closer than r, evaluated on
    logarithmically spaced radii between two percentiles of the pairwise
    distances; the slope is fitted over the middle half of the radii.
    """
    pts = _pts(cloud)
    if len(pts) < 100:
        raise InsufficientDataError(f"correlation dimension needs >= 100 points, got {len(pts)}")
    n_used = len(pts)
    if len(pts) > max_points:
        rows = np.sort(np.random.default_rng(seed).choice(len(pts), max_points, replace=False))
        pts, n_used = pts[rows], max_points
    d = np.sort(pdist(pts))
    d = d[d > 0]
    if len(d) == 0:
        raise DegenerateReferenceError("all points coincide")
    lo, hi = np.percentile(d, percentiles)
    radii = np.geomspace(lo, hi, n_radii)
    c = np.searchsorted(d, radii, side="left") / len(d)
    q = n_radii // 4
    sl = slice(q, n_radii - q)
    slope = np.polyfit(np.log(radii[sl]), np.log(c[sl]), 1)[0]
    if details:
        return CorrelationDimension(float(slope), radii, c, (q, n_radii - q), n_used)
    return float(slope)


def s_corr(c_truth: float, c_embed: float) -> float:
    """Symmetric relative agreement 1 - |a - b| / (|a| + |b|)."""
    if not (c_truth > 0 and c_embed > 0):
        raise InvalidArgument(f"correlation dimensions must be positive, got {c_truth}, {c_embed}")
    return float(1.0 - abs(c_truth - c_embed) / (abs(c_truth) + abs(c_embed)))


# -- aggregate report ----------------------------------------------------------

@dataclass
class MetricsReport:
    s_dim: float
    s_proc: float
    s_dtw: float
    s_simp: dict
    s_nn: float
    s_corr: float
    s_homol: float
    diagnostics: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)

    SCORES = ("s_dim", "s_proc", "s_dtw", "s_simp", "s_nn", "s_corr", "s_homol")

    def to_dict(self):
        return {"scores": {"s_dim": self.s_dim, "s_proc": self.s_proc, "s_dtw": self.s_dtw,
                           "s_simp": {str(k): v for k, v in self.s_simp.items()},
                           "s_nn": self.s_nn, "s_corr": self.s_corr, "s_homol": self.s_homol},
                "diagnostics": self.diagnostics, "params": self.params}

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), sort_keys=True, **kw)

    def flat(self):
        """Scalar scores keyed by name, one entry per forecast horizon."""
        out = {k: getattr(self, k) for k in self.SCORES if k != "s_simp"}
        for tau, v in self.s_simp.items():
            out[f"s_simp_tau{tau}"] = v
        return out

    @classmethod
    def from_dict(cls, d):
        s = d["scores"]
        return cls(s["s_dim"], s["s_proc"], s["s_dtw"], {int(k): v for k, v in s["s_simp"].items()},
                   s["s_nn"], s["s_corr"], s["s_homol"], d.get("diagnostics", {}), d.get("params", {}))


class MetricsError(FnnForgeError):
    """One or more metrics failed; ``errors`` maps metric names to exceptions."""

    def __init__(self, errors):
        self.errors = errors
        super().__init__("; ".join(f"{k}: {v}" for k, v in errors.items()))


def compare_all(Yhat, Y, taus=(0, 1, 10, 20, 50), seed: int = 0,
                homology_points: int = 400) -> MetricsReport:
    """Every similarity score for one (reconstruction, truth) pair."""
    from .persistence import s_homol as _s_homol

    yhat = _pts(Yhat)
    y = pad_attractor(_pts(Y), max(yhat.shape[1], _pts(Y).shape[1]))
    if len(yhat) != len(y):
        raise InvalidArgument(f"row counts differ: {len(yhat)} vs {len(y)}")
    results, errors, diag = {}, {}, {}

    def run(name, fn):
        try:
            results[name] = fn()
        except FnnForgeError as exc:
            errors[name] = exc

    run("s_dim", lambda: s_dim(y.var(axis=0), yhat.var(axis=0)))
    run("s_proc", lambda: s_proc(yhat, y))
    run("s_dtw", lambda: s_dtw(yhat, y))
    run("s_simp", lambda: {int(t): simplex_forecast(yhat, y, int(t)) for t in taus})
    nn = {}

    def _nn():
        score, used = neighbor_coverage(yhat, y, seed=seed)
        nn["n_used"] = used
        return score

    run("s_nn", _nn)
    cd = {}

    def _corr():
        ct = correlation_dimension(y, seed=seed)
        ce = correlation_dimension(yhat, seed=seed)
        cd.update(truth=ct, embed=ce)
        return s_corr(ct, ce)

    run("s_corr", _corr)
    hom = {}

    def _hom():
        score, info = _s_homol(y, yhat, max_points=homology_points, seed=seed, details=True)
        hom.update(info)
        return score

    run("s_homol", _hom)
    if errors:
        raise MetricsError(errors)
    eff = effective_dimension(yhat.var(axis=0)) if yhat.var(axis=0).sum() > 0 else (0, 0.0)
    diag.update({
        "correlation_dimension": cd,
        "effective_dimension": {"threshold_count": eff[0], "participation_ratio": eff[1]},
        "neighbor_coverage_points": nn.get("n_used"),
        "homology": hom,
        "variance_truth": y.var(axis=0).tolist(),
        "variance_embed": yhat.var(axis=0).tolist(),
    })
    params = {
        "seed": seed, "taus": [int(t) for t in taus], "theiler_window": THEILER_WINDOW,
        "simplex_neighbors": yhat.shape[1] + 1,
        "neighbor_coverage_max_points": NN_MAX_POINTS,
        "correlation_max_points": CORR_MAX_POINTS, "correlation_radii": CORR_RADII,
        "correlation_percentiles": list(CORR_PERCENTILES), "correlation_fit": "middle 50% of radii",
        "procrustes_scaling": "centered, unit Frobenius norm, optimal isotropic scale",
        "homology_max_points": homology_points, "homology_subsample": "farthest-point, seeded",
        "wasserstein": "order 1, Euclidean ground metric, H0+H1, null = empty diagram",
        "n_points": len(y), "truth_dim": int(_pts(Y).shape[1]), "embed_dim": int(yhat.shape[1]),
    }
    return MetricsReport(results["s_dim"], results["s_proc"], results["s_dtw"], results["s_simp"],
                         results["s_nn"], results["s_corr"], results["s_homol"], diag, params)


_SCORE = {"type": "number"}
REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["scores", "diagnostics", "params"],
    "additionalProperties": False,
    "properties": {
        "scores": {
            "type": "object",
            "required": list(MetricsReport.SCORES),
            "additionalProperties": False,
            "properties": {
                "s_dim": _SCORE, "s_proc": _SCORE, "s_dtw": _SCORE, "s_nn": _SCORE,
                "s_corr": _SCORE, "s_homol": _SCORE,
                "s_simp": {"type": "object", "patternProperties": {"^[0-9]+$": _SCORE},
                           "additionalProperties": False},
            },
        },
        "diagnostics": {"type": "object"},
        "params": {"type": "object", "required": ["seed", "taus"]},
    },
}
