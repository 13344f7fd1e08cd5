"""Vietoris-Rips persistence (H0, H1) and Wasserstein distances between diagrams."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import pdist, squareform

from .errors import DegenerateReferenceError, InsufficientDataError, InvalidArgument
from .timeseries import PointCloud

MAX_POINTS = 400


@dataclass(frozen=True)
class PersistenceDiagram:
    """Finite (birth, death) pairs per homology dimension."""

    h0: np.ndarray
    h1: np.ndarray

    def __post_init__(self):
        for name in ("h0", "h1"):
            a = np.asarray(getattr(self, name), dtype=np.float64).reshape(-1, 2)
            if np.any(a[:, 1] < a[:, 0]):
                raise InvalidArgument(f"{name} has a bar with death < birth")
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    def dim(self, k: int) -> np.ndarray:
        return (self.h0, self.h1)[k]

    @property
    def points(self):
        """Flat list of (birth, death, dimension) triples."""
        return [(float(b), float(d), k) for k in (0, 1) for b, d in self.dim(k)]

    def to_dict(self):
        return {"h0": self.h0.tolist(), "h1": self.h1.tolist()}

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["h0"], dtype=float), np.array(d["h1"], dtype=float))

    @classmethod
    def empty(cls):
        return cls(np.zeros((0, 2)), np.zeros((0, 2)))


def farthest_point_subsample(points, m: int, seed: int = 0) -> np.ndarray:
    """Indices of a greedy farthest-point sample of size m, seeded start."""
    pts = np.asarray(points, dtype=np.float64)
    n = len(pts)
    if m >= n:
        return np.arange(n)
    chosen = np.empty(m, dtype=np.int64)
    chosen[0] = np.random.default_rng(seed).integers(n)
    dist = np.sqrt(np.sum((pts - pts[chosen[0]]) ** 2, axis=1))
    for t in range(1, m):
        chosen[t] = int(np.argmax(dist))
        dist = np.minimum(dist, np.sqrt(np.sum((pts - pts[chosen[t]]) ** 2, axis=1)))
    return np.sort(chosen)


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, a):
        p = self.parent
        while p[a] != a:
            p[a] = p[p[a]]
            a = p[a]
        return a

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[max(ra, rb)] = min(ra, rb)
        return True


def rips_persistence(cloud, max_homology_dim: int = 1, max_radius: float | None = None,
                     max_points: int = MAX_POINTS, seed: int = 0) -> PersistenceDiagram:
    """H0 and H1 bars of the Rips filtration of a point cloud.

    Clouds above ``max_points`` are reduced by seeded farthest-point sampling.
    Essential classes die at ``max_radius`` (default: the cloud diameter).
    Zero-length bars are dropped.
    """
    pts = cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    if len(pts) < 3:
        raise InsufficientDataError(f"Rips persistence needs at least 3 points, got {len(pts)}")
    if max_homology_dim not in (0, 1):
        raise InvalidArgument("max_homology_dim must be 0 or 1")
    if len(pts) > max_points:
        pts = pts[farthest_point_subsample(pts, max_points, seed)]
    n = len(pts)
    dmat = squareform(pdist(pts))
    diameter = float(dmat.max())
    if max_radius is None:
        max_radius = diameter
    # beyond the enclosing radius the complex is a cone: no H1 is born or survives
    threshold = min(max_radius, float(dmat.max(axis=1).min()))

    iu, ju = np.triu_indices(n, 1)
    lengths = dmat[iu, ju]
    order = np.argsort(lengths, kind="stable")
    keep = order[lengths[order] <= max_radius]
    ei, ej, elen = iu[keep], ju[keep], lengths[keep]
    n_edges = len(elen)

    uf = _UnionFind(n)
    h0, merge_edge = [], np.zeros(n_edges, dtype=bool)
    for e in range(n_edges):
        if uf.union(int(ei[e]), int(ej[e])):
            merge_edge[e] = True
            if elen[e] > 0:
                h0.append((0.0, float(elen[e])))
    roots = {uf.find(v) for v in range(n)}
    h0.extend((0.0, float(max_radius)) for _ in roots)
    if max_homology_dim == 0:
        return PersistenceDiagram(np.array(h0), np.zeros((0, 2)))

    rank = np.full((n, n), np.iinfo(np.int64).max, dtype=np.int64)
    rank[ei, ej] = np.arange(n_edges)
    rank[ej, ei] = np.arange(n_edges)
    verts = np.arange(n)
    n_active = int(np.searchsorted(elen, threshold, side="right"))

    def coboundary(e):
        i, j = ei[e], ej[e]
        ks = verts[(verts != i) & (verts != j)]
        rik, rjk = rank[i, ks], rank[j, ks]
        top = np.maximum(np.maximum(rik, rjk), e)
        ok = top < n_active
        top, ks, rik = top[ok], ks[ok], rik[ok]
        # a triangle is keyed by its longest edge and the vertex opposite to it
        opp = np.where(top == e, ks, np.where(top == rik, j, i))
        return np.sort(top * n + opp)

    first = _min_cofacets(ei[:n_active], ej[:n_active], rank, n, n_active)
    pivot_owner, reduced = {}, {}
    work = None  # dense indicator of the column under reduction
    h1 = []
    for e in range(n_active - 1, -1, -1):
        if merge_edge[e]:
            continue  # cleared: already paired in dimension 0
        piv = int(first[e])
        touched = piv >= 0 and piv in pivot_owner
        if touched:
            if work is None:
                work = np.zeros(n_active * n, dtype=bool)
            col = _reduce_column(work, coboundary(e), pivot_owner, reduced, coboundary)
            piv = int(col[0]) if col.size else -1
        birth = float(elen[e])
        if piv >= 0:
            pivot_owner[piv] = e
            if touched:
                reduced[e] = col
            death = float(elen[piv // n])
            if death > birth:
                h1.append((birth, death))
        elif birth < max_radius:
            h1.append((birth, float(max_radius)))
    return PersistenceDiagram(np.array(h0).reshape(-1, 2), np.array(h1).reshape(-1, 2))


def _min_cofacets(ei, ej, rank, n, n_active, chunk=512):
    """Smallest cofacet key of every edge column before reduction (-1 if none)."""
    out = np.full(len(ei), -1, dtype=np.int64)
    for lo in range(0, len(ei), chunk):
        hi = min(lo + chunk, len(ei))
        e = np.arange(lo, hi)[:, None]
        ri, rj = rank[ei[lo:hi]], rank[ej[lo:hi]]
        top = np.maximum(np.maximum(ri, rj), e)
        ok = top < n_active
        opp = np.where(top == e, np.arange(n)[None, :], np.where(top == ri, ej[lo:hi, None], ei[lo:hi, None]))
        key = np.where(ok, np.where(ok, top, 0) * n + opp, np.iinfo(np.int64).max)
        best = key.min(axis=1)
        out[lo:hi] = np.where(best == np.iinfo(np.int64).max, -1, best)
    return out


def _reduce_column(work, col, pivot_owner, reduced, coboundary):
    """Add earlier columns to ``col`` until its pivot (smallest key) is unowned.

    The running sum lives in the boolean array ``work`` so each addition costs
    the size of the added column; pivots only increase, so the next one is
    found by a forward scan. ``work`` is left all False.
    """
    work[col] = True
    piv, hi = int(col[0]), int(col[-1])
    while True:
        owner = pivot_owner.get(piv)
        if owner is None:
            break
        other = reduced[owner] if owner in reduced else coboundary(owner)
        work[other] ^= True
        hi = max(hi, int(other[-1]))
        nxt = piv + 1 + int(np.argmax(work[piv + 1:hi + 1])) if hi > piv else piv
        if not work[nxt]:
            return col[:0]
        piv = nxt
    out = piv + np.flatnonzero(work[piv:hi + 1])
    work[piv:hi + 1] = False
    return out


def _diagonal_cost(bars):
    return (bars[:, 1] - bars[:, 0]) / np.sqrt(2.0)


def wasserstein_dim(a, b) -> float:
    """Order-1 Wasserstein distance between two sets of bars (Euclidean ground metric)."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 2)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 2)
    m, k = len(a), len(b)
    if m == 0 and k == 0:
        return 0.0
    if m == 0:
        return float(_diagonal_cost(b).sum())
    if k == 0:
        return float(_diagonal_cost(a).sum())
    cost = np.full((m + k, k + m), np.inf)
    cost[:m, :k] = np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2))
    cost[:m, k:][np.diag_indices(m)] = _diagonal_cost(a)
    cost[m:, :k][np.diag_indices(k)] = _diagonal_cost(b)
    cost[m:, k:] = 0.0
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].sum())


def wasserstein(diag_a: PersistenceDiagram, diag_b: PersistenceDiagram) -> float:
    """Sum over H0 and H1 of the per-dimension matching distances."""
    return wasserstein_dim(diag_a.h0, diag_b.h0) + wasserstein_dim(diag_a.h1, diag_b.h1)


def _normalized(points):
    p = np.asarray(points, dtype=np.float64)
    p = p - p.mean(axis=0)
    rms = np.sqrt(np.mean(np.sum(p * p, axis=1)))
    return p, rms


def s_homol(Y, Yhat, max_points: int = MAX_POINTS, seed: int = 0, details: bool = False):
    """1 - W(P_Y, P_Yhat) / W(P_Y, empty), each cloud scaled to unit RMS radius."""
    y, ry = _normalized(Y.points if isinstance(Y, PointCloud) else Y)
    yh, rh = _normalized(Yhat.points if isinstance(Yhat, PointCloud) else Yhat)
    if ry == 0:
        raise DegenerateReferenceError("reference cloud has no spread")
    y = y / ry
    yh = yh / rh if rh > 0 else yh
    py = rips_persistence(y, max_points=max_points, seed=seed)
    ph = rips_persistence(yh, max_points=max_points, seed=seed)
    denom = wasserstein(py, PersistenceDiagram.empty())
    if denom == 0:
        raise DegenerateReferenceError("reference diagram has no features")
    score = 1.0 - wasserstein(py, ph) / denom
    if details:
        return score, {"truth_bars": [len(py.h0), len(py.h1)], "embed_bars": [len(ph.h0), len(ph.h1)],
                       "null_distance": denom}
    return score
