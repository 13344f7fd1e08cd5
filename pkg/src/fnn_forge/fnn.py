"""Batchwise false-nearest-neighbor fractions and the FNN activity regularizer.

Given latent activations ``h`` of shape (B, L), the regularizer measures, for
every latent prefix length, how many of each point's K nearest neighbors
turn out to be false neighbors once the next latent coordinate is added.
Units whose addition unfolds nothing are penalized through their batch
activity.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument, ShapeError

_EPS = 1e-12


def default_k(batch_size: int) -> int:
    return max(1, math.ceil(0.01 * batch_size))


@dataclass(frozen=True)
class FnnConfig:
    """Thresholds of the false-neighbor test.

    ``k=None`` resolves to ``max(1, ceil(0.01 * B))`` per batch.
    ``activity`` selects the batch activity term: ``"second_moment"`` uses
    mean(h**2) per unit, ``"mean"`` uses mean(h)**2.
    """

    r_tol: float = 10.0
    a_tol: float = 2.0
    k: int | None = None
    activity: str = "second_moment"

    def __post_init__(self):
        if not self.r_tol > 0 or not self.a_tol > 0:
            raise InvalidArgument("r_tol and a_tol must be positive")
        if self.activity not in ("second_moment", "mean"):
            raise InvalidArgument(f"unknown activity mode {self.activity!r}")
        if self.k is not None and self.k < 1:
            raise InvalidArgument(f"k must be >= 1, got {self.k}")

    def resolve_k(self, batch_size: int) -> int:
        k = default_k(batch_size) if self.k is None else self.k
        if not 1 <= k <= batch_size - 1:
            raise InvalidArgument(f"k={k} incompatible with batch size {batch_size}")
        return k


@dataclass
class FnnDiagnostics:
    f_bar: np.ndarray
    attractor_size: np.ndarray
    loss: float
    k: int = 1
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return {"f_bar": [float(v) for v in self.f_bar],
                "attractor_size": [float(v) for v in self.attractor_size],
                "loss": float(self.loss), "k": int(self.k)}

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["f_bar"]), np.array(d["attractor_size"]), d["loss"], d.get("k", 1))


def _check_batch(h):
    h = np.asarray(h, dtype=np.float64)
    if h.ndim != 2:
        raise ShapeError(f"latent batch must be 2-D, got shape {h.shape}")
    if h.shape[0] < 2 or h.shape[1] < 1:
        raise ShapeError(f"latent batch needs B >= 2 rows and L >= 1 columns, got {h.shape}")
    if not np.all(np.isfinite(h)):
        raise InvalidArgument("latent batch contains non-finite values")
    return h


def _sq_distances(h):
    """Cumulative squared distances, laid out (L, B, B)."""
    B, L = h.shape
    out = np.empty((L, B, B))
    acc = np.zeros((B, B))
    for m in range(L):
        col = h[:, m]
        diff = col[:, None] - col[None, :]
        acc = acc + diff * diff
        out[m] = acc
    return out


def dim_indexed_distances(h) -> np.ndarray:
    """D[a, b, m]: Euclidean distance between rows a and b over units 0..m."""
    h = _check_batch(h)
    return np.sqrt(_sq_distances(h)).transpose(1, 2, 0)


def _sort_keys(d_lbb):
    key = d_lbb.copy()
    idx = np.arange(key.shape[1])
    key[:, idx, idx] = -np.inf  # self always ranks first
    return key


def neighbor_sort(D) -> np.ndarray:
    """Index tensor g with g[a, :, m] ordering the batch by D[a, :, m].

    Ties go to the smaller index; the point itself is always first.
    """
    D = np.asarray(D, dtype=np.float64)
    key = _sort_keys(D.transpose(2, 0, 1))
    g = np.argsort(key, axis=2, kind="stable")
    return g.transpose(1, 2, 0)


def _nearest(key, n):
    """First ``n`` entries of a stable argsort along the last axis.

    Uses a partial partition and falls back to a full stable sort only for
    rows whose n-th value is tied with an unselected entry.
    """
    size = key.shape[-1]
    if n >= size:
        return np.argsort(key, axis=-1, kind="stable")
    part = np.argpartition(key, n - 1, axis=-1)[..., :n]
    vals = np.take_along_axis(key, part, axis=-1)
    order = np.lexsort((part, vals), axis=-1)
    idx = np.take_along_axis(part, order, axis=-1)
    cutoff = np.take_along_axis(vals, order[..., -1:], axis=-1)
    tied = np.count_nonzero(key <= cutoff, axis=-1) > n
    if np.any(tied):
        rows = np.nonzero(tied)
        idx[rows] = np.argsort(key[rows], axis=-1, kind="stable")[..., :n]
    return idx


def _fractions(h, cfg: FnnConfig):
    B, L = h.shape
    K = cfg.resolve_k(B)
    d2 = _sq_distances(h)                                   # (L, B, B)
    nbr = _nearest(_sort_keys(d2), K + 1)[..., 1:]          # (L, B, K), self dropped

    centered = h - h.mean(axis=0)
    cum_var = np.cumsum((centered ** 2).sum(axis=0)) / B    # sum over units 0..m
    size2 = cum_var / np.arange(1, L + 1)
    size = np.sqrt(size2)

    f_bar = np.ones(L)
    rows = np.arange(B)[:, None]
    for m in range(1, L):
        sorted_d2 = d2[m][rows, nbr[m]]                     # K nearest in m+1 units
        lifted_d2 = d2[m][rows, nbr[m - 1]]                 # previous neighbors, lifted
        jump = (lifted_d2 - sorted_d2) / np.maximum(sorted_d2, _EPS)
        far = np.sqrt(sorted_d2) >= cfg.a_tol * max(size[m], _EPS)
        false = (jump >= cfg.r_tol) | far
        f_bar[m] = false.mean()
    return f_bar, size, K


def _activity(h, mode):
    if mode == "mean":
        return h.mean(axis=0) ** 2
    return (h * h).mean(axis=0)


def false_neighbor_fractions(h, cfg: FnnConfig | None = None) -> FnnDiagnostics:
    """Per-unit false-neighbor fractions; entry 0 is fixed at 1."""
    cfg = cfg or FnnConfig()
    h = _check_batch(h)
    f_bar, size, K = _fractions(h, cfg)
    loss = float(np.sum((1.0 - f_bar[1:]) * _activity(h, cfg.activity)[1:]))
    return FnnDiagnostics(f_bar, size, loss, K)


def fnn_loss(h, cfg: FnnConfig | None = None) -> float:
    return false_neighbor_fractions(h, cfg).loss


def fnn_weights(f_bar) -> np.ndarray:
    """Penalty weight per unit, 1 - F_bar (zero for the first unit)."""
    w = 1.0 - np.asarray(f_bar, dtype=np.float64)
    w[0] = 0.0
    return w


def fnn_loss_grad(h, cfg: FnnConfig | None = None, f_bar=None):
    """Gradient of the loss with F_bar held constant for the batch.

    Returns ``(grad, diagnostics)``; pass ``f_bar`` to skip recomputing the
    neighbor statistics.
    """
    cfg = cfg or FnnConfig()
    h = _check_batch(h)
    diag = None
    if f_bar is None:
        diag = false_neighbor_fractions(h, cfg)
        f_bar = diag.f_bar
    w = fnn_weights(f_bar)
    B = h.shape[0]
    if cfg.activity == "mean":
        grad = np.broadcast_to(2.0 * w * h.mean(axis=0) / B, h.shape).copy()
    else:
        grad = 2.0 * w * h / B
    if diag is None:
        loss = float(np.sum(w * _activity(h, cfg.activity)))
        diag = FnnDiagnostics(np.asarray(f_bar, dtype=np.float64), np.array([]), loss)
    return grad, diag


def frozen_loss(h, f_bar, activity="second_moment") -> float:
    """Loss with externally supplied F_bar (no neighbor search)."""
    h = np.asarray(h, dtype=np.float64)
    return float(np.sum(fnn_weights(f_bar) * _activity(h, activity)))


__all__ = [
    "FnnConfig", "FnnDiagnostics", "default_k", "dim_indexed_distances", "neighbor_sort",
    "false_neighbor_fractions", "fnn_loss", "fnn_loss_grad", "fnn_weights", "frozen_loss",
]
