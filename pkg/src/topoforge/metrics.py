"""Generative-evaluation metrics: Chamfer/EMD, 1-NNA, coverage, and the
Frechet distance on caller-supplied feature statistics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

EMD_GUARD = 1024
N_VIEWS = 20


def _pts(x) -> np.ndarray:
    arr = np.asarray(x, float).reshape(-1, 3)
    if arr.size == 0:
        raise ValueError("empty point set")
    if not np.all(np.isfinite(arr)):
        raise ValueError("non-finite point set")
    return arr


def chamfer(a, b, root: bool = False) -> float:
    """Symmetric Chamfer distance, squared Euclidean by default."""
    a, b = _pts(a), _pts(b)
    d = cdist(a, b)
    if not root:
        d = d**2
    return float(d.min(axis=1).mean() + d.min(axis=0).mean())


def emd(a, b) -> float:
    """Exact earth mover's distance: optimal assignment cost / n."""
    a, b = _pts(a), _pts(b)
    if len(a) != len(b):
        raise ValueError("EMD needs equally sized sets")
    if len(a) > EMD_GUARD:
        raise ValueError("EMD guard exceeded (> %d points)" % EMD_GUARD)
    cost = cdist(a, b)
    ri, ci = linear_sum_assignment(cost)
    return float(cost[ri, ci].sum() / len(a))


def _shape_distance_matrix(shapes_a, shapes_b, dist: str) -> np.ndarray:
    if dist == "cd":
        pts_b = np.concatenate([_pts(s) for s in shapes_b])
        sizes = [len(_pts(s)) for s in shapes_b]
        offsets = np.cumsum([0] + sizes)
        out = np.empty((len(shapes_a), len(shapes_b)))
        for i, sa in enumerate(shapes_a):
            d2 = cdist(_pts(sa), pts_b) ** 2
            for j in range(len(shapes_b)):
                block = d2[:, offsets[j]:offsets[j + 1]]
                out[i, j] = block.min(axis=1).mean() + block.min(axis=0).mean()
        return out
    if dist == "emd":
        out = np.empty((len(shapes_a), len(shapes_b)))
        for i, sa in enumerate(shapes_a):
            for j, sb in enumerate(shapes_b):
                out[i, j] = emd(sa, sb)
        return out
    raise ValueError("dist must be 'cd' or 'emd'")


def one_nna(s_g, s_r, dist: str = "cd") -> float:
    """Leave-one-out 1-NN classification accuracy between the two shape sets.

    0.5 means the sets are statistically indistinguishable. Distance ties go
    to the lower index in the concatenated (generated then reference) order.
    """
    s_g, s_r = list(s_g), list(s_r)
    if len(s_g) < 2 or len(s_r) < 2:
        raise ValueError("need at least 2 shapes per set")
    allshapes = s_g + s_r
    d = _shape_distance_matrix(allshapes, allshapes, dist)
    np.fill_diagonal(d, np.inf)
    nn = np.argmin(d, axis=1)  # argmin takes the lowest index on ties
    n_g = len(s_g)
    correct = int(np.sum(nn[:n_g] < n_g)) + int(np.sum(nn[n_g:] >= n_g))
    return correct / len(allshapes)


def coverage(s_g, s_r, dist: str = "cd") -> float:
    """Fraction of reference shapes that are the nearest reference of some
    generated shape."""
    s_g, s_r = list(s_g), list(s_r)
    if not s_g or not s_r:
        raise ValueError("empty shape set")
    d = _shape_distance_matrix(s_g, s_r, dist)
    matched = np.unique(np.argmin(d, axis=1))
    return len(matched) / len(s_r)


@dataclass(frozen=True)
class FeatureStats:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mean, float).ravel()
        sig = np.asarray(self.cov, float)
        if sig.shape != (mu.size, mu.size):
            raise ValueError("covariance shape mismatch")
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(sig))):
            raise ValueError("non-finite statistics")
        if np.max(np.abs(sig - sig.T)) > 1e-9:
            raise ValueError("covariance not symmetric")
        object.__setattr__(self, "mean", mu)
        object.__setattr__(self, "cov", (sig + sig.T) / 2)

    @classmethod
    def from_features(cls, feats: np.ndarray) -> "FeatureStats":
        feats = np.asarray(feats, float)
        return cls(feats.mean(axis=0), np.cov(feats, rowvar=False))


def _psd_sqrt(mat: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(mat)
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def fid(stats_g: FeatureStats, stats_r: FeatureStats) -> float:
    """Frechet distance between Gaussian feature fits.

    Uses the similarity-transformed symmetric product for the cross term, so
    only symmetric eigendecompositions are needed; clamped at >= 0.
    """
    if stats_g.mean.size != stats_r.mean.size:
        raise ValueError("feature dimension mismatch")
    diff = stats_g.mean - stats_r.mean
    r_half = _psd_sqrt(stats_r.cov)
    inner = r_half @ stats_g.cov @ r_half
    cross = np.trace(_psd_sqrt((inner + inner.T) / 2))
    val = float(diff @ diff + np.trace(stats_g.cov) + np.trace(stats_r.cov) - 2 * cross)
    return max(val, 0.0)


def fid_multiview(view_stats, expected_views: int = N_VIEWS) -> float:
    """Mean of per-view Frechet distances over the (generated, reference) pairs."""
    view_stats = list(view_stats)
    if expected_views is not None and len(view_stats) != expected_views:
        raise ValueError("expected %d view pairs, got %d" % (expected_views, len(view_stats)))
    if not view_stats:
        raise ValueError("no views")
    return float(np.mean([fid(g, r) for g, r in view_stats]))
