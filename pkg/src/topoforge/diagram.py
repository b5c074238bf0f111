"""Persistence-diagram toolkit: (birth, persistence) point sets, top-k
truncation, editing toward the diagonal, persistence images/landscapes, and
exact matching distances (bottleneck / 1-Wasserstein) used as oracles."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from .cubical import PersistenceDiagramSet

BOTTLENECK_GUARD = 256
WASSERSTEIN_GUARD = 128


@dataclass(frozen=True)
class PersistencePointSet:
    """Points (birth, persistence) of one homology dimension.

    Ordered by persistence descending, ties by ascending birth. `capped`
    flags points whose death was +inf and got capped at the grid max value;
    `padded` flags zero fill from top-k truncation.
    """

    dim: int
    points: np.ndarray  # (n, 2) columns [birth, persistence]
    capped: np.ndarray  # (n,) bool
    padded: np.ndarray  # (n,) bool

    def __post_init__(self):
        pts = np.asarray(self.points, float).reshape(-1, 2)
        if np.any(pts[:, 1] < 0):
            raise ValueError("negative persistence")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "capped", np.asarray(self.capped, bool))
        object.__setattr__(self, "padded", np.asarray(self.padded, bool))

    def __len__(self):
        return self.points.shape[0]

    def real_points(self) -> np.ndarray:
        return self.points[~self.padded]


def _canonical_sort(points, capped, padded):
    order = np.lexsort((points[:, 0], -points[:, 1]))
    return points[order], capped[order], padded[order]


def to_points(
    pds: PersistenceDiagramSet, dim: int, include_capped: bool = True
) -> PersistencePointSet:
    """Map pairs of one dimension to (birth, death - birth) points."""
    if dim not in (0, 1, 2):
        raise ValueError("dim must be 0, 1, or 2")
    sub = pds.select(dim)
    births = sub.birth
    deaths = sub.death.copy()
    capped = np.isinf(deaths)
    deaths[capped] = pds.value_range[1]
    if not include_capped:
        keep = ~capped
        births, deaths, capped = births[keep], deaths[keep], capped[keep]
    pts = np.stack([births, deaths - births], axis=-1) if births.size else np.empty((0, 2))
    padded = np.zeros(len(pts), bool)
    pts, capped, padded = _canonical_sort(pts, capped, padded)
    return PersistencePointSet(dim, pts, capped, padded)


def top_k(ps: PersistencePointSet, k: int) -> PersistencePointSet:
    """First k points by the canonical order, zero-padded up to k."""
    if k < 1:
        raise ValueError("k must be >= 1")
    n = min(k, len(ps))
    pts = np.zeros((k, 2))
    capped = np.zeros(k, bool)
    padded = np.ones(k, bool)
    pts[:n] = ps.points[:n]
    capped[:n] = ps.capped[:n]
    padded[:n] = ps.padded[:n]
    return PersistencePointSet(ps.dim, pts, capped, padded)


def edit_toward_diagonal(ps: PersistencePointSet, index: int, factor: float) -> PersistencePointSet:
    """Scale one point's persistence by (1 - factor); factor=1 lands on the diagonal."""
    if not 0 <= index < len(ps):
        raise IndexError("point index out of range")
    if not 0.0 <= factor <= 1.0:
        raise ValueError("factor must be in [0, 1]")
    pts = ps.points.copy()
    pts[index, 1] *= 1.0 - factor
    pts, capped, padded = _canonical_sort(pts, ps.capped.copy(), ps.padded.copy())
    return PersistencePointSet(ps.dim, pts, capped, padded)


def persistence_image(
    ps: PersistencePointSet,
    resolution: tuple[int, int] = (32, 32),
    range_box=None,
    sigma: float = 0.02,
    weight: str = "linear",
) -> np.ndarray:
    """Sum of Gaussians at pixel centers; returns array indexed [row=persistence, col=birth].

    weight "linear" multiplies each Gaussian by the point's persistence,
    "constant" by 1. Pad-flagged points contribute nothing.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    w, h = resolution
    if w < 1 or h < 1:
        raise ValueError("resolution must be >= 1x1")
    if weight not in ("linear", "constant"):
        raise ValueError("weight must be 'linear' or 'constant'")
    pts = ps.real_points()
    if range_box is None:
        if len(pts) == 0:
            range_box = ((0.0, 1.0), (0.0, 1.0))
        else:
            bx0, bx1 = float(pts[:, 0].min()), float(pts[:, 0].max())
            by1 = float(pts[:, 1].max())
            # keep the auto box non-degenerate for tiny diagrams
            pad = max(sigma, 1e-6)
            if bx1 - bx0 < pad:
                bx0, bx1 = bx0 - pad, bx1 + pad
            if by1 <= pad:
                by1 = pad * 2
            range_box = ((bx0, bx1), (0.0, by1))
    (bx0, bx1), (by0, by1) = range_box
    if not (bx1 > bx0 and by1 > by0):
        raise ValueError("degenerate range box")
    xs = bx0 + (np.arange(w) + 0.5) * (bx1 - bx0) / w
    ys = by0 + (np.arange(h) + 0.5) * (by1 - by0) / h
    img = np.zeros((h, w))
    norm = 1.0 / (2 * np.pi * sigma * sigma)
    for b, p in pts:
        wgt = p if weight == "linear" else 1.0
        gx = np.exp(-((xs - b) ** 2) / (2 * sigma * sigma))
        gy = np.exp(-((ys - p) ** 2) / (2 * sigma * sigma))
        img += wgt * norm * np.outer(gy, gx)
    return img


def persistence_landscape(ps: PersistencePointSet, k: int, t_grid) -> np.ndarray:
    """Landscapes λ_1..λ_k sampled on t_grid; λ_j(t) = j-th largest tent value."""
    if k < 1:
        raise ValueError("k must be >= 1")
    t = np.asarray(t_grid, float)
    pts = ps.real_points()
    if len(pts) == 0:
        return np.zeros((k, t.size))
    b = pts[:, 0][:, None]
    d = (pts[:, 0] + pts[:, 1])[:, None]
    tents = np.maximum(0.0, np.minimum(t[None, :] - b, d - t[None, :]))
    tents = np.sort(tents, axis=0)[::-1]
    out = np.zeros((k, t.size))
    out[: min(k, tents.shape[0])] = tents[: min(k, tents.shape[0])]
    return out


# ---------------------------------------------------------------------------
# matching distances on (birth, death) diagrams

def _as_bd(diagram) -> np.ndarray:
    arr = np.asarray(diagram, float).reshape(-1, 2)
    if np.any(np.isinf(arr)):
        raise ValueError("cap essential classes before computing distances")
    if np.any(arr[:, 1] < arr[:, 0]):
        raise ValueError("death < birth")
    return arr


def _inf_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.size == 0 or b.size == 0:
        return np.zeros((len(a), len(b)))
    return np.max(np.abs(a[:, None, :] - b[None, :, :]), axis=-1)


def bottleneck_distance(d1, d2) -> float:
    """Exact bottleneck distance with diagonal augmentation.

    Binary search over candidate costs; feasibility of a cost via maximum
    bipartite matching on the threshold graph.
    """
    a, b = _as_bd(d1), _as_bd(d2)
    n, m = len(a), len(b)
    if n > BOTTLENECK_GUARD or m > BOTTLENECK_GUARD:
        raise ValueError("diagram too large for exact bottleneck (> %d)" % BOTTLENECK_GUARD)
    if n == 0 and m == 0:
        return 0.0
    cross = _inf_dists(a, b)
    diag_a = (a[:, 1] - a[:, 0]) / 2 if n else np.zeros(0)
    diag_b = (b[:, 1] - b[:, 0]) / 2 if m else np.zeros(0)
    candidates = np.unique(np.concatenate([cross.ravel(), diag_a, diag_b, [0.0]]))

    def feasible(eps: float) -> bool:
        # left: a-points then m diagonal slots; right: b-points then n slots
        ii, jj = np.nonzero(cross <= eps)
        rows = [ii]
        cols = [jj]
        near_a = np.flatnonzero(diag_a <= eps)
        if near_a.size and n:
            rows.append(np.repeat(near_a, n))
            cols.append(np.tile(np.arange(m, m + n), near_a.size))
        near_b = np.flatnonzero(diag_b <= eps)
        if near_b.size:
            rows.append(near_b + n)
            cols.append(near_b)
        if m and n:
            rows.append(np.repeat(np.arange(n, n + m), n))
            cols.append(np.tile(np.arange(m, m + n), m))
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        graph = csr_matrix(
            (np.ones(len(rows), np.int8), (rows, cols)), shape=(n + m, n + m)
        )
        match = maximum_bipartite_matching(graph, perm_type="column")
        return int(np.sum(match >= 0)) == n + m

    lo, hi = 0, len(candidates) - 1
    if feasible(candidates[lo]):
        return float(candidates[lo])
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if feasible(candidates[mid]):
            hi = mid
        else:
            lo = mid
    return float(candidates[hi])


def wasserstein_distance(d1, d2) -> float:
    """Order-1 Wasserstein with inf-norm ground metric, exact via assignment."""
    a, b = _as_bd(d1), _as_bd(d2)
    n, m = len(a), len(b)
    if n > WASSERSTEIN_GUARD or m > WASSERSTEIN_GUARD:
        raise ValueError("diagram too large for exact Wasserstein (> %d)" % WASSERSTEIN_GUARD)
    if n == 0 and m == 0:
        return 0.0
    size = n + m
    cost = np.zeros((size, size))
    cost[:n, :m] = _inf_dists(a, b)
    # any diagonal slot accepts a point at its own projection cost; slot-slot is free
    for i in range(n):
        cost[i, m:] = (a[i, 1] - a[i, 0]) / 2
    for j in range(m):
        cost[n:, j] = (b[j, 1] - b[j, 0]) / 2
    ri, ci = linear_sum_assignment(cost)
    return float(cost[ri, ci].sum())


def points_to_bd(ps: PersistencePointSet) -> np.ndarray:
    """(birth, persistence) points back to (birth, death) pairs, pads dropped."""
    pts = ps.real_points()
    return np.stack([pts[:, 0], pts[:, 0] + pts[:, 1]], axis=-1) if len(pts) else np.empty((0, 2))


# ---------------------------------------------------------------------------
# text / plot exports

def write_points_tsv(path, ps: PersistencePointSet) -> None:
    lines = ["# topoforge-points v1 dim=%d" % ps.dim]
    for (b, p), c, pad in zip(ps.points, ps.capped, ps.padded):
        flags = []
        if c:
            flags.append("capped")
        if pad:
            flags.append("pad")
        lines.append("%s\t%s\t%s" % (repr(float(b)), repr(float(p)), ",".join(flags) or "-"))
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")


def read_points_tsv(path) -> PersistencePointSet:
    dim = 0
    pts, capped, padded = [], [], []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if "dim=" in line:
                    dim = int(line.split("dim=")[1].split()[0])
                continue
            b, p, flags = line.split("\t")
            pts.append((float(b), float(p)))
            capped.append("capped" in flags)
            padded.append("pad" in flags)
    return PersistencePointSet(dim, np.asarray(pts, float).reshape(-1, 2),
                               np.asarray(capped, bool), np.asarray(padded, bool))


def write_landscape_tsv(path, t_grid, levels: np.ndarray) -> None:
    header = "# topoforge-pl v1 levels=%d" % levels.shape[0]
    lines = [header]
    for i, t in enumerate(np.asarray(t_grid, float)):
        vals = "\t".join(repr(float(v)) for v in levels[:, i])
        lines.append("%s\t%s" % (repr(float(t)), vals))
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")


def diagram_svg(pairs_bd: np.ndarray, size: int = 400, margin: int = 40) -> str:
    """Minimal SVG scatter of (birth, death) pairs with the diagonal line."""
    arr = np.asarray(pairs_bd, float).reshape(-1, 2)
    finite = arr[np.all(np.isfinite(arr), axis=1)] if len(arr) else arr
    if len(finite):
        lo = float(min(finite.min(), 0.0))
        hi = float(max(finite.max(), lo + 1e-9))
    else:
        lo, hi = 0.0, 1.0
    span = hi - lo
    lo -= 0.05 * span
    hi += 0.05 * span

    def sx(v):
        return margin + (v - lo) / (hi - lo) * (size - 2 * margin)

    def sy(v):
        return size - margin - (v - lo) / (hi - lo) * (size - 2 * margin)

    parts = [
        '<svg xmlns="http://www.w3.org/2000/svg" width="%d" height="%d">' % (size, size),
        '<rect width="100%" height="100%" fill="white"/>',
        '<line x1="%.2f" y1="%.2f" x2="%.2f" y2="%.2f" stroke="gray"/>'
        % (sx(lo), sy(lo), sx(hi), sy(hi)),
    ]
    for b, d in finite:
        parts.append('<circle cx="%.2f" cy="%.2f" r="3" fill="crimson"/>' % (sx(b), sy(d)))
    parts.append("</svg>")
    return "\n".join(parts)
