"""Analytic signed distance fields: CSG scenes, rasterization, surface sampling.

Scenes are immutable expression trees over a handful of primitives. CSG uses
the standard min/max combination, which is a signed-distance bound whose zero
level set is exact, so sublevel topology at t=0 is the true solid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import VolumeGrid

Vec3 = tuple[float, float, float]


def _v(x) -> np.ndarray:
    a = np.asarray(x, float)
    if a.shape != (3,):
        raise ValueError("expected a 3-vector, got shape %s" % (a.shape,))
    return a


def _unit(x) -> np.ndarray:
    a = _v(x)
    n = np.linalg.norm(a)
    if n == 0:
        raise ValueError("zero-length axis")
    return a / n


def _frame(axis: np.ndarray) -> np.ndarray:
    """Orthonormal frame whose last row is `axis`."""
    a = _unit(axis)
    helper = np.array([1.0, 0.0, 0.0]) if abs(a[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    u = np.cross(a, helper)
    u /= np.linalg.norm(u)
    v = np.cross(a, u)
    return np.stack([u, v, a])


def _rotation_matrix(axis: np.ndarray, angle: float) -> np.ndarray:
    a = _unit(axis)
    k = np.array([[0, -a[2], a[1]], [a[2], 0, -a[0]], [-a[1], a[0], 0]])
    return np.eye(3) + math.sin(angle) * k + (1 - math.cos(angle)) * (k @ k)


class SdfScene:
    """Base class; subclasses implement sdf(points) and bounding_box()."""

    def sdf(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        """Conservative axis-aligned box containing the occupied set."""
        raise NotImplementedError


@dataclass(frozen=True)
class Ball(SdfScene):
    center: Vec3
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("radius must be positive")

    def sdf(self, pts):
        return np.linalg.norm(pts - _v(self.center), axis=-1) - self.radius

    def bounding_box(self):
        c, r = _v(self.center), self.radius
        return c - r, c + r


@dataclass(frozen=True)
class Box(SdfScene):
    center: Vec3
    half_extents: Vec3

    def __post_init__(self):
        if np.any(_v(self.half_extents) <= 0):
            raise ValueError("half-extents must be positive")

    def sdf(self, pts):
        q = np.abs(pts - _v(self.center)) - _v(self.half_extents)
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
        inside = np.minimum(np.max(q, axis=-1), 0.0)
        return outside + inside

    def bounding_box(self):
        c, h = _v(self.center), _v(self.half_extents)
        return c - h, c + h


@dataclass(frozen=True)
class SolidTorus(SdfScene):
    center: Vec3
    axis: Vec3
    ring_radius: float
    tube_radius: float

    def __post_init__(self):
        if self.ring_radius <= 0 or self.tube_radius <= 0:
            raise ValueError("torus radii must be positive")

    def sdf(self, pts):
        frame = _frame(_v(self.axis))
        local = (pts - _v(self.center)) @ frame.T
        rho = np.hypot(local[..., 0], local[..., 1])
        return np.hypot(rho - self.ring_radius, local[..., 2]) - self.tube_radius

    def bounding_box(self):
        # loose but valid: ball of radius R + r around the center
        c = _v(self.center)
        r = self.ring_radius + self.tube_radius
        return c - r, c + r


@dataclass(frozen=True)
class Cylinder(SdfScene):
    center: Vec3
    axis: Vec3
    radius: float
    half_height: float

    def __post_init__(self):
        if self.radius <= 0 or self.half_height <= 0:
            raise ValueError("cylinder radius and half-height must be positive")

    def sdf(self, pts):
        frame = _frame(_v(self.axis))
        local = (pts - _v(self.center)) @ frame.T
        rho = np.hypot(local[..., 0], local[..., 1])
        d = np.stack([rho - self.radius, np.abs(local[..., 2]) - self.half_height], axis=-1)
        outside = np.linalg.norm(np.maximum(d, 0.0), axis=-1)
        inside = np.minimum(np.max(d, axis=-1), 0.0)
        return outside + inside

    def bounding_box(self):
        c = _v(self.center)
        r = math.hypot(self.radius, self.half_height)
        return c - r, c + r


@dataclass(frozen=True)
class Union(SdfScene):
    a: SdfScene
    b: SdfScene

    def sdf(self, pts):
        return np.minimum(self.a.sdf(pts), self.b.sdf(pts))

    def bounding_box(self):
        alo, ahi = self.a.bounding_box()
        blo, bhi = self.b.bounding_box()
        return np.minimum(alo, blo), np.maximum(ahi, bhi)


@dataclass(frozen=True)
class Intersection(SdfScene):
    a: SdfScene
    b: SdfScene

    def sdf(self, pts):
        return np.maximum(self.a.sdf(pts), self.b.sdf(pts))

    def bounding_box(self):
        alo, ahi = self.a.bounding_box()
        blo, bhi = self.b.bounding_box()
        lo, hi = np.maximum(alo, blo), np.minimum(ahi, bhi)
        if np.any(lo >= hi):
            raise ValueError("empty shape")
        return lo, hi


@dataclass(frozen=True)
class Subtraction(SdfScene):
    a: SdfScene
    b: SdfScene

    def sdf(self, pts):
        return np.maximum(self.a.sdf(pts), -self.b.sdf(pts))

    def bounding_box(self):
        return self.a.bounding_box()


@dataclass(frozen=True)
class Translate(SdfScene):
    child: SdfScene
    offset: Vec3

    def sdf(self, pts):
        return self.child.sdf(pts - _v(self.offset))

    def bounding_box(self):
        lo, hi = self.child.bounding_box()
        t = _v(self.offset)
        return lo + t, hi + t


@dataclass(frozen=True)
class Rotate(SdfScene):
    """Rotation about the origin by `angle` radians around `axis`."""

    child: SdfScene
    axis: Vec3
    angle: float

    def sdf(self, pts):
        rot = _rotation_matrix(_v(self.axis), self.angle)
        return self.child.sdf(pts @ rot)  # pts @ R == R^T applied to each point

    def bounding_box(self):
        lo, hi = self.child.bounding_box()
        rot = _rotation_matrix(_v(self.axis), self.angle)
        corners = np.array(
            [[x, y, z] for x in (lo[0], hi[0]) for y in (lo[1], hi[1]) for z in (lo[2], hi[2])]
        )
        rotated = corners @ rot.T
        return rotated.min(axis=0), rotated.max(axis=0)


@dataclass(frozen=True)
class Scale(SdfScene):
    """Uniform scale about the origin; SDF scales by the same factor."""

    child: SdfScene
    factor: float

    def __post_init__(self):
        if self.factor <= 0:
            raise ValueError("scale must be positive")

    def sdf(self, pts):
        return self.factor * self.child.sdf(pts / self.factor)

    def bounding_box(self):
        lo, hi = self.child.bounding_box()
        return self.factor * lo, self.factor * hi


def eval_sdf(scene: SdfScene, p) -> float | np.ndarray:
    """Signed distance of one 3D point or an (n, 3) batch."""
    pts = np.asarray(p, float)
    if pts.shape == (3,):
        return float(scene.sdf(pts[None, :])[0])
    return scene.sdf(pts)


def rasterize(scene: SdfScene, dims, bounds=((-0.5, -0.5, -0.5), (0.5, 0.5, 0.5))) -> VolumeGrid:
    """Sample the SDF on the inclusive lattice spanning `bounds`."""
    nx, ny, nz = dims
    lo, hi = bounds
    xs = np.linspace(lo[0], hi[0], nx)
    ys = np.linspace(lo[1], hi[1], ny)
    zs = np.linspace(lo[2], hi[2], nz)
    gx, gy, gz = np.meshgrid(xs, ys, zs, indexing="ij")
    pts = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=-1)
    vals = scene.sdf(pts).reshape(nx, ny, nz)
    return VolumeGrid((nx, ny, nz), (tuple(map(float, lo)), tuple(map(float, hi))), vals)


NORM_HALF = 0.4  # target half-extent of the normalized bounding box


def normalize_scene(scene: SdfScene, target_half: float = NORM_HALF) -> SdfScene:
    """Uniformly rescale + recenter so the occupied box fits [-0.4, 0.4]^3.

    The largest axis of the (conservative) bounding box maps exactly onto the
    target range. Identity transforms are elided so already-normalized scenes
    return unchanged.
    """
    lo, hi = scene.bounding_box()
    if np.any(lo >= hi):
        raise ValueError("empty shape")
    probe = rasterize(scene, (24, 24, 24), (tuple(lo), tuple(hi)))
    if probe.values.min() > 1e-12:
        raise ValueError("empty shape")
    center = (lo + hi) / 2
    extent = float(np.max(hi - lo))
    scale = 2 * target_half / extent
    out = scene
    if np.any(center != 0):
        out = Translate(out, tuple(-center))
    if scale != 1.0:
        out = Scale(out, scale)
    return out


def _numeric_gradient(scene: SdfScene, pts: np.ndarray, h: float = 1e-5) -> np.ndarray:
    grad = np.empty_like(pts)
    for a in range(3):
        step = np.zeros(3)
        step[a] = h
        grad[:, a] = (scene.sdf(pts + step) - scene.sdf(pts - step)) / (2 * h)
    return grad


def sample_surface(
    scene: SdfScene, n: int, seed: int, tol: float = 1e-4, max_iter: int = 50
) -> np.ndarray:
    """n points with |sdf| <= tol via rejection sampling + gradient projection."""
    rng = np.random.default_rng(seed)
    lo, hi = scene.bounding_box()
    pad = 0.05 * (hi - lo)
    lo, hi = lo - pad, hi + pad
    out = []
    attempts = 0
    max_attempts = max(200 * n, 2000)
    while len(out) < n and attempts < max_attempts:
        batch = min(4 * (n - len(out)), 4096)
        attempts += batch
        pts = rng.uniform(lo, hi, size=(batch, 3))
        for _ in range(max_iter):
            d = scene.sdf(pts)
            live = np.abs(d) > tol
            if not live.any():
                break
            g = _numeric_gradient(scene, pts[live])
            gn2 = np.maximum(np.sum(g * g, axis=-1), 1e-12)
            pts[live] -= (d[live] / gn2)[:, None] * g
        d = np.abs(scene.sdf(pts))
        good = pts[d <= tol]
        out.extend(good.tolist())
    if len(out) < n:
        raise ValueError("no surface found")
    return np.asarray(out[:n])


# ---------------------------------------------------------------------------
# scene text format (s-expressions)

def _fmt_vec(v) -> str:
    return "(" + " ".join(repr(float(c)) for c in _v(v)) + ")"


def scene_to_text(scene: SdfScene) -> str:
    if isinstance(scene, Ball):
        return "(ball %s %r)" % (_fmt_vec(scene.center), float(scene.radius))
    if isinstance(scene, Box):
        return "(box %s %s)" % (_fmt_vec(scene.center), _fmt_vec(scene.half_extents))
    if isinstance(scene, SolidTorus):
        return "(torus %s %s %r %r)" % (
            _fmt_vec(scene.center), _fmt_vec(scene.axis),
            float(scene.ring_radius), float(scene.tube_radius),
        )
    if isinstance(scene, Cylinder):
        return "(cylinder %s %s %r %r)" % (
            _fmt_vec(scene.center), _fmt_vec(scene.axis),
            float(scene.radius), float(scene.half_height),
        )
    if isinstance(scene, Union):
        return "(union %s %s)" % (scene_to_text(scene.a), scene_to_text(scene.b))
    if isinstance(scene, Intersection):
        return "(intersect %s %s)" % (scene_to_text(scene.a), scene_to_text(scene.b))
    if isinstance(scene, Subtraction):
        return "(subtract %s %s)" % (scene_to_text(scene.a), scene_to_text(scene.b))
    if isinstance(scene, Translate):
        return "(translate %s %s)" % (_fmt_vec(scene.offset), scene_to_text(scene.child))
    if isinstance(scene, Rotate):
        return "(rotate %s %r %s)" % (_fmt_vec(scene.axis), float(scene.angle), scene_to_text(scene.child))
    if isinstance(scene, Scale):
        return "(scale %r %s)" % (float(scene.factor), scene_to_text(scene.child))
    raise TypeError("unknown scene node %r" % type(scene))


def _tokenize(text: str) -> list[str]:
    return text.replace("(", " ( ").replace(")", " ) ").split()


def _parse_tokens(tokens: list[str], pos: int):
    if tokens[pos] != "(":
        try:
            return float(tokens[pos]), pos + 1
        except ValueError:
            return tokens[pos], pos + 1
    pos += 1
    items = []
    while tokens[pos] != ")":
        item, pos = _parse_tokens(tokens, pos)
        items.append(item)
    return items, pos + 1


def _build(node) -> SdfScene:
    if not isinstance(node, list) or not node:
        raise ValueError("malformed scene expression")
    head, args = node[0], node[1:]
    vec = lambda x: tuple(float(c) for c in x)
    if head == "ball":
        return Ball(vec(args[0]), float(args[1]))
    if head == "box":
        return Box(vec(args[0]), vec(args[1]))
    if head == "torus":
        return SolidTorus(vec(args[0]), vec(args[1]), float(args[2]), float(args[3]))
    if head == "cylinder":
        return Cylinder(vec(args[0]), vec(args[1]), float(args[2]), float(args[3]))
    if head == "union":
        return Union(_build(args[0]), _build(args[1]))
    if head == "intersect":
        return Intersection(_build(args[0]), _build(args[1]))
    if head == "subtract":
        return Subtraction(_build(args[0]), _build(args[1]))
    if head == "translate":
        return Translate(_build(args[1]), vec(args[0]))
    if head == "rotate":
        return Rotate(_build(args[2]), vec(args[0]), float(args[1]))
    if head == "scale":
        return Scale(_build(args[1]), float(args[0]))
    raise ValueError("unknown scene operator %r" % head)


def scene_from_text(text: str) -> SdfScene:
    tokens = _tokenize(text)
    node, pos = _parse_tokens(tokens, 0)
    if pos != len(tokens):
        raise ValueError("trailing tokens in scene expression")
    return _build(node)


# ---------------------------------------------------------------------------
# presets with known ground-truth topology at t = 0

def _double_torus() -> SdfScene:
    t1 = SolidTorus((-0.2, 0, 0), (0, 0, 1), 0.12, 0.05)
    t2 = SolidTorus((0.2, 0, 0), (0, 0, 1), 0.12, 0.05)
    bridge = Box((0, 0, 0), (0.1, 0.03, 0.03))
    return Union(Union(t1, t2), bridge)


PRESETS: dict[str, tuple[SdfScene, tuple[int, int, int]]] = {
    "ball": (Ball((0, 0, 0), 0.3), (1, 0, 0)),
    "shell": (Subtraction(Ball((0, 0, 0), 0.35), Ball((0, 0, 0), 0.2)), (1, 0, 1)),
    "torus": (SolidTorus((0, 0, 0), (0, 0, 1), 0.25, 0.1), (1, 1, 0)),
    "double-torus": (_double_torus(), (1, 2, 0)),
    "two-balls": (Union(Ball((-0.25, 0, 0), 0.15), Ball((0.25, 0, 0), 0.15)), (2, 0, 0)),
    "holed-box": (
        Subtraction(Box((0, 0, 0), (0.3, 0.3, 0.15)), Cylinder((0, 0, 0), (0, 0, 1), 0.1, 0.4)),
        (1, 1, 0),
    ),
}


def random_csg(n_ops: int, seed: int) -> SdfScene:
    """Seeded random union/subtraction tree of primitives; deterministic."""
    rng = np.random.default_rng(seed)

    def prim():
        kind = rng.integers(0, 3)
        c = tuple(rng.uniform(-0.25, 0.25, 3))
        if kind == 0:
            return Ball(c, float(rng.uniform(0.08, 0.22)))
        if kind == 1:
            return Box(c, tuple(rng.uniform(0.06, 0.2, 3)))
        axis = tuple(rng.normal(size=3) + np.array([0, 0, 1e-3]))
        return SolidTorus(c, axis, float(rng.uniform(0.1, 0.2)), float(rng.uniform(0.04, 0.08)))

    scene = prim()
    for _ in range(max(0, n_ops - 1)):
        other = prim()
        scene = Union(scene, other) if rng.random() < 0.7 else Subtraction(scene, other)
    return scene
