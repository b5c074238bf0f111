import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from topoforge import (
    Ball,
    Box,
    Cylinder,
    Scale,
    SolidTorus,
    Subtraction,
    Translate,
    Union,
    eval_sdf,
    normalize_scene,
    rasterize,
    sample_surface,
)
from topoforge.field import PRESETS, random_csg, scene_from_text, scene_to_text
from topoforge.grid import occupancy

finite_coord = st.floats(-1.0, 1.0, allow_nan=False)
point = st.tuples(finite_coord, finite_coord, finite_coord)


def test_ball_center_depth():
    assert eval_sdf(Ball((0, 0, 0), 0.3), (0, 0, 0)) == pytest.approx(-0.3)


def test_torus_center_value():
    torus = SolidTorus((0, 0, 0), (0, 0, 1), 0.25, 0.1)
    assert eval_sdf(torus, (0, 0, 0)) == pytest.approx(0.15)
    # on the tube core circle the field attains -r
    assert eval_sdf(torus, (0.25, 0, 0)) == pytest.approx(-0.1)


def test_union_is_min():
    a, b = Ball((0, 0, 0), 0.2), Ball((0.5, 0, 0), 0.1)
    p = (0.2, 0.1, -0.3)
    assert eval_sdf(Union(a, b), p) == pytest.approx(min(eval_sdf(a, p), eval_sdf(b, p)))


@given(point)
@settings(max_examples=50, deadline=None)
def test_csg_bounds_property(p):
    a = Ball((0.1, 0, 0), 0.25)
    b = Box((0, 0.1, 0), (0.2, 0.15, 0.3))
    da, db = eval_sdf(a, p), eval_sdf(b, p)
    assert eval_sdf(Union(a, b), p) <= min(da, db) + 1e-12
    from topoforge import Intersection

    assert eval_sdf(Intersection(a, b), p) >= max(da, db) - 1e-12


def test_rasterize_corner_values():
    g = rasterize(Ball((0, 0, 0), 0.5), (2, 2, 2), ((0, 0, 0), (1, 1, 1)))
    assert g.values[0, 0, 0] == pytest.approx(-0.5)
    assert g.values[1, 1, 1] == pytest.approx(math.sqrt(3) - 0.5)


def test_rasterize_full_inside():
    g = rasterize(Ball((0, 0, 0), 5.0), (8, 8, 8))
    assert np.all(g.values < 0)


def test_torus_raster_min():
    torus, _ = PRESETS["torus"]
    g = rasterize(torus, (64, 64, 64))
    spacing = float(g.spacing.max())
    assert abs(g.values.min() - (-0.1)) < spacing


def test_scale_homogeneity():
    scene = PRESETS["holed-box"][0]
    lam = 1.7
    base = rasterize(scene, (9, 9, 9))
    scaled = rasterize(
        Scale(scene, lam), (9, 9, 9),
        ((-0.5 * lam,) * 3, (0.5 * lam,) * 3),
    )
    assert np.allclose(scaled.values, lam * base.values, atol=1e-6)


def test_occupancy_values_and_fraction():
    g = rasterize(Ball((0, 0, 0), 0.3), (64, 64, 64))
    occ = occupancy(g)
    assert set(np.unique(occ.values)) <= {0.0, 1.0}
    frac = occ.values.mean()
    assert frac == pytest.approx(4 / 3 * math.pi * 0.3**3, abs=0.005)


def test_occupancy_idempotent():
    g = rasterize(PRESETS["shell"][0], (16, 16, 16))
    once = occupancy(g)
    assert np.array_equal(occupancy(once).values, once.values)


def test_occupancy_constant_grids():
    from topoforge import VolumeGrid

    neg = VolumeGrid((2, 2, 2), values=np.full((2, 2, 2), -1.0))
    pos = VolumeGrid((2, 2, 2), values=np.full((2, 2, 2), 1.0))
    assert np.all(occupancy(neg).values == 1.0)
    assert np.all(occupancy(pos).values == 0.0)


class TestNormalize:
    def test_tight_ball_unchanged(self):
        scene = Ball((0, 0, 0), 0.4)
        assert normalize_scene(scene) is scene

    def test_big_ball_scaled(self):
        out = normalize_scene(Ball((0, 0, 0), 0.8))
        assert eval_sdf(out, (0, 0, 0)) == pytest.approx(-0.4)
        assert eval_sdf(out, (0.4, 0, 0)) == pytest.approx(0.0, abs=1e-12)

    def test_offset_ball_recentred(self):
        out = normalize_scene(Ball((0.3, 0, 0), 0.1))
        assert eval_sdf(out, (0, 0, 0)) == pytest.approx(-0.4)
        assert eval_sdf(out, (0.4, 0, 0)) == pytest.approx(0.0, abs=1e-12)

    def test_idempotent(self):
        scene = Union(Ball((0.1, 0.05, 0), 0.2), Box((-0.1, 0, 0.1), (0.1, 0.2, 0.05)))
        once = normalize_scene(scene)
        twice = normalize_scene(once)
        g1 = rasterize(once, (12, 12, 12))
        g2 = rasterize(twice, (12, 12, 12))
        assert np.allclose(g1.values, g2.values, atol=1e-6)

    def test_empty_shape_errors(self):
        a = Ball((0, 0, 0), 0.2)
        with pytest.raises(ValueError, match="empty shape"):
            normalize_scene(Subtraction(a, Ball((0, 0, 0), 0.5)))


class TestSampleSurface:
    def test_ball_radius(self):
        pts = sample_surface(Ball((0, 0, 0), 0.3), 100, seed=5)
        r = np.linalg.norm(pts, axis=1)
        assert np.all(np.abs(r - 0.3) <= 1e-4 + 1e-9)

    def test_deterministic(self):
        a = sample_surface(PRESETS["torus"][0], 64, seed=11)
        b = sample_surface(PRESETS["torus"][0], 64, seed=11)
        assert np.array_equal(a, b)

    def test_torus_mean_axis_distance(self):
        # oracle: area-uniform points on the analytic torus surface
        rng = np.random.default_rng(0)
        R, r = 0.25, 0.1
        n = 10_000
        u = rng.uniform(0, 2 * np.pi, 8 * n)
        v = rng.uniform(0, 2 * np.pi, 8 * n)
        keep = rng.uniform(0, 1, 8 * n) < (R + r * np.cos(v)) / (R + r)
        rho_oracle = (R + r * np.cos(v[keep]))[:n].mean()

        pts = sample_surface(PRESETS["torus"][0], n, seed=3)
        rho = np.hypot(pts[:, 0], pts[:, 1]).mean()
        assert rho == pytest.approx(rho_oracle, abs=0.02)

    def test_no_surface_found(self):
        # ball far outside its reported bounding box padding cannot fail,
        # so use an impossible tolerance instead
        with pytest.raises(ValueError, match="no surface found"):
            sample_surface(Ball((0, 0, 0), 0.3), 10, seed=0, tol=1e-16, max_iter=1)


def test_scene_text_roundtrip():
    scene = PRESETS["double-torus"][0]
    text = scene_to_text(scene)
    back = scene_from_text(text)
    pts = np.random.default_rng(2).uniform(-0.5, 0.5, (50, 3))
    assert np.allclose(scene.sdf(pts), back.sdf(pts))


def test_random_csg_deterministic():
    a, b = random_csg(10, seed=7), random_csg(10, seed=7)
    assert scene_to_text(a) == scene_to_text(b)


def test_primitive_validation():
    with pytest.raises(ValueError):
        Ball((0, 0, 0), -1.0)
    with pytest.raises(ValueError):
        Cylinder((0, 0, 0), (0, 0, 1), 0.1, 0.0)
    with pytest.raises(ValueError):
        SolidTorus((0, 0, 0), (0, 0, 1), 0.0, 0.1)


def test_translate_rotate_scale_exact():
    base = Box((0, 0, 0), (0.2, 0.1, 0.3))
    moved = Translate(base, (0.1, -0.2, 0.05))
    p = np.array([0.3, 0.1, -0.2])
    assert eval_sdf(moved, p) == pytest.approx(eval_sdf(base, p - np.array([0.1, -0.2, 0.05])))
    scaled = Scale(base, 2.0)
    assert eval_sdf(scaled, p) == pytest.approx(2 * eval_sdf(base, p / 2))
