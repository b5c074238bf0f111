import math

import numpy as np
import pytest

from topoforge import latentnet as ln


def rand_points(rng, n):
    return rng.uniform(-0.5, 0.5, (n, 3))


# ------------------------------------------------------------ positional embed

def test_pe_deterministic(params, rng):
    p = rand_points(rng, 1)
    two = np.vstack([p, p])
    out = ln.positional_embed(two, params)
    assert np.array_equal(out[0], out[1])


def test_pe_shape(params, rng):
    for n in (1, 5, 17):
        assert ln.positional_embed(rand_points(rng, n), params).shape == (n, params.C)


def test_pe_translation_identity(rng):
    # shifting by the lowest-frequency period maps the raw sinusoids to themselves
    p = rand_points(rng, 10)
    shifted = p + np.array([2 * np.pi, 0, 0])
    assert np.allclose(
        ln.positional_features(p), ln.positional_features(shifted), atol=1e-9
    )


# ------------------------------------------------------------ cross attention

def test_cross_attention_uniform_weights(params, rng):
    q = ln.positional_embed(rand_points(rng, 3), params) @ params.cross.wq
    k = np.tile(rng.normal(size=(1, params.C)), (6, 1)) @ params.cross.wk
    w = ln.attention_weights(q, k, params.C)
    assert np.allclose(w, 1.0 / 6.0)


def test_cross_attention_single_pair(params, rng):
    q = rng.normal(size=(1, params.C))
    k = rng.normal(size=(1, params.C))
    assert ln.attention_weights(q, k, params.C)[0, 0] == pytest.approx(1.0)


def test_cross_attention_row_sums(params, rng):
    q = ln.positional_embed(rand_points(rng, 4), params) @ params.cross.wq
    k = ln.positional_embed(rand_points(rng, 9), params) @ params.cross.wk
    w = ln.attention_weights(q, k, params.C)
    assert np.allclose(w.sum(axis=1), 1.0, atol=1e-9)


def test_cross_attention_encode_shape_and_guard(params, rng):
    out = ln.cross_attention_encode(rand_points(rng, 4), rand_points(rng, 16), params)
    assert out.shape == (4, params.C)
    with pytest.raises(ValueError):
        ln.cross_attention_encode(rand_points(rng, 8), rand_points(rng, 4), params)


# ------------------------------------------------------------ downsample

def test_downsample_permutation(rng):
    pts = rand_points(rng, 12)
    out = ln.downsample(pts, 12, seed=3)
    assert sorted(map(tuple, out)) == sorted(map(tuple, pts))


def test_downsample_single(rng):
    pts = rand_points(rng, 9)
    out = ln.downsample(pts, 1, seed=5)
    start = int(np.random.default_rng(5).integers(9))
    assert np.array_equal(out[0], pts[start])


def test_downsample_cube_opposite_corner():
    corners = np.array(
        [[x, y, z] for x in (0, 1) for y in (0, 1) for z in (0, 1)], float
    )
    for seed in range(10):
        out = ln.downsample(corners, 2, seed=seed)
        assert np.allclose(out[0] + out[1], [1, 1, 1])  # antipodal pair


def test_downsample_guard(rng):
    with pytest.raises(ValueError):
        ln.downsample(rand_points(rng, 3), 4, seed=0)


def test_downsample_deterministic(rng):
    pts = rand_points(rng, 30)
    assert np.array_equal(ln.downsample(pts, 7, 11), ln.downsample(pts, 7, 11))


# ------------------------------------------------------------ bottleneck / KL

def test_kl_bottleneck_reproducible(params, rng):
    F = rng.normal(size=(8, params.C))
    a = ln.kl_bottleneck(F, params, seed=42)
    b = ln.kl_bottleneck(F, params, seed=42)
    for x, y in zip(a, b):
        assert np.array_equal(x, y)


def test_kl_bottleneck_floor_sigma(params, rng):
    F = rng.normal(size=(4, params.C)) * 1e6  # drives logvar into the clamp
    z, mu, logvar = ln.kl_bottleneck(F, params, seed=0)
    floor = logvar == ln.LOGVAR_MIN
    assert np.any(floor)
    assert np.allclose(z[floor], mu[floor], atol=1e-5 * np.abs(mu[floor]).max())


def test_kl_bottleneck_substitution():
    # z = mu + exp(logvar/2) * eps with mu=0, logvar=0, eps=1 gives all-ones
    eps = np.ones((2, 3))
    z = 0.0 + np.exp(0.5 * 0.0) * eps
    assert np.all(z == 1.0)


def test_kl_loss_examples():
    assert ln.kl_loss(np.zeros((2, 3)), np.zeros((2, 3))) == pytest.approx(0.5)
    assert ln.kl_loss(np.ones((2, 3)), np.zeros((2, 3))) == pytest.approx(1.0)
    assert ln.kl_loss(np.zeros((2, 3)), np.ones((2, 3))) == pytest.approx(
        0.5 * (math.e - 1)
    )


def test_kl_loss_shape_guard():
    with pytest.raises(ValueError):
        ln.kl_loss(np.zeros((2, 3)), np.zeros((3, 2)))


def test_kl_grad_finite_difference(rng):
    mu = rng.normal(size=(3, 4))
    logvar = rng.normal(size=(3, 4))
    gmu, glv = ln.kl_loss_grad(mu, logvar)
    h = 1e-6
    for idx in [(0, 0), (1, 2), (2, 3)]:
        for arr, grad in ((mu, gmu), (logvar, glv)):
            up, dn = arr.copy(), arr.copy()
            up[idx] += h
            dn[idx] -= h
            args_up = (up, logvar) if arr is mu else (mu, up)
            args_dn = (dn, logvar) if arr is mu else (mu, dn)
            fd = (ln.kl_loss(*args_up) - ln.kl_loss(*args_dn)) / (2 * h)
            assert grad[idx] == pytest.approx(fd, abs=1e-6)


# ------------------------------------------------------------ self-attention

def test_self_attention_l0_error(params, rng):
    with pytest.raises(ValueError):
        ln.self_attention_stack(rng.normal(size=(4, params.C)), params, L=0)


def test_self_attention_single_row(params, rng):
    x = rng.normal(size=(1, params.C))
    out = ln.self_attention_stack(x, params, L=1)
    lay = params.self_layers[0]
    expect = x + (x @ lay.wv) @ lay.wo  # attention weight is exactly 1
    assert np.allclose(out, expect, atol=1e-12)


def test_self_attention_permutation_equivariance(params, rng):
    x = rng.normal(size=(6, params.C))
    perm = np.random.default_rng(0).permutation(6)
    a = ln.self_attention_stack(x, params)[perm]
    b = ln.self_attention_stack(x[perm], params)
    assert np.allclose(a, b, atol=1e-9)


# ------------------------------------------------------------ query / occupancy

def test_query_single_latent(params, rng):
    f = rng.normal(size=(1, params.C))
    out = ln.query_interpolate(rng.uniform(-0.4, 0.4, 3), f, params)
    assert np.allclose(out, (f @ params.cross.wv).ravel(), atol=1e-12)


def test_query_identical_latents(params, rng):
    f = np.tile(rng.normal(size=(1, params.C)), (5, 1))
    out = ln.query_interpolate(rng.uniform(-0.4, 0.4, 3), f, params)
    assert np.allclose(out, (f[0] @ params.cross.wv), atol=1e-9)


def test_query_weights_normalized(params, rng):
    f = rng.normal(size=(7, params.C))
    w = ln.query_weights(rng.uniform(-0.4, 0.4, 3), f, params)
    assert w.sum() == pytest.approx(1.0, abs=1e-12)
    manual = ln.query_interpolate(np.zeros(3), f, params)
    w0 = ln.query_weights(np.zeros(3), f, params)
    assert np.allclose(manual, w0 @ (f @ params.cross.wv), atol=1e-12)


def test_query_convexity_segment(params, rng):
    # with two latents the attention-weighted value lies on the segment
    f = rng.normal(size=(2, params.C))
    vals = f @ params.cross.wv
    out = ln.query_interpolate(rng.uniform(-0.4, 0.4, 3), f, params)
    w = ln.query_weights(rng.uniform(-0.4, 0.4, 3), f, params)
    assert 0 <= w[0] <= 1
    combo = w[0] * vals[0] + w[1] * vals[1]
    # recompute with matching query point
    x = np.array([0.1, -0.2, 0.3])
    w = ln.query_weights(x, f, params)
    assert np.allclose(
        ln.query_interpolate(x, f, params), w[0] * vals[0] + w[1] * vals[1], atol=1e-12
    )


def test_occupancy_head_zero_params(params):
    p = ln.KernelParams(**{**params.__dict__, "occ_w": np.zeros(params.C), "occ_b": 0.0})
    assert ln.occupancy_head(np.ones(params.C), p) == pytest.approx(0.5)


def test_occupancy_head_saturation_and_monotone(params, rng):
    f = rng.normal(size=params.C)
    p_hi = ln.KernelParams(**{**params.__dict__, "occ_b": params.occ_b + 20.0})
    assert ln.occupancy_head(f, p_hi) > ln.occupancy_head(f, params)
    p_sat = ln.KernelParams(**{**params.__dict__, "occ_w": np.zeros(params.C), "occ_b": 20.0})
    assert ln.occupancy_head(f, p_sat) > 0.999999


# ------------------------------------------------------------ BCE

def test_bce_examples():
    loss, _ = ln.bce_loss(np.ones(4), np.ones(4))
    assert loss <= 1.1e-7
    loss, _ = ln.bce_loss(np.ones(1), np.full(1, 0.5))
    assert loss == pytest.approx(math.log(2))


def test_bce_grad_finite_difference(rng):
    o = (rng.uniform(size=20) > 0.5).astype(float)
    o_hat = rng.uniform(0.05, 0.95, 20)
    _, grad = ln.bce_loss(o, o_hat)
    h = 1e-5
    for i in range(20):
        up, dn = o_hat.copy(), o_hat.copy()
        up[i] += h
        dn[i] -= h
        fd = (ln.bce_loss(o, up)[0] - ln.bce_loss(o, dn)[0]) / (2 * h)
        assert abs(grad[i] - fd) < 1e-6


# ------------------------------------------------------------ conditions

def test_betti_embed(params):
    a = ln.betti_embed(2, params)
    b = ln.betti_embed(2, params)
    assert np.array_equal(a.values, b.values)
    assert a.kind == "betti" and a.values.shape == (256,)
    assert not np.array_equal(ln.betti_embed(0, params).values, ln.betti_embed(1, params).values)
    with pytest.raises(ValueError, match="unsupported Betti number"):
        ln.betti_embed(5, params)


def test_topo_encode_permutation_invariance(params, rng):
    pts = np.zeros((16, 2))
    padded = np.ones(16, bool)
    pts[:6] = rng.normal(size=(6, 2))
    padded[:6] = False
    base = ln.topo_encode(pts, padded, params)
    perm = np.random.default_rng(1).permutation(6)
    pts2, padded2 = pts.copy(), padded.copy()
    pts2[:6] = pts[:6][perm]
    other = ln.topo_encode(pts2, padded2, params)
    assert np.allclose(base.values, other.values, atol=1e-9)


def test_topo_encode_ignores_pad_values(params, rng):
    pts = np.zeros((16, 2))
    padded = np.ones(16, bool)
    pts[:3] = rng.normal(size=(3, 2))
    padded[:3] = False
    base = ln.topo_encode(pts, padded, params)
    noisy = pts.copy()
    noisy[3:] = rng.normal(size=(13, 2))
    assert np.array_equal(base.values, ln.topo_encode(noisy, padded, params).values)


def test_topo_encode_all_padded(params):
    padded = np.ones(16, bool)
    a = ln.topo_encode(np.zeros((16, 2)), padded, params)
    b = ln.topo_encode(np.ones((16, 2)), padded, params)
    assert np.array_equal(a.values, b.values)
    assert np.array_equal(a.values, params.topo_head_b)


def test_topo_encode_shape(params, rng):
    out = ln.topo_encode(rng.normal(size=(16, 2)), np.zeros(16, bool), params)
    assert out.values.shape == (256,) and out.kind == "pd"
    with pytest.raises(ValueError):
        ln.topo_encode(rng.normal(size=(8, 2)), np.zeros(8, bool), params)


def test_concat_conditions(params):
    c = ln.betti_embed(1, params)
    single = ln.concat_conditions([c])
    assert single.values.shape == (256,) and np.array_equal(single.values, c.values)
    d = ln.ConditionVector(np.arange(256, dtype=float), "external")
    both = ln.concat_conditions([c, d])
    assert both.values.shape == (512,)
    assert np.array_equal(both.values[:256], c.values)
    swapped = ln.concat_conditions([d, c])
    assert np.array_equal(np.sort(both.values), np.sort(swapped.values))
    with pytest.raises(ValueError):
        ln.concat_conditions([])


# ------------------------------------------------------------ EDM

def test_edm_loss_oracle_zero(rng):
    z = rng.normal(size=(8, 32))
    for seed in range(5):
        loss = ln.edm_loss(z, 0.7, seed, lambda x, s, c: z)
        assert loss == 0.0


def test_edm_loss_identity_matches_noise_norms(rng):
    z = rng.normal(size=(6, 32))
    sigma, seed = 0.9, 17
    loss = ln.edm_loss(z, sigma, seed, lambda x, s, c: x)
    noise = np.random.default_rng(seed).normal(0, sigma, z.shape)
    assert loss == pytest.approx(np.linalg.norm(noise, axis=1).mean())


def test_edm_loss_chi_mean(rng):
    # identity denoiser: expected loss = sigma * E|chi_32| = sigma*sqrt(2)*G(16.5)/G(16)
    sigma = 0.4
    expected = sigma * math.sqrt(2) * math.gamma(16.5) / math.gamma(16)
    z = np.zeros((1, 32))
    vals = [ln.edm_loss(z, sigma, s, lambda x, _s, c: x) for s in range(10_000)]
    assert np.mean(vals) == pytest.approx(expected, rel=0.02)


def test_edm_loss_sigma_guard(rng):
    with pytest.raises(ValueError):
        ln.edm_loss(rng.normal(size=(2, 32)), -1.0, 0, lambda x, s, c: x)


def test_edm_sample_fixed_point():
    out = ln.edm_sample(lambda x, s, c: x, None, (4, 32), steps=16, seed=9)
    init = np.random.default_rng(9).standard_normal((4, 32)) * ln.edm_sigma_schedule(16, 0.01, 10.0)[0]
    assert np.allclose(out, init, atol=1e-9)


def test_edm_sample_gaussian_moments():
    den = lambda x, s, c: x / (1.0 + s * s)
    samples = np.concatenate(
        [ln.edm_sample(den, None, (100, 32), steps=64, seed=s) for s in range(100)]
    )
    assert abs(samples.mean()) < 0.05
    assert 0.95 < samples.var(axis=0).mean() < 1.05


def test_edm_sample_step_convergence():
    den = lambda x, s, c: x / (1.0 + s * s)
    a = ln.edm_sample(den, None, (32, 32), steps=64, seed=4)
    b = ln.edm_sample(den, None, (32, 32), steps=128, seed=4)
    rms = np.sqrt(np.mean((a - b) ** 2))
    assert rms < 1e-3


def test_edm_sample_guard():
    with pytest.raises(ValueError):
        ln.edm_sample(lambda x, s, c: x, None, (2, 32), steps=0)


# ------------------------------------------------------------ persistence

def test_save_load_roundtrip(params, tmp_path, rng):
    d1 = tmp_path / "p1"
    ln.save_params(d1, params)
    loaded = ln.load_params(d1)
    # storage is f32, so loaded params match to single precision
    assert np.allclose(loaded.pe_proj, params.pe_proj, atol=1e-6)
    assert loaded.C == params.C and loaded.L == params.L
    # a second save of the loaded params is byte-identical (f32 fixed point)
    d2 = tmp_path / "p2"
    ln.save_params(d2, loaded)
    for f in sorted(p.name for p in d1.iterdir()):
        if f.endswith(".vgrd"):
            assert (d1 / f).read_bytes() == (d2 / f).read_bytes()
    # loaded params drive the kernels identically to f32 precision
    pts = rand_points(rng, 5)
    assert np.allclose(
        ln.positional_embed(pts, loaded), ln.positional_embed(pts, params), atol=1e-4
    )
