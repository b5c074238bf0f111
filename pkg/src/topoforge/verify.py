"""Cross-module invariant suites, runnable from the CLI and from tests.

Each suite is deterministic (fixed seeds), returns a result dict, and a
failing case is serialized into the result for replay.
"""

from __future__ import annotations

import math

import numpy as np

from . import cubical, diagram, field, latentnet
from .grid import VolumeGrid


def smooth_perturbation(dims, seed: int, amplitude: float) -> np.ndarray:
    """Low-frequency random field with sup-norm exactly `amplitude`."""
    rng = np.random.default_rng(seed)
    nx, ny, nz = dims
    xs, ys, zs = np.meshgrid(
        np.linspace(0, 1, nx), np.linspace(0, 1, ny), np.linspace(0, 1, nz), indexing="ij"
    )
    out = np.zeros(dims)
    for _ in range(3):
        k = rng.uniform(-3, 3, 3)
        phase = rng.uniform(0, 2 * np.pi)
        out += np.cos(2 * np.pi * (k[0] * xs + k[1] * ys + k[2] * zs) + phase)
    peak = np.max(np.abs(out))
    return out * (amplitude / peak)


def suite_oracle(n_grids: int = 20, seed: int = 0) -> dict:
    """Fast persistence equals the naive reduction, exact pair multiset."""
    rng = np.random.default_rng(seed)
    for trial in range(n_grids):
        n = int(rng.integers(4, 9))
        vals = rng.uniform(-1, 1, (n, n, n))
        cx = cubical.build_filtration(VolumeGrid((n, n, n), values=vals))
        fast = cubical.compute_persistence(cx, include_dim3=True).canonical()
        naive = cubical.compute_persistence_naive(cx).canonical()
        if fast != naive:
            return {
                "name": "oracle",
                "passed": False,
                "detail": "mismatch at trial %d (n=%d, seed=%d)" % (trial, n, seed),
                "replay": {"seed": seed, "trial": trial, "n": n},
            }
    return {"name": "oracle", "passed": True, "detail": "%d random grids matched" % n_grids}


def suite_euler(n_scenes: int = 5, res: int = 32, seed: int = 1) -> dict:
    """Euler characteristic equals the alternating Betti sum, exactly."""
    rng = np.random.default_rng(seed)
    for trial in range(n_scenes):
        scene = field.random_csg(4, int(rng.integers(1 << 30)))
        grid = field.rasterize(scene, (res, res, res))
        cx = cubical.build_filtration(grid)
        pds = cubical.compute_persistence(cx, include_dim3=True)
        lo, hi = float(grid.values.min()), float(grid.values.max())
        for t in rng.uniform(lo, hi, 10):
            chi = cubical.euler_characteristic_at(cx, t)
            b = cubical.betti_at_full(pds, t)
            if chi != b[0] - b[1] + b[2] - b[3]:
                return {
                    "name": "euler",
                    "passed": False,
                    "detail": "chi=%d vs betti %s at t=%r (trial %d)" % (chi, b, t, trial),
                    "replay": {"seed": seed, "trial": trial, "t": float(t)},
                }
    return {"name": "euler", "passed": True,
            "detail": "%d scenes x 10 thresholds at %d^3" % (n_scenes, res)}


def _capped_finite(pds: cubical.PersistenceDiagramSet, dim: int) -> np.ndarray:
    sub = pds.select(dim)
    deaths = sub.death.copy()
    deaths[np.isinf(deaths)] = pds.value_range[1]
    keep = deaths > sub.birth  # zero-persistence pairs never affect distances
    return np.stack([sub.birth[keep], deaths[keep]], axis=-1)


def suite_stability(res: int = 24, n_perturb: int = 10, seed: int = 2) -> dict:
    """Bottleneck distance between diagrams of g and g+delta is <= sup|delta|."""
    scene, _ = field.PRESETS["torus"]
    grid = field.rasterize(scene, (res, res, res))
    base = cubical.compute_persistence(cubical.build_filtration(grid))
    for eps in (0.005, 0.01):
        for k in range(n_perturb):
            delta = smooth_perturbation(grid.dims, seed * 1000 + k, eps)
            pert_grid = VolumeGrid(grid.dims, grid.bounds, grid.values + delta)
            pert = cubical.compute_persistence(cubical.build_filtration(pert_grid))
            for dim in range(3):
                d = diagram.bottleneck_distance(
                    _capped_finite(base, dim), _capped_finite(pert, dim)
                )
                if d > eps + 1e-9:
                    return {
                        "name": "stability",
                        "passed": False,
                        "detail": "dim %d bottleneck %r > eps %r" % (dim, d, eps),
                        "replay": {"seed": seed, "k": k, "eps": eps, "dim": dim},
                    }
    return {"name": "stability", "passed": True,
            "detail": "%d perturbations x 2 amplitudes bounded" % n_perturb}


def suite_kernels(seed: int = 3) -> dict:
    params = latentnet.init_params(seed)
    rng = np.random.default_rng(seed)
    checks = []

    kl_ref = latentnet.kl_loss(np.zeros((4, 8)), np.zeros((4, 8)))
    checks.append(("kl value at mu=0 sigma=1", abs(kl_ref - 0.5) < 1e-12))

    ok = True
    for _ in range(20):
        mu = rng.normal(size=(3, 5))
        logvar = rng.normal(size=(3, 5))
        gmu, glv = latentnet.kl_loss_grad(mu, logvar)
        h = 1e-5
        for arr, grad in ((mu, gmu), (logvar, glv)):
            idx = (int(rng.integers(3)), int(rng.integers(5)))
            plus, minus = arr.copy(), arr.copy()
            plus[idx] += h
            minus[idx] -= h
            if arr is mu:
                fd = (latentnet.kl_loss(plus, logvar) - latentnet.kl_loss(minus, logvar)) / (2 * h)
            else:
                fd = (latentnet.kl_loss(mu, plus) - latentnet.kl_loss(mu, minus)) / (2 * h)
            ok &= abs(fd - grad[idx]) < 1e-6
    checks.append(("kl gradient vs finite differences", ok))

    ok = True
    for _ in range(20):
        o = rng.integers(0, 2, 16).astype(float)
        o_hat = rng.uniform(0.05, 0.95, 16)
        _, grad = latentnet.bce_loss(o, o_hat)
        h = 1e-5
        i = int(rng.integers(16))
        plus, minus = o_hat.copy(), o_hat.copy()
        plus[i] += h
        minus[i] -= h
        fd = (latentnet.bce_loss(o, plus)[0] - latentnet.bce_loss(o, minus)[0]) / (2 * h)
        ok &= abs(fd - grad[i]) < 1e-6
    checks.append(("bce gradient vs finite differences", ok))

    ok = True
    for s in range(10):
        z = np.random.default_rng(100 + s).normal(size=(8, params.C0))
        loss = latentnet.edm_loss(z, 0.5 + 0.1 * s, seed=s, denoiser=lambda x, sg, c: z)
        ok &= loss == 0.0
    checks.append(("edm loss zero under oracle denoiser", ok))

    pts = rng.normal(size=(6, 3))
    q = latentnet.positional_embed(pts[:2], params) @ params.cross.wq
    k = latentnet.positional_embed(pts, params) @ params.cross.wk
    w = latentnet.attention_weights(q, k, params.C)
    checks.append(("attention rows sum to 1", np.max(np.abs(w.sum(axis=1) - 1)) < 1e-9))

    real = rng.normal(size=(5, 2))
    real[:, 1] = np.abs(real[:, 1])
    pts16 = np.zeros((16, 2))
    pts16[:5] = real
    padded = np.arange(16) >= 5
    c1 = latentnet.topo_encode(pts16, padded, params).values
    perm = rng.permutation(5)
    pts16b = pts16.copy()
    pts16b[:5] = real[perm]
    c2 = latentnet.topo_encode(pts16b, padded, params).values
    checks.append(("topo encoder permutation invariance", np.max(np.abs(c1 - c2)) < 1e-9))

    failed = [name for name, okc in checks if not okc]
    return {
        "name": "kernels",
        "passed": not failed,
        "detail": "all %d checks passed" % len(checks) if not failed else "failed: %s" % failed,
    }


def suite_sampler(n_samples: int = 10_000, steps: int = 64, seed: int = 4) -> dict:
    """Probability-flow sampler reproduces N(0, I) under the analytic denoiser."""
    denoiser = lambda x, s, c: x / (1 + s * s)
    samples = latentnet.edm_sample(denoiser, None, (n_samples, 8), steps=steps, seed=seed)
    mean = float(np.abs(samples.mean(axis=0)).max())
    var = samples.var(axis=0)
    ok = mean < 0.05 and np.all(var > 0.95) and np.all(var < 1.05)
    return {
        "name": "sampler",
        "passed": bool(ok),
        "detail": "max|mean|=%.4f var in [%.4f, %.4f]" % (mean, var.min(), var.max()),
    }


SUITES = {
    "oracle": suite_oracle,
    "euler": suite_euler,
    "stability": suite_stability,
    "kernels": suite_kernels,
    "sampler": suite_sampler,
}


def run_suites(only=None) -> list[dict]:
    names = list(SUITES) if not only else [n for n in SUITES if n in only]
    unknown = set(only or []) - set(SUITES)
    if unknown:
        raise ValueError("unknown suites: %s" % sorted(unknown))
    return [SUITES[name]() for name in names]
