"""Forward-computation and loss kernels of the latent generative stack.

Everything here is deterministic given (inputs, params, seed): parameters are
seeded pseudo-random or loaded from disk, and the kernels exist to verify the
math (attention normalization, losses and their gradients, sampler moments),
not to train anything.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .grid import read_matrix_vgrd, write_matrix_vgrd

LOGVAR_MIN, LOGVAR_MAX = -30.0, 20.0
BCE_CLAMP = 1e-7
COND_DIM = 256
BETTI_TABLE_SIZE = 5  # beta_1 in 0..4
TOPO_POINTS = 16

# desk-scale defaults; the bottleneck width 32 and condition width 256 are fixed
DEFAULT_M = 32
DEFAULT_C = 64
DEFAULT_C0 = 32
DEFAULT_L = 4
PE_FREQS = 8


def _softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = x - x.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


@dataclass(frozen=True)
class AttentionLayerParams:
    wq: np.ndarray
    wk: np.ndarray
    wv: np.ndarray
    wo: np.ndarray


@dataclass(frozen=True)
class KernelParams:
    """All projection matrices of the stack, seeded or loaded."""

    C: int
    C0: int
    L: int
    pe_proj: np.ndarray  # (6 * PE_FREQS, C)
    cross: AttentionLayerParams
    self_layers: tuple
    lift: np.ndarray  # (C0, C)
    mu_map: np.ndarray  # (C, C0)
    logvar_map: np.ndarray  # (C, C0)
    occ_w: np.ndarray  # (C,)
    occ_b: float
    betti_table: np.ndarray  # (BETTI_TABLE_SIZE, COND_DIM)
    topo_lift_w: np.ndarray  # (2, COND_DIM)
    topo_lift_b: np.ndarray  # (COND_DIM,)
    topo_attn: AttentionLayerParams  # width COND_DIM
    topo_head_w: np.ndarray  # (COND_DIM, COND_DIM)
    topo_head_b: np.ndarray  # (COND_DIM,)
    seed: int = 0


def _attn_layer(rng, width) -> AttentionLayerParams:
    s = 1.0 / np.sqrt(width)
    return AttentionLayerParams(
        rng.normal(0, s, (width, width)),
        rng.normal(0, s, (width, width)),
        rng.normal(0, s, (width, width)),
        rng.normal(0, s, (width, width)),
    )


def init_params(seed: int, C: int = DEFAULT_C, C0: int = DEFAULT_C0, L: int = DEFAULT_L) -> KernelParams:
    if C % 2:
        raise ValueError("C must be even")
    rng = np.random.default_rng(seed)
    return KernelParams(
        C=C,
        C0=C0,
        L=L,
        pe_proj=rng.normal(0, 1.0 / np.sqrt(6 * PE_FREQS), (6 * PE_FREQS, C)),
        cross=_attn_layer(rng, C),
        self_layers=tuple(_attn_layer(rng, C) for _ in range(L)),
        lift=rng.normal(0, 1.0 / np.sqrt(C0), (C0, C)),
        mu_map=rng.normal(0, 1.0 / np.sqrt(C), (C, C0)),
        logvar_map=rng.normal(0, 1.0 / np.sqrt(C), (C, C0)),
        occ_w=rng.normal(0, 1.0 / np.sqrt(C), C),
        occ_b=float(rng.normal()),
        betti_table=rng.normal(0, 1.0, (BETTI_TABLE_SIZE, COND_DIM)),
        topo_lift_w=rng.normal(0, 1.0, (2, COND_DIM)),
        topo_lift_b=rng.normal(0, 1.0, COND_DIM),
        topo_attn=_attn_layer(rng, COND_DIM),
        topo_head_w=rng.normal(0, 1.0 / np.sqrt(COND_DIM), (COND_DIM, COND_DIM)),
        topo_head_b=rng.normal(0, 1.0, COND_DIM),
        seed=seed,
    )


@dataclass(frozen=True)
class ConditionVector:
    values: np.ndarray
    kind: str  # betti | pd | external | concatenated

    def __post_init__(self):
        v = np.asarray(self.values, float).ravel()
        if not np.all(np.isfinite(v)):
            raise ValueError("non-finite condition vector")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class LatentSet:
    F: np.ndarray  # (M, C)
    z: np.ndarray  # (M, C0)
    mu: np.ndarray
    logvar: np.ndarray


def positional_embed(points: np.ndarray, params: KernelParams) -> np.ndarray:
    """Fourier features at geometric frequencies 2^k, linearly projected to C."""
    pts = np.asarray(points, float).reshape(-1, 3)
    freqs = 2.0 ** np.arange(PE_FREQS)
    phases = pts[:, :, None] * freqs[None, None, :]
    feats = np.concatenate(
        [np.sin(phases).reshape(len(pts), -1), np.cos(phases).reshape(len(pts), -1)], axis=1
    )
    return feats @ params.pe_proj


def positional_features(points: np.ndarray) -> np.ndarray:
    """The raw sinusoid features before projection (used by the translation test)."""
    pts = np.asarray(points, float).reshape(-1, 3)
    freqs = 2.0 ** np.arange(PE_FREQS)
    phases = pts[:, :, None] * freqs[None, None, :]
    return np.concatenate(
        [np.sin(phases).reshape(len(pts), -1), np.cos(phases).reshape(len(pts), -1)], axis=1
    )


def attention_weights(queries: np.ndarray, keys: np.ndarray, width: int) -> np.ndarray:
    return _softmax(queries @ keys.T / np.sqrt(width), axis=-1)


def cross_attention_encode(p_query: np.ndarray, p_source: np.ndarray, params: KernelParams) -> np.ndarray:
    """Single-head cross-attention from downsampled queries onto the full cloud."""
    q_in = positional_embed(p_query, params)
    k_in = positional_embed(p_source, params)
    if q_in.shape[0] > k_in.shape[0]:
        raise ValueError("query set larger than source set")
    lay = params.cross
    w = attention_weights(q_in @ lay.wq, k_in @ lay.wk, params.C)
    return (w @ (k_in @ lay.wv)) @ lay.wo


def downsample(points: np.ndarray, m: int, seed: int) -> np.ndarray:
    """Farthest-point sampling from a seeded start; deterministic."""
    pts = np.asarray(points, float).reshape(-1, 3)
    n = len(pts)
    if m > n:
        raise ValueError("cannot downsample %d points to %d" % (n, m))
    rng = np.random.default_rng(seed)
    chosen = [int(rng.integers(n))]
    dist = np.linalg.norm(pts - pts[chosen[0]], axis=1)
    for _ in range(m - 1):
        nxt = int(np.argmax(dist))
        chosen.append(nxt)
        dist = np.minimum(dist, np.linalg.norm(pts - pts[nxt], axis=1))
    return pts[chosen]


def kl_bottleneck(F: np.ndarray, params: KernelParams, seed: int):
    """Reparameterized bottleneck: z = mu + sigma * eps with seeded Gaussian eps."""
    mu = F @ params.mu_map
    logvar = np.clip(F @ params.logvar_map, LOGVAR_MIN, LOGVAR_MAX)
    eps = np.random.default_rng(seed).standard_normal(mu.shape)
    z = mu + np.exp(0.5 * logvar) * eps
    return z, mu, logvar


def kl_loss(mu: np.ndarray, logvar: np.ndarray) -> float:
    """Mean of 0.5 * (mu^2 + sigma^2 - log sigma^2), as the regularizer is written
    (no -1 term)."""
    mu = np.asarray(mu, float)
    logvar = np.asarray(logvar, float)
    if mu.shape != logvar.shape:
        raise ValueError("shape mismatch")
    return float(np.mean(0.5 * (mu**2 + np.exp(logvar) - logvar)))


def kl_loss_grad(mu: np.ndarray, logvar: np.ndarray):
    n = mu.size
    return mu / n, 0.5 * (np.exp(logvar) - 1.0) / n


def self_attention_stack(x: np.ndarray, params: KernelParams, L: int | None = None) -> np.ndarray:
    """L residual single-head self-attention layers (no layer norm)."""
    if L is None:
        L = params.L
    if L < 1:
        raise ValueError("L must be >= 1")
    if L > len(params.self_layers):
        raise ValueError("params hold only %d layers" % len(params.self_layers))
    out = np.asarray(x, float)
    for lay in params.self_layers[:L]:
        w = attention_weights(out @ lay.wq, out @ lay.wk, params.C)
        out = out + (w @ (out @ lay.wv)) @ lay.wo
    return out


def query_interpolate(x: np.ndarray, latents: np.ndarray, params: KernelParams) -> np.ndarray:
    """Attention-weighted latent at a query point; weights sum to 1."""
    lay = params.cross
    x_emb = positional_embed(np.asarray(x, float).reshape(1, 3), params)
    scores = (x_emb @ lay.wq) @ (latents @ lay.wk).T / np.sqrt(params.C)
    w = _softmax(scores, axis=-1)
    return (w @ (latents @ lay.wv)).ravel()


def query_weights(x: np.ndarray, latents: np.ndarray, params: KernelParams) -> np.ndarray:
    lay = params.cross
    x_emb = positional_embed(np.asarray(x, float).reshape(1, 3), params)
    scores = (x_emb @ lay.wq) @ (latents @ lay.wk).T / np.sqrt(params.C)
    return _softmax(scores, axis=-1).ravel()


def occupancy_head(f_x: np.ndarray, params: KernelParams) -> float:
    return float(_sigmoid(np.dot(params.occ_w, np.asarray(f_x, float)) + params.occ_b))


def bce_loss(o: np.ndarray, o_hat: np.ndarray):
    """Mean binary cross-entropy and its analytic gradient wrt o_hat."""
    o = np.asarray(o, float).ravel()
    o_hat = np.clip(np.asarray(o_hat, float).ravel(), BCE_CLAMP, 1.0 - BCE_CLAMP)
    n = o.size
    loss = float(-np.mean(o * np.log(o_hat) + (1 - o) * np.log(1 - o_hat)))
    grad = (o_hat - o) / (o_hat * (1 - o_hat)) / n
    return loss, grad


def betti_embed(beta1: int, params: KernelParams) -> ConditionVector:
    if not 0 <= beta1 < params.betti_table.shape[0]:
        raise ValueError("unsupported Betti number %r" % (beta1,))
    return ConditionVector(params.betti_table[beta1].copy(), "betti")


def topo_encode(points: np.ndarray, padded: np.ndarray, params: KernelParams) -> ConditionVector:
    """Transformer-style set encoder over 16 (birth, persistence) tokens.

    Pad-flagged tokens are masked out of the attention keys and the mean pool,
    so the output depends only on the unpadded points, in any order.
    """
    pts = np.asarray(points, float)
    if pts.shape != (TOPO_POINTS, 2):
        raise ValueError("expected %d x 2 points" % TOPO_POINTS)
    mask = np.asarray(padded, bool)
    tokens = pts @ params.topo_lift_w + params.topo_lift_b
    lay = params.topo_attn
    if mask.all():
        pooled = np.zeros(COND_DIM)
    else:
        real = tokens[~mask]
        scores = (real @ lay.wq) @ (real @ lay.wk).T / np.sqrt(COND_DIM)
        w = _softmax(scores, axis=-1)
        attended = real + (w @ (real @ lay.wv)) @ lay.wo
        pooled = attended.mean(axis=0)
    return ConditionVector(pooled @ params.topo_head_w + params.topo_head_b, "pd")


@dataclass(frozen=True)
class NoiseLevel:
    sigma: float

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("noise level must be positive")


def edm_loss(z: np.ndarray, sigma: float, seed: int, denoiser, cond=None, squared: bool = False) -> float:
    """Mean per-row denoising error at one noise level with seeded noise.

    The norm is the Euclidean norm per latent row (literal reading); pass
    squared=True for the squared-error variant.
    """
    NoiseLevel(sigma)
    z = np.asarray(z, float)
    noise = np.random.default_rng(seed).normal(0, sigma, z.shape)
    pred = denoiser(z + noise, sigma, cond)
    err = np.linalg.norm(pred - z, axis=-1)
    if squared:
        err = err**2
    return float(np.mean(err))


def edm_sigma_schedule(steps: int, sigma_min: float, sigma_max: float, rho: float = 7.0) -> np.ndarray:
    i = np.arange(steps)
    r = 1.0 / rho
    sig = (sigma_max**r + i / max(steps - 1, 1) * (sigma_min**r - sigma_max**r)) ** rho
    return np.append(sig, 0.0)


def edm_sample(
    denoiser,
    cond,
    shape: tuple[int, int],
    steps: int = 64,
    sigma_min: float = 0.01,
    sigma_max: float = 10.0,
    seed: int = 0,
) -> np.ndarray:
    """Deterministic probability-flow integration (2nd-order Heun, rho=7 schedule)."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    sigmas = edm_sigma_schedule(steps, sigma_min, sigma_max)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(shape) * sigmas[0]
    for i in range(steps):
        s, s_next = sigmas[i], sigmas[i + 1]
        d = (x - denoiser(x, s, cond)) / s
        x_next = x + (s_next - s) * d
        if s_next > 0:
            d_next = (x_next - denoiser(x_next, s_next, cond)) / s_next
            x_next = x + (s_next - s) * 0.5 * (d + d_next)
        x = x_next
    return x


def concat_conditions(parts) -> ConditionVector:
    parts = list(parts)
    if not parts:
        raise ValueError("need at least one condition")
    return ConditionVector(np.concatenate([p.values for p in parts]), "concatenated")


# ---------------------------------------------------------------------------
# parameter persistence: text manifest + binary matrix blobs

def save_params(directory, params: KernelParams) -> None:
    os.makedirs(directory, exist_ok=True)
    manifest = {"C": params.C, "C0": params.C0, "L": params.L, "seed": params.seed,
                "occ_b": params.occ_b, "matrices": {}}

    def put(name, mat):
        mat = np.atleast_2d(np.asarray(mat, float))
        fname = name + ".vgrd"
        write_matrix_vgrd(os.path.join(directory, fname), mat)
        manifest["matrices"][name] = {"rows": mat.shape[0], "cols": mat.shape[1], "file": fname}

    put("pe_proj", params.pe_proj)
    for tag, lay in [("cross", params.cross), ("topo_attn", params.topo_attn)]:
        for part in ("wq", "wk", "wv", "wo"):
            put("%s.%s" % (tag, part), getattr(lay, part))
    for i, lay in enumerate(params.self_layers):
        for part in ("wq", "wk", "wv", "wo"):
            put("self%d.%s" % (i, part), getattr(lay, part))
    put("lift", params.lift)
    put("mu_map", params.mu_map)
    put("logvar_map", params.logvar_map)
    put("occ_w", params.occ_w)
    put("betti_table", params.betti_table)
    put("topo_lift_w", params.topo_lift_w)
    put("topo_lift_b", params.topo_lift_b)
    put("topo_head_w", params.topo_head_w)
    put("topo_head_b", params.topo_head_b)
    with open(os.path.join(directory, "manifest.json"), "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=1, sort_keys=True)


def load_params(directory) -> KernelParams:
    with open(os.path.join(directory, "manifest.json"), encoding="utf-8") as f:
        manifest = json.load(f)

    def get(name):
        meta = manifest["matrices"][name]
        mat = read_matrix_vgrd(os.path.join(directory, meta["file"]))
        if mat.shape != (meta["rows"], meta["cols"]):
            raise ValueError("matrix %s has wrong shape" % name)
        return mat

    def layer(tag):
        return AttentionLayerParams(*(get("%s.%s" % (tag, p)) for p in ("wq", "wk", "wv", "wo")))

    return KernelParams(
        C=manifest["C"], C0=manifest["C0"], L=manifest["L"],
        pe_proj=get("pe_proj"),
        cross=layer("cross"),
        self_layers=tuple(layer("self%d" % i) for i in range(manifest["L"])),
        lift=get("lift"),
        mu_map=get("mu_map"),
        logvar_map=get("logvar_map"),
        occ_w=get("occ_w").ravel(),
        occ_b=manifest["occ_b"],
        betti_table=get("betti_table"),
        topo_lift_w=get("topo_lift_w"),
        topo_lift_b=get("topo_lift_b").ravel(),
        topo_attn=layer("topo_attn"),
        topo_head_w=get("topo_head_w"),
        topo_head_b=get("topo_head_b").ravel(),
        seed=manifest["seed"],
    )
