"""Transformer sequence encoder over multi-object box trajectories.

Maps a FeatureGrid to a unit-length embedding: one token per
(object, timestep), temporal and object-slot embeddings, pre-norm
self-attention layers, masked mean pooling, and an output projection.
Forward and backward passes are written out by hand in numpy so the
gradients can be verified against finite differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from sketchmatch.geometry import FeatureGrid

NEG_INF = -1e30
LN_EPS = 1e-5


class EncoderError(ValueError):
    """Raised on shape or capacity violations at the encoder boundary."""


@dataclass(frozen=True)
class EncoderConfig:
    T: int = 32
    max_objects: int = 4
    d_model: int = 64
    n_heads: int = 4
    n_layers: int = 2
    d_ff: int = 128
    d_embed: int = 64
    temperature: float = 0.1
    # Concatenate per-step feature deltas to the box features before the
    # input projection; motion direction then reaches the encoder directly
    # instead of having to be recovered through attention.
    velocity_features: bool = True

    def __post_init__(self) -> None:
        if self.d_model % self.n_heads != 0:
            raise EncoderError("d_model must be divisible by n_heads")
        if self.max_objects < 1:
            raise EncoderError("max_objects must be >= 1")
        if self.temperature <= 0:
            raise EncoderError("temperature must be positive")

    @property
    def input_dim(self) -> int:
        return 8 if self.velocity_features else 4


@dataclass
class LayerWeights:
    ln1_gamma: np.ndarray
    ln1_beta: np.ndarray
    wq: np.ndarray
    bq: np.ndarray
    wk: np.ndarray
    bk: np.ndarray
    wv: np.ndarray
    bv: np.ndarray
    wo: np.ndarray
    bo: np.ndarray
    ln2_gamma: np.ndarray
    ln2_beta: np.ndarray
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray


LAYER_PARAM_NAMES = (
    "ln1_gamma", "ln1_beta",
    "wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo",
    "ln2_gamma", "ln2_beta",
    "w1", "b1", "w2", "b2",
)


@dataclass
class EncoderWeights:
    config: EncoderConfig
    w_in: np.ndarray
    b_in: np.ndarray
    pos: np.ndarray
    slot: np.ndarray
    layers: list[LayerWeights]
    w_out: np.ndarray
    b_out: np.ndarray


def init_weights(config: EncoderConfig, seed: int = 0) -> EncoderWeights:
    rng = np.random.default_rng(seed)
    d, scale = config.d_model, 0.02

    def w(*shape):
        return rng.normal(0.0, scale, size=shape)

    layers = []
    for _ in range(config.n_layers):
        layers.append(
            LayerWeights(
                ln1_gamma=np.ones(d), ln1_beta=np.zeros(d),
                wq=w(d, d), bq=np.zeros(d),
                wk=w(d, d), bk=np.zeros(d),
                wv=w(d, d), bv=np.zeros(d),
                wo=w(d, d), bo=np.zeros(d),
                ln2_gamma=np.ones(d), ln2_beta=np.zeros(d),
                w1=w(d, config.d_ff), b1=np.zeros(config.d_ff),
                w2=w(config.d_ff, d), b2=np.zeros(d),
            )
        )
    return EncoderWeights(
        config=config,
        w_in=w(config.input_dim, d), b_in=np.zeros(d),
        pos=w(config.T, d),
        slot=w(config.max_objects, d),
        layers=layers,
        w_out=w(d, config.d_embed), b_out=np.zeros(config.d_embed),
    )


def named_parameters(weights: EncoderWeights):
    """(name, array) pairs in the declared serialization order."""
    yield "w_in", weights.w_in
    yield "b_in", weights.b_in
    yield "pos", weights.pos
    yield "slot", weights.slot
    for i, layer in enumerate(weights.layers):
        for name in LAYER_PARAM_NAMES:
            yield f"layers.{i}.{name}", getattr(layer, name)
    yield "w_out", weights.w_out
    yield "b_out", weights.b_out


def zeros_like_weights(weights: EncoderWeights) -> EncoderWeights:
    return EncoderWeights(
        config=weights.config,
        w_in=np.zeros_like(weights.w_in),
        b_in=np.zeros_like(weights.b_in),
        pos=np.zeros_like(weights.pos),
        slot=np.zeros_like(weights.slot),
        layers=[
            LayerWeights(**{n: np.zeros_like(getattr(l, n)) for n in LAYER_PARAM_NAMES})
            for l in weights.layers
        ],
        w_out=np.zeros_like(weights.w_out),
        b_out=np.zeros_like(weights.b_out),
    )


def cast_weights(weights: EncoderWeights, dtype) -> EncoderWeights:
    """Copy of the weights with every parameter cast to dtype."""
    return EncoderWeights(
        config=weights.config,
        w_in=weights.w_in.astype(dtype),
        b_in=weights.b_in.astype(dtype),
        pos=weights.pos.astype(dtype),
        slot=weights.slot.astype(dtype),
        layers=[
            LayerWeights(**{n: getattr(l, n).astype(dtype) for n in LAYER_PARAM_NAMES})
            for l in weights.layers
        ],
        w_out=weights.w_out.astype(dtype),
        b_out=weights.b_out.astype(dtype),
    )


def _layernorm_forward(x, gamma, beta):
    mu = x.mean(axis=-1, keepdims=True)
    var = ((x - mu) ** 2).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + LN_EPS)
    xhat = (x - mu) * inv_std
    return xhat * gamma + beta, (xhat, inv_std, gamma)


def _layernorm_backward(dy, cache):
    xhat, inv_std, gamma = cache
    dgamma = (dy * xhat).sum(axis=tuple(range(dy.ndim - 1)))
    dbeta = dy.sum(axis=tuple(range(dy.ndim - 1)))
    dxhat = dy * gamma
    m1 = dxhat.mean(axis=-1, keepdims=True)
    m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
    dx = inv_std * (dxhat - m1 - xhat * m2)
    return dx, dgamma, dbeta


def _linear_forward(x, w, b):
    return x @ w + b, x


def _linear_backward(dy, x, w):
    dx = dy @ w.T
    x2 = x.reshape(-1, x.shape[-1])
    dy2 = dy.reshape(-1, dy.shape[-1])
    dw = x2.T @ dy2
    db = dy2.sum(axis=0)
    return dx, dw, db


def _relu2_forward(x):
    # Squared ReLU: cheap on CPU and C1-smooth, so finite-difference
    # verification stays clean at the kink.
    r = np.maximum(x, 0.0)
    return r * r, r


def _relu2_backward(dy, cache):
    return dy * (2.0 * cache)


def _split_heads(x, n_heads):
    b, n, d = x.shape
    return x.reshape(b, n, n_heads, d // n_heads).transpose(0, 2, 1, 3)


def _merge_heads(x):
    b, h, n, dh = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, n, h * dh)


def _attention_forward(h, key_mask, layer, n_heads):
    q, _ = _linear_forward(h, layer.wq, layer.bq)
    k, _ = _linear_forward(h, layer.wk, layer.bk)
    v, _ = _linear_forward(h, layer.wv, layer.bv)
    qh, kh, vh = (_split_heads(t, n_heads) for t in (q, k, v))
    dh = qh.shape[-1]
    scale = 1.0 / math.sqrt(dh)
    scores = (qh @ kh.swapaxes(-1, -2)) * scale
    scores += np.where(key_mask, 0.0, NEG_INF)[:, None, None, :].astype(scores.dtype)
    scores -= scores.max(axis=-1, keepdims=True)
    np.exp(scores, out=scores)
    attn = scores
    attn /= attn.sum(axis=-1, keepdims=True)
    ctx = attn @ vh
    merged = _merge_heads(ctx)
    out, _ = _linear_forward(merged, layer.wo, layer.bo)
    return out, (h, qh, kh, vh, attn, merged, scale)


def _attention_backward(dout, cache, layer, grads):
    h, qh, kh, vh, attn, merged, scale = cache
    dmerged, dwo, dbo = _linear_backward(dout, merged, layer.wo)
    grads.wo += dwo
    grads.bo += dbo
    dctx = _split_heads(dmerged, qh.shape[1])
    dattn = dctx @ vh.swapaxes(-1, -2)
    dvh = attn.swapaxes(-1, -2) @ dctx
    dscores = attn * (dattn - (dattn * attn).sum(axis=-1, keepdims=True))
    dqh = (dscores @ kh) * scale
    dkh = (dscores.swapaxes(-1, -2) @ qh) * scale
    dq, dk, dv = (_merge_heads(t) for t in (dqh, dkh, dvh))
    dh_q, dwq, dbq = _linear_backward(dq, h, layer.wq)
    dh_k, dwk, dbk = _linear_backward(dk, h, layer.wk)
    dh_v, dwv, dbv = _linear_backward(dv, h, layer.wv)
    grads.wq += dwq
    grads.bq += dbq
    grads.wk += dwk
    grads.bk += dbk
    grads.wv += dwv
    grads.bv += dbv
    return dh_q + dh_k + dh_v


def forward(
    weights: EncoderWeights, values: np.ndarray, mask: np.ndarray
) -> tuple[np.ndarray, dict]:
    """Embed a batch of grids: values (B, O, T, 4), mask (B, O, T).

    Returns unit-norm embeddings (B, d_embed) and the cache needed for
    backward(). Masked-out tokens are excluded from attention and pooling.
    Computation runs in the dtype of the weights (float64 for inference
    and verification; training may cast to float32 for speed).
    """
    cfg = weights.config
    values = np.asarray(values, dtype=weights.w_in.dtype)
    mask = np.asarray(mask, dtype=bool)
    B, O, T, F = values.shape
    if F != 4:
        raise EncoderError(f"feature dim must be 4, got {F}")
    if O > cfg.max_objects:
        raise EncoderError("object capacity exceeded")
    if T != cfg.T:
        raise EncoderError(f"grid length {T} does not match configured T={cfg.T}")
    if not mask.reshape(B, -1).any(axis=1).all():
        raise EncoderError("every sample needs at least one masked-in token")

    if cfg.velocity_features:
        deltas = np.empty_like(values)
        deltas[:, :, :-1] = values[:, :, 1:] - values[:, :, :-1]
        deltas[:, :, -1] = deltas[:, :, -2]
        features = np.concatenate([values, deltas], axis=-1)
    else:
        features = values
    tokens = features @ weights.w_in + weights.b_in
    tokens = tokens + weights.pos[None, None, :, :] + weights.slot[None, :O, None, :]
    x = tokens.reshape(B, O * T, cfg.d_model)
    key_mask = mask.reshape(B, O * T)

    layer_caches = []
    for layer in weights.layers:
        h, ln1_cache = _layernorm_forward(x, layer.ln1_gamma, layer.ln1_beta)
        attn_out, attn_cache = _attention_forward(h, key_mask, layer, cfg.n_heads)
        x1 = x + attn_out
        h2, ln2_cache = _layernorm_forward(x1, layer.ln2_gamma, layer.ln2_beta)
        u, _ = _linear_forward(h2, layer.w1, layer.b1)
        g, act_cache = _relu2_forward(u)
        ff, _ = _linear_forward(g, layer.w2, layer.b2)
        x2 = x1 + ff
        layer_caches.append((ln1_cache, attn_cache, x1, ln2_cache, h2, act_cache, g))
        x = x2

    m = key_mask[..., None].astype(x.dtype)
    counts = m.sum(axis=1)
    pooled = (x * m).sum(axis=1) / counts
    raw = pooled @ weights.w_out + weights.b_out
    norms = np.linalg.norm(raw, axis=-1, keepdims=True)
    emb = raw / norms

    cache = {
        "features": features,
        "mask": mask,
        "O": O,
        "key_mask": key_mask,
        "layer_caches": layer_caches,
        "x_final": x,
        "pooled": pooled,
        "raw": raw,
        "norms": norms,
        "emb": emb,
    }
    return emb, cache


def backward(weights: EncoderWeights, cache: dict, d_emb: np.ndarray) -> EncoderWeights:
    """Gradients of a scalar loss w.r.t. all weights, given d(loss)/d(embeddings)."""
    cfg = weights.config
    grads = zeros_like_weights(weights)
    emb, raw, norms = cache["emb"], cache["raw"], cache["norms"]
    key_mask = cache["key_mask"]
    O = cache["O"]

    draw = (d_emb - emb * (d_emb * emb).sum(axis=-1, keepdims=True)) / norms
    dpooled, dw_out, db_out = _linear_backward(draw, cache["pooled"], weights.w_out)
    grads.w_out += dw_out
    grads.b_out += db_out

    m = key_mask[..., None].astype(d_emb.dtype)
    counts = m.sum(axis=1)
    dx = dpooled[:, None, :] * m / counts[:, None, :]

    for layer, layer_grads, lcache in zip(
        reversed(weights.layers), reversed(grads.layers), reversed(cache["layer_caches"])
    ):
        ln1_cache, attn_cache, x1, ln2_cache, h2, act_cache, g = lcache
        dx1 = dx.copy()
        dg, dw2, db2 = _linear_backward(dx, g, layer.w2)
        layer_grads.w2 += dw2
        layer_grads.b2 += db2
        du = _relu2_backward(dg, act_cache)
        dh2, dw1, db1 = _linear_backward(du, h2, layer.w1)
        layer_grads.w1 += dw1
        layer_grads.b1 += db1
        dx1_ln, dg2, db2_ln = _layernorm_backward(dh2, ln2_cache)
        layer_grads.ln2_gamma += dg2
        layer_grads.ln2_beta += db2_ln
        dx1 += dx1_ln

        dx0 = dx1.copy()
        dh = _attention_backward(dx1, attn_cache, layer, layer_grads)
        dx0_ln, dg1, db1_ln = _layernorm_backward(dh, ln1_cache)
        layer_grads.ln1_gamma += dg1
        layer_grads.ln1_beta += db1_ln
        dx = dx0 + dx0_ln

    B = dx.shape[0]
    dtokens = dx.reshape(B, O, cfg.T, cfg.d_model)
    grads.pos += dtokens.sum(axis=(0, 1))
    grads.slot[:O] += dtokens.sum(axis=(0, 2))
    features = cache["features"]
    f2 = features.reshape(-1, cfg.input_dim)
    dt2 = dtokens.reshape(-1, cfg.d_model)
    grads.w_in += f2.T @ dt2
    grads.b_in += dt2.sum(axis=0)
    return grads


def pad_grid(grid: FeatureGrid, max_objects: int) -> tuple[np.ndarray, np.ndarray]:
    """Pad a grid's arrays with masked-out object slots up to max_objects."""
    n, T = grid.num_objects, grid.T
    if n > max_objects:
        raise EncoderError("object capacity exceeded")
    values = np.zeros((max_objects, T, 4), dtype=grid.values.dtype)
    mask = np.zeros((max_objects, T), dtype=bool)
    values[:n] = grid.values
    mask[:n] = grid.mask
    return values, mask


def embed(weights: EncoderWeights, grid: FeatureGrid) -> np.ndarray:
    """Unit-norm embedding of one FeatureGrid."""
    emb, _ = forward(weights, grid.values[None], grid.mask[None])
    return emb[0]


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Dot product of two embeddings (unit-norm by construction)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise EncoderError(f"embedding dimensions differ: {a.shape} vs {b.shape}")
    return float(a @ b)
