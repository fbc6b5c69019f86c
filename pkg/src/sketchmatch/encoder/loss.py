"""Normalized-temperature cross-entropy over a batch of paired views.

Embeddings arrive as 2B rows in which rows (2i, 2i+1) are the two views of
the same underlying event; every other row in the batch acts as a negative.
"""

from __future__ import annotations

import numpy as np

from sketchmatch.encoder.model import NEG_INF, EncoderError


def nt_xent_loss(embeddings: np.ndarray, temperature: float) -> tuple[float, np.ndarray]:
    """Loss and its exact gradient w.r.t. the embedding rows.

    Similarity is the dot product (inputs are unit-norm); each anchor's
    positive is its paired view, softmaxed against all 2B-1 other rows.
    """
    z = np.asarray(embeddings)
    if not np.issubdtype(z.dtype, np.floating):
        z = z.astype(np.float64)
    if z.ndim != 2:
        raise EncoderError(f"embeddings must be 2D, got shape {z.shape}")
    n = z.shape[0]
    if n < 4 or n % 2 != 0:
        raise EncoderError("need negatives: at least 2 pairs (4 embeddings)")
    if temperature <= 0:
        raise EncoderError("temperature must be positive")

    sim = (z @ z.T) / temperature
    np.fill_diagonal(sim, NEG_INF)

    row_max = sim.max(axis=1, keepdims=True)
    exp = np.exp(sim - row_max)
    denom = exp.sum(axis=1, keepdims=True)
    lse = row_max[:, 0] + np.log(denom[:, 0])

    partner = np.arange(n) ^ 1
    pos = sim[np.arange(n), partner]
    loss = float(np.mean(lse - pos))

    softmax = exp / denom
    grad_sim = softmax
    grad_sim[np.arange(n), partner] -= 1.0
    grad_sim /= n
    grad = ((grad_sim + grad_sim.T) @ z) / temperature
    return loss, grad
