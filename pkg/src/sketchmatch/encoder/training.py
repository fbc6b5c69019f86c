"""Contrastive training loop and numerical gradient verification.

Batches pair two camera views per sampled event; Adam drives the loss from
sketchmatch.encoder.loss. Everything is deterministic given the seed.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from sketchmatch.encoder.loss import nt_xent_loss
from sketchmatch.encoder.model import (
    EncoderConfig,
    EncoderError,
    EncoderWeights,
    backward,
    cast_weights,
    forward,
    init_weights,
    named_parameters,
    pad_grid,
    zeros_like_weights,
)

logger = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


class TrainingDivergedError(TrainingError):
    def __init__(self, step: int):
        super().__init__(f"non-finite loss at step {step}")
        self.step = step


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 2000
    batch_pairs: int = 32
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    log_every: int = 100
    # Training arithmetic precision; weights are serialized as float32
    # regardless, and inference/verification stay float64.
    dtype: str = "float32"


class Adam:
    def __init__(self, weights: EncoderWeights, cfg: TrainConfig):
        self.cfg = cfg
        self.m = zeros_like_weights(weights)
        self.v = zeros_like_weights(weights)
        self.t = 0

    def step(self, weights: EncoderWeights, grads: EncoderWeights) -> None:
        c = self.cfg
        self.t += 1
        bias1 = 1.0 - c.beta1**self.t
        bias2 = 1.0 - c.beta2**self.t
        for (_, p), (_, g), (_, m), (_, v) in zip(
            named_parameters(weights),
            named_parameters(grads),
            named_parameters(self.m),
            named_parameters(self.v),
        ):
            m *= c.beta1
            m += (1.0 - c.beta1) * g
            v *= c.beta2
            v += (1.0 - c.beta2) * g * g
            p -= c.learning_rate * (m / bias1) / (np.sqrt(v / bias2) + c.adam_eps)


def grids_by_event(clips, T: int, max_objects: int):
    """Featurize clips and group the grids by event id.

    Clips with more tracks than max_objects are skipped with a warning.
    """
    from sketchmatch.store import clip_to_grid

    grouped: dict[int, list] = {}
    skipped = 0
    for clip in clips:
        if len(clip.tracks) > max_objects:
            skipped += 1
            continue
        grid = clip_to_grid(clip, T=T)
        grouped.setdefault(clip.event_id, []).append(grid)
    if skipped:
        logger.warning("skipped %d clips exceeding max_objects", skipped)
    return grouped


def stack_grids(grids) -> tuple[np.ndarray, np.ndarray]:
    """Stack grids into one batch, padding to the batch's max object count."""
    width = max(g.num_objects for g in grids)
    padded = [pad_grid(g, width) for g in grids]
    return np.stack([v for v, _ in padded]), np.stack([m for _, m in padded])


def train(
    dataset_path: str | Path,
    config: EncoderConfig | None = None,
    train_config: TrainConfig | None = None,
    seed: int = 0,
    initial: EncoderWeights | None = None,
) -> tuple[EncoderWeights, list[float]]:
    """Train encoder weights on a simulator dataset file.

    Each step samples batch_pairs events and two distinct camera views per
    event; views of the same event are positives, everything else negatives.
    Returns the final weights and the per-step loss history.
    """
    from sketchmatch.simulator import load_dataset

    config = config or EncoderConfig()
    train_config = train_config or TrainConfig()
    _, clips = load_dataset(dataset_path)
    grouped = grids_by_event(clips, config.T, config.max_objects)
    eligible = sorted(e for e, views in grouped.items() if len(views) >= 2)
    if len(eligible) < 2:
        raise TrainingError(
            f"dataset needs >= 2 events with >= 2 camera views each, found {len(eligible)}"
        )

    dtype = np.dtype(train_config.dtype)
    weights = initial if initial is not None else init_weights(config, seed=seed)
    if weights.w_in.dtype != dtype:
        weights = cast_weights(weights, dtype)
    rng = np.random.default_rng(seed)
    optimizer = Adam(weights, train_config)
    history: list[float] = []
    batch_events = min(train_config.batch_pairs, len(eligible))

    for step in range(train_config.steps):
        chosen = rng.choice(len(eligible), size=batch_events, replace=False)
        batch = []
        for idx in chosen:
            views = grouped[eligible[idx]]
            a, b = rng.choice(len(views), size=2, replace=False)
            batch.append(views[a])
            batch.append(views[b])
        values, mask = stack_grids(batch)
        values = values.astype(dtype, copy=False)

        emb, cache = forward(weights, values, mask)
        loss, d_emb = nt_xent_loss(emb, config.temperature)
        if not np.isfinite(loss):
            raise TrainingDivergedError(step)
        grads = backward(weights, cache, d_emb)
        optimizer.step(weights, grads)
        history.append(loss)
        if train_config.log_every and (step + 1) % train_config.log_every == 0:
            recent = history[-train_config.log_every:]
            logger.info("step %d loss %.4f", step + 1, float(np.mean(recent)))
    return weights, history


def _random_batch(config: EncoderConfig, rng: np.random.Generator, pairs: int = 3):
    n = 2 * pairs
    values = rng.uniform(0.0, 1.0, size=(n, config.max_objects, config.T, 4))
    mask = rng.random((n, config.max_objects, config.T)) < 0.8
    mask[:, 0, 0] = True
    return values, mask


GRAD_CHECK_CONFIG = EncoderConfig(
    T=8, max_objects=2, d_model=16, n_heads=2, n_layers=2, d_ff=32, d_embed=8,
    temperature=0.2,
)


def grad_check(
    config: EncoderConfig | None = None, seed: int = 0, epsilon: float = 1e-6
) -> float:
    """Max relative error between analytic and central-difference gradients.

    Evaluates the full pipeline (forward, contrastive loss, backward) at a
    random batch; intended for small configs. The step size keeps the
    activation's kink-crossing band narrow while float64 roundoff stays
    far below the tolerance.
    """
    config = config or GRAD_CHECK_CONFIG
    rng = np.random.default_rng(seed)
    weights = init_weights(config, seed=seed)
    values, mask = _random_batch(config, rng)

    def loss_at() -> float:
        emb, _ = forward(weights, values, mask)
        return nt_xent_loss(emb, config.temperature)[0]

    emb, cache = forward(weights, values, mask)
    loss, d_emb = nt_xent_loss(emb, config.temperature)
    if not np.isfinite(loss):
        raise TrainingError("non-finite loss in grad check")
    analytic = backward(weights, cache, d_emb)

    worst = 0.0
    for (_, param), (_, grad) in zip(named_parameters(weights), named_parameters(analytic)):
        flat = param.reshape(-1)
        gflat = grad.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + epsilon
            hi = loss_at()
            flat[i] = orig - epsilon
            lo = loss_at()
            flat[i] = orig
            fd = (hi - lo) / (2 * epsilon)
            denom = max(abs(gflat[i]), abs(fd), 1e-5)
            worst = max(worst, abs(gflat[i] - fd) / denom)
    return worst
