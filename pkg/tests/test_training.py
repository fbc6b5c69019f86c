from __future__ import annotations

import numpy as np
import pytest

from sketchmatch.encoder import (
    EncoderConfig,
    TrainConfig,
    TrainingDivergedError,
    TrainingError,
    init_weights,
    named_parameters,
    train,
    weights_hash,
)
from sketchmatch.simulator import SimConfig, make_dataset

SMALL_ENCODER = EncoderConfig(
    T=16, max_objects=2, d_model=32, n_heads=2, n_layers=1, d_ff=64, d_embed=16
)


@pytest.fixture(scope="module")
def tiny_dataset(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "tiny.jsonl"
    make_dataset(42, 24, 2, path, sim_config=SimConfig(actor_count_range=(1, 2)))
    return path


class TestTrain:
    def test_loss_descends(self, tiny_dataset):
        cfg = TrainConfig(steps=120, batch_pairs=12, log_every=0)
        _, history = train(tiny_dataset, SMALL_ENCODER, cfg, seed=0)
        assert len(history) == 120
        assert np.mean(history[-30:]) < np.mean(history[:30])

    def test_same_seed_same_weights(self, tiny_dataset):
        cfg = TrainConfig(steps=15, batch_pairs=6, log_every=0)
        w1, _ = train(tiny_dataset, SMALL_ENCODER, cfg, seed=9)
        w2, _ = train(tiny_dataset, SMALL_ENCODER, cfg, seed=9)
        assert weights_hash(w1) == weights_hash(w2)

    def test_zero_learning_rate_is_a_null_update(self, tiny_dataset):
        # With every event in every batch the composition is fixed, so an
        # lr=0 run must leave both the weights and the loss untouched.
        cfg = TrainConfig(
            steps=10, batch_pairs=64, learning_rate=0.0, log_every=0, dtype="float64"
        )
        initial = init_weights(SMALL_ENCODER, seed=4)
        reference = {n: a.copy() for n, a in named_parameters(initial)}
        w, history = train(tiny_dataset, SMALL_ENCODER, cfg, seed=4, initial=initial)
        for name, array in named_parameters(w):
            assert np.array_equal(array, reference[name]), name
        assert np.ptp(history) < 1e-9

    def test_too_small_dataset_rejected(self, tmp_path):
        path = tmp_path / "small.jsonl"
        make_dataset(1, 2, 2, path)
        # Strip down to one event's clips.
        lines = path.read_text().splitlines()
        path.write_text("\n".join(lines[:2]) + "\n")
        with pytest.raises(TrainingError, match=">= 2 events"):
            train(path, SMALL_ENCODER, TrainConfig(steps=5, log_every=0), seed=0)

    def test_divergence_reported_with_step(self, tiny_dataset):
        poisoned = init_weights(SMALL_ENCODER, seed=0)
        poisoned.w_in[0, 0] = np.nan
        with pytest.raises(TrainingDivergedError, match="step 0"):
            train(
                tiny_dataset,
                SMALL_ENCODER,
                TrainConfig(steps=5, log_every=0),
                seed=0,
                initial=poisoned,
            )
