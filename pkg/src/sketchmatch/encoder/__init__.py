from sketchmatch.encoder.loss import nt_xent_loss
from sketchmatch.encoder.model import (
    EncoderConfig,
    EncoderError,
    EncoderWeights,
    backward,
    cosine,
    embed,
    forward,
    init_weights,
    named_parameters,
    pad_grid,
)
from sketchmatch.encoder.serialization import (
    bytes_to_weights,
    load_weights,
    save_weights,
    weights_hash,
    weights_to_bytes,
)
from sketchmatch.encoder.training import (
    TrainConfig,
    TrainingDivergedError,
    TrainingError,
    grad_check,
    train,
)

__all__ = [
    "EncoderConfig",
    "EncoderError",
    "EncoderWeights",
    "TrainConfig",
    "TrainingDivergedError",
    "TrainingError",
    "backward",
    "bytes_to_weights",
    "cosine",
    "embed",
    "forward",
    "grad_check",
    "init_weights",
    "load_weights",
    "named_parameters",
    "nt_xent_loss",
    "pad_grid",
    "save_weights",
    "train",
    "weights_hash",
    "weights_to_bytes",
]
