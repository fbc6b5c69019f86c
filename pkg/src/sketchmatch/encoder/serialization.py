"""Binary weights file.

Byte layout (all little-endian):

    bytes 0..3    magic b"SKMW"
    uint32        format version (1)
    uint32 x 7    T, max_objects, d_model, n_heads, n_layers, d_ff, d_embed
    uint32        flags (bit 0: velocity features in the input projection)
    float64       temperature
    float32[...]  parameter blobs, concatenated in named_parameters() order

Shapes are derived from the config header, so the blobs carry no framing.
Values are stored as 32-bit floats; loading promotes them to float64 for
computation, and re-saving a loaded file reproduces it byte for byte.
"""

from __future__ import annotations

import hashlib
import struct
from pathlib import Path

import numpy as np

from sketchmatch.encoder.model import (
    EncoderConfig,
    EncoderError,
    EncoderWeights,
    init_weights,
    named_parameters,
)

MAGIC = b"SKMW"
VERSION = 1
_FLAG_VELOCITY = 1
_HEADER = struct.Struct("<4sI8Id")


def weights_to_bytes(weights: EncoderWeights) -> bytes:
    cfg = weights.config
    flags = _FLAG_VELOCITY if cfg.velocity_features else 0
    parts = [
        _HEADER.pack(
            MAGIC, VERSION,
            cfg.T, cfg.max_objects, cfg.d_model, cfg.n_heads,
            cfg.n_layers, cfg.d_ff, cfg.d_embed, flags,
            cfg.temperature,
        )
    ]
    for _, array in named_parameters(weights):
        parts.append(np.ascontiguousarray(array, dtype="<f4").tobytes())
    return b"".join(parts)


def bytes_to_weights(blob: bytes) -> EncoderWeights:
    if len(blob) < _HEADER.size:
        raise EncoderError("weights blob too short for header")
    (magic, version, T, max_objects, d_model, n_heads, n_layers, d_ff, d_embed,
     flags, temp) = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise EncoderError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise EncoderError(f"unsupported weights version {version}")
    cfg = EncoderConfig(
        T=T, max_objects=max_objects, d_model=d_model, n_heads=n_heads,
        n_layers=n_layers, d_ff=d_ff, d_embed=d_embed, temperature=temp,
        velocity_features=bool(flags & _FLAG_VELOCITY),
    )
    weights = init_weights(cfg, seed=0)
    offset = _HEADER.size
    for name, array in named_parameters(weights):
        count = array.size
        end = offset + 4 * count
        if end > len(blob):
            raise EncoderError(f"weights blob truncated in parameter {name}")
        data = np.frombuffer(blob, dtype="<f4", count=count, offset=offset)
        array[...] = data.reshape(array.shape).astype(np.float64)
        offset = end
    if offset != len(blob):
        raise EncoderError("trailing bytes after final parameter")
    for name, array in named_parameters(weights):
        if not np.isfinite(array).all():
            raise EncoderError(f"non-finite values in parameter {name}")
    return weights


def save_weights(weights: EncoderWeights, path: str | Path) -> None:
    Path(path).write_bytes(weights_to_bytes(weights))


def load_weights(path: str | Path) -> EncoderWeights:
    return bytes_to_weights(Path(path).read_bytes())


def weights_hash(weights: EncoderWeights) -> str:
    return hashlib.sha256(weights_to_bytes(weights)).hexdigest()
