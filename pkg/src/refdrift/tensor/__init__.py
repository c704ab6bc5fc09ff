"""Minimal reverse-mode autodiff engine, RNG streams, and Adam."""

from .core import Tensor, no_grad, is_grad_enabled
from .ops import (
    BatchNormState,
    batchnorm2d,
    concat,
    conv2d,
    dropout,
    embedding,
    gather_last,
    gumbel_softmax,
    hard_one_hot,
    linear,
    maxpool2d,
    one_hot,
    slice_last,
    softmax,
    stack,
)
from .optim import Adam
from .rng import RngStream

__all__ = [
    "Adam",
    "BatchNormState",
    "RngStream",
    "Tensor",
    "batchnorm2d",
    "concat",
    "conv2d",
    "dropout",
    "embedding",
    "gather_last",
    "gumbel_softmax",
    "hard_one_hot",
    "is_grad_enabled",
    "linear",
    "maxpool2d",
    "no_grad",
    "one_hot",
    "slice_last",
    "softmax",
    "stack",
]
