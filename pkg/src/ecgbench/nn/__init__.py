"""Minimal training kernels: layers with hand-written backward passes,
softmax cross-entropy, Adam, and a finite-difference gradient checker."""

from .layers import (
    Layer,
    Conv1D,
    MaxPool1D,
    BatchNorm1D,
    ReLU,
    Dense,
    Dropout,
    GlobalAveragePool,
    Flatten,
    LSTM,
    Network,
)
from .losses import softmax, softmax_xent
from .optim import AdamState, adam_step
from .gradcheck import grad_check

__all__ = [
    "Layer",
    "Conv1D",
    "MaxPool1D",
    "BatchNorm1D",
    "ReLU",
    "Dense",
    "Dropout",
    "GlobalAveragePool",
    "Flatten",
    "LSTM",
    "Network",
    "softmax",
    "softmax_xent",
    "AdamState",
    "adam_step",
    "grad_check",
]
