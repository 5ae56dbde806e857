"""Fold-based splitting, per-lead normalization, and model-facing encodings."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ingest import LabeledDataset, NUM_LEADS, SIGNAL_LENGTH, Superclass

__all__ = [
    "SplitSpec",
    "NormStats",
    "split_by_fold",
    "fit_normalizer",
    "normalize",
    "denormalize",
    "one_hot",
    "one_hot_labels",
    "flatten",
    "unflatten",
    "flatten_dataset",
]

STD_FLOOR = 1e-8


@dataclass(frozen=True)
class SplitSpec:
    """Assignment of the ten stratification folds to train/val/test parts."""

    train_folds: frozenset[int] = field(
        default_factory=lambda: frozenset(range(1, 9)))
    val_fold: int = 9
    test_fold: int = 10

    def __post_init__(self):
        train = frozenset(int(f) for f in self.train_folds)
        object.__setattr__(self, "train_folds", train)
        parts = [train, {self.val_fold}, {self.test_fold}]
        covered: set[int] = set()
        for part in parts:
            if covered & part:
                raise ValueError("split parts must be pairwise disjoint")
            covered |= part
        if covered != set(range(1, 11)):
            raise ValueError(f"split must cover folds 1-10, covers {sorted(covered)}")


def split_by_fold(ds: LabeledDataset, spec: SplitSpec = SplitSpec()):
    """Partition a dataset by fold id, preserving within-part order."""
    folds = ds.folds
    known = set(spec.train_folds) | {spec.val_fold, spec.test_fold}
    stray = set(np.unique(folds)) - known
    if stray:
        raise ValueError(f"records with folds outside the split spec: {sorted(stray)}")
    train_mask = np.isin(folds, sorted(spec.train_folds))
    return (
        ds.subset(np.flatnonzero(train_mask)),
        ds.subset(np.flatnonzero(folds == spec.val_fold)),
        ds.subset(np.flatnonzero(folds == spec.test_fold)),
    )


@dataclass(frozen=True)
class NormStats:
    """Per-lead mean and standard deviation, fitted on the training split only."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        std = np.asarray(self.std, dtype=np.float64)
        if mean.shape != (NUM_LEADS,) or std.shape != (NUM_LEADS,):
            raise ValueError(f"stats must have {NUM_LEADS} per-lead entries")
        if np.any(std < STD_FLOOR):
            raise ValueError(f"std entries must be >= {STD_FLOOR}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)


def fit_normalizer(train: LabeledDataset) -> NormStats:
    """Per-lead mean/std over every time step of the training split.

    Standard deviations are clamped from below at 1e-8 so a flat lead cannot
    blow up the division.
    """
    if len(train) == 0:
        raise ValueError("cannot fit a normalizer on an empty training set")
    flat = train.signals.reshape(-1, NUM_LEADS)
    mean = flat.mean(axis=0, dtype=np.float64)
    std = flat.std(axis=0, dtype=np.float64)
    return NormStats(mean=mean, std=np.maximum(std, STD_FLOOR))


def normalize(samples: np.ndarray, stats: NormStats) -> np.ndarray:
    """Per-lead z-score; works on one record (1000, 12) or a stack (n, 1000, 12)."""
    return (np.asarray(samples, dtype=np.float64) - stats.mean) / stats.std


def denormalize(samples: np.ndarray, stats: NormStats) -> np.ndarray:
    return np.asarray(samples, dtype=np.float64) * stats.std + stats.mean


def one_hot(label) -> np.ndarray:
    """Standard-basis encoding of one superclass code."""
    code = int(label)
    if not 0 <= code <= 4:
        raise ValueError(f"label {code} outside [0, 4]")
    vec = np.zeros(5)
    vec[code] = 1.0
    return vec


def one_hot_labels(labels: np.ndarray) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() > 4):
        raise ValueError("labels must be superclass codes in [0, 4]")
    out = np.zeros((labels.size, 5))
    out[np.arange(labels.size), labels] = 1.0
    return out


def flatten(samples: np.ndarray) -> np.ndarray:
    """Time-major flattening of one record: element t*12 + lead."""
    samples = np.asarray(samples)
    if samples.shape != (SIGNAL_LENGTH, NUM_LEADS):
        raise ValueError(f"expected ({SIGNAL_LENGTH}, {NUM_LEADS}), got {samples.shape}")
    return samples.reshape(SIGNAL_LENGTH * NUM_LEADS).copy()


def unflatten(vec: np.ndarray) -> np.ndarray:
    vec = np.asarray(vec)
    if vec.shape != (SIGNAL_LENGTH * NUM_LEADS,):
        raise ValueError(f"expected {SIGNAL_LENGTH * NUM_LEADS} features, got {vec.shape}")
    return vec.reshape(SIGNAL_LENGTH, NUM_LEADS).copy()


def flatten_dataset(signals: np.ndarray) -> np.ndarray:
    """Flatten a (n, 1000, 12) stack into (n, 12000) feature rows."""
    signals = np.asarray(signals)
    return signals.reshape(signals.shape[0], SIGNAL_LENGTH * NUM_LEADS)
