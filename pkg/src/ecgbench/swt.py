"""Stationary (undecimated, "a trous") wavelet transform and signal augmentation.

The transform never downsamples the signal: at level ``j`` the filter taps are
spread apart by ``2**(j-1)`` zero-inserted positions and applied as a circular
convolution, so every coefficient band has the input length and the transform
commutes with circular shifts.  Synthesis applies the time-reversed filters and
halves the result, which under periodic boundaries reconstructs the input
exactly (it is the closed form of averaging the inverse over all shift phases).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "WaveletFilter",
    "SwtDecomposition",
    "AugmentParams",
    "get_wavelet",
    "swt_decompose",
    "swt_reconstruct",
    "augment_record",
    "balance_classes",
]

# Daubechies 8-tap scaling filter (4 vanishing moments), normalized so the
# coefficients sum to sqrt(2).
_DB4_LO = (
    0.23037781330885523,
    0.7148465705525415,
    0.6308807679295904,
    -0.02798376941698385,
    -0.18703481171888114,
    0.030841381835986965,
    0.032883011666982945,
    -0.010597401784997278,
)

_SQRT1_2 = 1.0 / np.sqrt(2.0)
_HAAR_LO = (_SQRT1_2, _SQRT1_2)


@dataclass(frozen=True)
class WaveletFilter:
    """Analysis/synthesis filter bank of an orthonormal wavelet.

    ``hi_d`` is the quadrature mirror of ``lo_d`` (``hi_d[k] = (-1)**k *
    lo_d[L-1-k]``) and the reconstruction filters are the time-reversed
    decomposition filters.
    """

    name: str
    lo_d: np.ndarray
    hi_d: np.ndarray = field(init=False)
    lo_r: np.ndarray = field(init=False)
    hi_r: np.ndarray = field(init=False)

    def __post_init__(self):
        lo = np.asarray(self.lo_d, dtype=np.float64)
        if lo.ndim != 1 or lo.size < 2:
            raise ValueError("low-pass filter must be a 1-D sequence of >= 2 taps")
        signs = (-1.0) ** np.arange(lo.size)
        hi = signs * lo[::-1]
        object.__setattr__(self, "lo_d", lo)
        object.__setattr__(self, "hi_d", hi)
        object.__setattr__(self, "lo_r", lo[::-1].copy())
        object.__setattr__(self, "hi_r", hi[::-1].copy())

    def __len__(self) -> int:
        return self.lo_d.size


_BUILTIN = {
    "haar": _HAAR_LO,
    "db4": _DB4_LO,
}


def get_wavelet(name: str) -> WaveletFilter:
    """Look up a built-in wavelet by name (``haar`` or ``db4``)."""
    try:
        lo = _BUILTIN[name.lower()]
    except KeyError:
        raise ValueError(
            f"unknown wavelet {name!r}; available: {sorted(_BUILTIN)}"
        ) from None
    return WaveletFilter(name=name.lower(), lo_d=np.array(lo))


@dataclass
class SwtDecomposition:
    """Coefficient bands of a stationary wavelet decomposition.

    ``details[0]`` is the finest band (level 1); ``approx`` is the level-L
    smooth.  Every band has the length of the input.
    """

    levels: int
    approx: np.ndarray
    details: list[np.ndarray]

    def bands(self) -> list[np.ndarray]:
        """All bands, approximation first then details fine-to-coarse."""
        return [self.approx] + list(self.details)


def _analyze(x: np.ndarray, filt: np.ndarray, step: int) -> np.ndarray:
    # Circular convolution with the filter upsampled by `step`:
    #   out[n] = sum_k filt[k] * x[(n - k*step) mod N]
    out = filt[0] * x
    for k in range(1, filt.size):
        out += filt[k] * np.roll(x, k * step)
    return out


def _synthesize(a: np.ndarray, d: np.ndarray, w: WaveletFilter, step: int) -> np.ndarray:
    # Correlation with the analysis filters (= filtering with lo_r/hi_r),
    # halved; the dual of _analyze under periodic boundaries.
    lo, hi = w.lo_d, w.hi_d
    out = lo[0] * a + hi[0] * d
    for k in range(1, lo.size):
        out += lo[k] * np.roll(a, -k * step) + hi[k] * np.roll(d, -k * step)
    return 0.5 * out


def swt_decompose(x: np.ndarray, w: WaveletFilter, levels: int) -> SwtDecomposition:
    """Decompose a 1-D signal into `levels` stationary wavelet bands.

    The signal length must be divisible by ``2**levels``; boundaries are
    periodic.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("input must be a non-empty 1-D signal")
    if levels < 1:
        raise ValueError("levels must be >= 1")
    if x.size % (1 << levels) != 0:
        raise ValueError(
            f"signal length {x.size} not divisible by 2**{levels}; reduce levels"
        )
    approx = x
    details = []
    for j in range(levels):
        step = 1 << j
        details.append(_analyze(approx, w.hi_d, step))
        approx = _analyze(approx, w.lo_d, step)
    return SwtDecomposition(levels=levels, approx=approx, details=details)


def swt_reconstruct(d: SwtDecomposition, w: WaveletFilter) -> np.ndarray:
    """Invert :func:`swt_decompose`; exact for unmodified coefficient bands."""
    n = d.approx.size
    for band in d.details:
        if band.size != n:
            raise ValueError(
                f"band length mismatch: approx has {n} samples, detail has {band.size}"
            )
    approx = d.approx
    for j in range(d.levels - 1, -1, -1):
        approx = _synthesize(approx, d.details[j], w, 1 << j)
    return approx


@dataclass(frozen=True)
class AugmentParams:
    """Parameters of the per-band perturbation used for oversampling.

    Each coefficient band is scaled by a gain drawn uniformly from
    ``[gain_low, gain_high]`` and receives Gaussian noise with standard
    deviation ``noise_scale`` times the band RMS.
    """

    gain_low: float = 0.9
    gain_high: float = 1.1
    noise_scale: float = 0.05
    levels: int = 3
    wavelet: str = "db4"
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.gain_low <= self.gain_high):
            raise ValueError("require 0 < gain_low <= gain_high")
        if self.noise_scale < 0.0:
            raise ValueError("noise_scale must be >= 0")
        if self.levels < 1:
            raise ValueError("levels must be >= 1")
        get_wavelet(self.wavelet)


def augment_record(
    samples: np.ndarray, p: AugmentParams, rng: np.random.Generator
) -> np.ndarray:
    """Perturb one multi-lead record in the wavelet domain.

    Leads are processed independently in column order; for each band the gain
    is drawn first, then the additive noise, so a given generator state yields
    a reproducible output.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 2:
        raise ValueError("expected a (time, leads) matrix")
    w = get_wavelet(p.wavelet)
    out = np.empty_like(samples)
    for lead in range(samples.shape[1]):
        dec = swt_decompose(samples[:, lead], w, p.levels)
        perturbed = []
        for band in dec.bands():
            gain = rng.uniform(p.gain_low, p.gain_high)
            sigma = p.noise_scale * float(np.sqrt(np.mean(band * band)))
            perturbed.append(gain * band + rng.normal(0.0, sigma, band.size))
        dec = SwtDecomposition(
            levels=p.levels, approx=perturbed[0], details=perturbed[1:]
        )
        out[:, lead] = swt_reconstruct(dec, w)
    return out


def balance_classes(train, add_per_class: dict, p: AugmentParams):
    """Append augmented copies per class to a training set.

    ``add_per_class`` maps class codes to the number of synthetic records to
    add.  Source records are drawn round-robin over the class's records in
    dataset order, and each new record gets its own generator derived from
    ``(p.seed, class, index)``, so the result is independent of execution
    order.  Originals are never touched; appended records keep the source
    label and fold.
    """
    from .ingest import LabeledDataset

    if not add_per_class:
        return LabeledDataset(
            signals=train.signals.copy(),
            labels=train.labels.copy(),
            folds=train.folds.copy(),
        )
    new_signals = [train.signals]
    new_labels = [train.labels]
    new_folds = [train.folds]
    for cls in sorted(add_per_class):
        code = int(cls)
        count = int(add_per_class[cls])
        src_idx = np.flatnonzero(train.labels == code)
        if src_idx.size == 0:
            raise ValueError(f"class {code} requested for augmentation but absent from training set")
        sigs = np.empty((count,) + train.signals.shape[1:], dtype=np.float64)
        for i in range(count):
            src = src_idx[i % src_idx.size]
            rng = np.random.default_rng([p.seed, code, i])
            sigs[i] = augment_record(train.signals[src], p, rng)
        new_signals.append(sigs)
        new_labels.append(np.full(count, code, dtype=np.int64))
        new_folds.append(train.folds[src_idx[np.arange(count) % src_idx.size]])
    return LabeledDataset(
        signals=np.concatenate(new_signals, axis=0),
        labels=np.concatenate(new_labels, axis=0),
        folds=np.concatenate(new_folds, axis=0),
    )
