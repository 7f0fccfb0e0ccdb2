"""Frequency-domain period detection and 1-D <-> 2-D period grids."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConfigError, ContractError
from .tensor import Tensor, as_tensor, dft_amplitude, pad, reshape

DEFAULT_TOP_K = 3


@dataclass(frozen=True)
class PeriodEntry:
    frequency: int
    period: int
    amplitude: float


@dataclass(frozen=True)
class PeriodDecomposition:
    entries: tuple[PeriodEntry, ...]
    length: int

    @property
    def frequencies(self):
        return [e.frequency for e in self.entries]

    @property
    def periods(self):
        return [e.period for e in self.entries]

    @property
    def amplitudes(self):
        return [e.amplitude for e in self.entries]

    def to_dict(self):
        return {
            "T": self.length,
            "entries": [{"frequency": e.frequency, "period": e.period, "amplitude": e.amplitude}
                        for e in self.entries],
        }


@dataclass
class Grid2D:
    """A (rows, cols, channels) view of a zero-padded sequence.

    ``data`` may carry a leading batch axis: (B, rows, cols, channels).
    """

    data: Tensor
    pad_len: int
    length: int = field(default=0)

    @property
    def rows(self):
        return self.data.shape[-3]

    @property
    def cols(self):
        return self.data.shape[-2]

    @property
    def channels(self):
        return self.data.shape[-1]


def _as_array(x):
    return x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)


def amplitude_spectrum(x):
    """Channel-averaged DFT magnitude for bins 1..floor(T/2) (DC excluded).

    ``x`` is (T, d) or (B, T, d). Plain-array in, plain-array out; use
    :func:`arrivalnet.tensor.dft_amplitude` for the differentiable version.
    """
    xd = _as_array(x)
    t = xd.shape[-2]
    if t < 4:
        raise ContractError(f"amplitude_spectrum needs T >= 4, got {t}")
    batched = xd.ndim == 3
    re, im = kernels.dft_parts(xd if batched else xd[None], t // 2)
    amp = np.sqrt(re * re + im * im).mean(axis=-1)
    return amp if batched else amp[0]


def top_k_frequencies(amp, k):
    """Indices (1-based frequencies) of the k largest amplitudes.

    Sorted by descending amplitude; ties go to the lower frequency.
    ``amp`` is (F,) or (B, F); the result has shape (k,) or (B, k).
    """
    amp = np.asarray(amp)
    # stable sort on -amp keeps ascending frequency order among equal values
    order = np.argsort(-amp, axis=-1, kind="stable")[..., :k]
    return order + 1


def detect_periods(x, k=DEFAULT_TOP_K):
    """Top-k dominant frequencies of an unbatched (T, d) sequence."""
    xd = _as_array(x)
    t = xd.shape[0]
    if not 1 <= k <= t // 2:
        raise ConfigError(f"k={k} outside [1, {t // 2}] for T={t}")
    amp = amplitude_spectrum(xd)
    freqs = top_k_frequencies(amp, k)
    entries = tuple(PeriodEntry(int(f), t // int(f), float(amp[f - 1])) for f in freqs)
    return PeriodDecomposition(entries=entries, length=t)


def grid_shape(length, period):
    rows = math.ceil(length / period)
    return rows, rows * period - length


def to_2d(x, p):
    """Zero-pad to a multiple of ``p`` and fold row-major into (rows, p, d).

    Accepts (T, d) or (B, T, d) and keeps the batch axis.
    """
    x = as_tensor(x)
    t = x.shape[-2]
    if not 1 <= p <= t:
        raise ContractError(f"period {p} outside [1, {t}]")
    rows, pad_len = grid_shape(t, p)
    if pad_len:
        widths = [(0, 0)] * x.ndim
        widths[-2] = (0, pad_len)
        x = pad(x, widths)
    shape = x.shape[:-2] + (rows, p, x.shape[-1])
    return Grid2D(data=reshape(x, shape), pad_len=pad_len, length=t)


def to_1d(g, length):
    """Flatten a grid row-major and drop the padding tail."""
    data = g.data if isinstance(g, Grid2D) else as_tensor(g)
    rows, cols, d = data.shape[-3:]
    if length > rows * cols:
        raise ContractError(f"length {length} exceeds grid capacity {rows}x{cols}")
    flat = reshape(data, data.shape[:-3] + (rows * cols, d))
    if length == rows * cols:
        return flat
    return flat[..., :length, :]


def spectral_weights(x, n_freq):
    """Differentiable amplitude spectrum (bins 1..n_freq) for the aggregation weights."""
    return dft_amplitude(x, n_freq)
