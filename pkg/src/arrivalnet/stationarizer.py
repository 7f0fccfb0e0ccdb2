"""Parameter-free per-window normalisation and its inverse."""

from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .tensor import Tensor, as_tensor

EPS = 1e-5


@dataclass(frozen=True)
class NormStats:
    """Per-channel statistics of one (or a batch of) past window(s).

    ``sigma`` already includes the epsilon floor, so it is what the window
    was divided by. Arrays have shape (C,) or (B, C).
    """

    mu: np.ndarray
    sigma: np.ndarray

    @property
    def channel_count(self):
        return self.mu.shape[-1]


def normalize(window, eps=EPS):
    """Standardise each channel over the time axis (population variance).

    ``window`` is (N_p, C) or (B, N_p, C). Returns the normalised tensor and
    the statistics needed by :func:`denormalize`.
    """
    x = window.data if isinstance(window, Tensor) else np.asarray(window, dtype=np.float64)
    if x.ndim < 2 or x.shape[-2] < 2:
        raise ContractError(f"normalize needs at least 2 time steps, got shape {x.shape}")
    mu = x.mean(axis=-2)
    # the float mean of identical values can be off by an ulp; pin it so constant channels map to exact zeros
    const = np.all(x == x[..., :1, :], axis=-2)
    mu = np.where(const, x[..., 0, :], mu)
    sigma = np.maximum(x.std(axis=-2), eps)
    out = (x - mu[..., None, :]) / sigma[..., None, :]
    return Tensor(out), NormStats(mu=mu, sigma=sigma)


def denormalize(pred, stats, channel):
    """Map a normalised prediction back to channel units: ``sigma * pred + mu``.

    ``pred`` is (N_f,) for unbatched stats or (B, N_f) for batched stats.
    Differentiable in ``pred``.
    """
    if not 0 <= channel < stats.channel_count:
        raise IndexError(f"channel {channel} out of range for {stats.channel_count} channels")
    sigma = stats.sigma[..., channel]
    mu = stats.mu[..., channel]
    if np.ndim(sigma):
        sigma, mu = sigma[:, None], mu[:, None]
    return as_tensor(pred) * sigma + mu
