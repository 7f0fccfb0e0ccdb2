"""Lift the normalised window into model space and stretch it to full length."""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError
from .tensor import Tensor, as_tensor, concat, conv2d_same, matmul, reshape

VALUE_KERNEL_LEN = 3


def uniform_init(rng, shape, fan_in):
    bound = 1.0 / np.sqrt(fan_in)
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)


def positional_encoding(n_past, d_model):
    """Sinusoidal encoding with base ``2 * n_past``; rows are positions 1..n_past."""
    if d_model % 2:
        raise ConfigError(f"d_model must be even for sin/cos pairing, got {d_model}")
    pos = np.arange(1, n_past + 1, dtype=np.float64)[:, None]
    j = np.arange(d_model // 2, dtype=np.float64)[None, :]
    angle = pos / (2.0 * n_past) ** (2.0 * j / d_model)
    pe = np.empty((n_past, d_model))
    pe[:, 0::2] = np.sin(angle)
    pe[:, 1::2] = np.cos(angle)
    return Tensor(pe)


@dataclass
class EmbeddingParams:
    value_kernel: Tensor   # (3, C + N_c, d_model)
    align_weights: Tensor  # (N_p + N_f, N_p)

    @classmethod
    def init(cls, rng, in_channels, d_model, n_past, n_future):
        if d_model % 2:
            raise ConfigError(f"d_model must be even, got {d_model}")
        return cls(
            value_kernel=uniform_init(rng, (VALUE_KERNEL_LEN, in_channels, d_model),
                                      VALUE_KERNEL_LEN * in_channels),
            align_weights=uniform_init(rng, (n_past + n_future, n_past), n_past),
        )

    @property
    def d_model(self):
        return self.value_kernel.shape[2]

    @property
    def n_past(self):
        return self.align_weights.shape[1]

    @property
    def n_future(self):
        return self.align_weights.shape[0] - self.align_weights.shape[1]

    def named_parameters(self, prefix="embed"):
        return [(f"{prefix}.value_kernel", self.value_kernel),
                (f"{prefix}.align_weights", self.align_weights)]


def value_encoding(f1d, params):
    """Length-3 temporal convolution lifting (N_p, C+N_c) to (N_p, d_model)."""
    f1d = as_tensor(f1d)
    k = params.value_kernel
    if f1d.shape[-1] != k.shape[1]:
        raise DimensionError(f"value encoding expects {k.shape[1]} channels, got {f1d.shape[-1]}")
    kernel = reshape(k, (1,) + k.shape)
    if f1d.ndim == 2:
        return conv2d_same(reshape(f1d, (1,) + f1d.shape), kernel)[0]
    batch, n, c = f1d.shape
    out = conv2d_same(reshape(f1d, (batch, 1, n, c)), kernel)
    return reshape(out, (batch, n, k.shape[2]))


def embed(window_norm, context, params):
    """Positional + value encoding, then a temporal linear map N_p -> N_p + N_f.

    ``window_norm`` is (N_p, C) or (B, N_p, C); ``context`` is the matching
    (..., N_p, N_c) broadcast of the static flags, or ``None`` when context is
    disabled.
    """
    window_norm = as_tensor(window_norm)
    if context is not None:
        context = as_tensor(context)
        if context.shape[:-1] != window_norm.shape[:-1]:
            raise DimensionError(f"context {context.shape} does not align with window {window_norm.shape}")
        f1d = concat([window_norm, context], axis=-1)
    else:
        f1d = window_norm
    n_past = f1d.shape[-2]
    if n_past != params.n_past:
        raise DimensionError(f"embedding built for N_p={params.n_past}, got {n_past}")
    pe = positional_encoding(n_past, params.d_model)
    return matmul(params.align_weights, value_encoding(f1d, params) + pe)
