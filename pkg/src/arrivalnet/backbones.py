"""Shape-preserving 2-D feature extractors over period grids.

Both backbones map a (B, rows, cols, d) tensor to a tensor of the same shape:

* an inception-style convolution stack (parallel odd kernels summed, GELU,
  then a second summed layer);
* a two-stage windowed attention block (plain windows, then windows shifted
  by half a window with masks that keep wrapped regions apart).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .embedding import uniform_init
from .errors import ConfigError, DimensionError
from .periods import Grid2D
from .tensor import (
    Tensor,
    add,
    as_tensor,
    conv2d_same,
    gelu,
    layer_norm,
    matmul,
    pad,
    reshape,
    roll,
    softmax,
    transpose,
)

MASK_VALUE = -1e9
LN_EPS = 1e-5


def _grid_data(g):
    return g.data if isinstance(g, Grid2D) else as_tensor(g)


def _rewrap(g, data):
    if isinstance(g, Grid2D):
        return Grid2D(data=data, pad_len=g.pad_len, length=g.length)
    return data


# ----------------------------------------------------------------------
# inception
# ----------------------------------------------------------------------

def inception_kernel_sizes(num_kernels):
    return [2 * i + 1 for i in range(num_kernels)]


@dataclass
class InceptionParams:
    layers: list[list[Tensor]]  # two layers, each a list of (k, k, d, d) kernels

    @classmethod
    def init(cls, rng, d_model, num_kernels):
        if num_kernels < 1:
            raise ConfigError(f"num_kernels must be >= 1, got {num_kernels}")
        layers = []
        for _ in range(2):
            layers.append([uniform_init(rng, (k, k, d_model, d_model), k * k * d_model)
                           for k in inception_kernel_sizes(num_kernels)])
        return cls(layers=layers)

    def named_parameters(self, prefix):
        return [(f"{prefix}.layer{li}.k{kern.shape[0]}", kern)
                for li, layer in enumerate(self.layers) for kern in layer]

    def merged_kernels(self):
        """One centre-aligned kernel per layer equal to the sum of that layer's kernels.

        Convolution is linear in the kernel, so convolving with the merged
        kernel equals summing the per-kernel convolutions.
        """
        merged = []
        for layer in self.layers:
            kmax = max(k.shape[0] for k in layer)
            total = None
            for k in layer:
                r = (kmax - k.shape[0]) // 2
                term = pad(k, [(r, r), (r, r), (0, 0), (0, 0)]) if r else k
                total = term if total is None else add(total, term)
            merged.append(total)
        return merged


def inception_forward(g, params, merged=None):
    """Two summed multi-kernel convolution layers with GELU in between."""
    x = _grid_data(g)
    d = params.layers[0][0].shape[2]
    if x.shape[-1] != d:
        raise DimensionError(f"inception expects {d} channels, got {x.shape[-1]}")
    k1, k2 = merged if merged is not None else params.merged_kernels()
    out = conv2d_same(gelu(conv2d_same(x, k1)), k2)
    return _rewrap(g, out)


# ----------------------------------------------------------------------
# windowed attention
# ----------------------------------------------------------------------

def _band_labels(n, window, shift):
    lab = np.zeros(n, dtype=np.int64)
    if shift:
        lab[n - window:n - shift] = 1
        lab[n - shift:] = 2
    return lab


def region_labels(rows, cols, window, shift, valid_rows=None, valid_cols=None):
    """Region id of every cell of the (rolled) padded grid.

    Cells share an id iff they come from the same contiguous region of the
    unshifted grid. Padding cells (beyond ``valid_rows``/``valid_cols`` in the
    unrolled frame) all get the id ``-1``.
    """
    labels = _band_labels(rows, window, shift)[:, None] * 3 + _band_labels(cols, window, shift)[None, :]
    valid_rows = rows if valid_rows is None else valid_rows
    valid_cols = cols if valid_cols is None else valid_cols
    if valid_rows < rows or valid_cols < cols:
        padmask = np.ones((rows, cols), dtype=bool)
        padmask[:valid_rows, :valid_cols] = False
        padmask = np.roll(padmask, (-shift, -shift), axis=(0, 1))
        labels = np.where(padmask, -1, labels)
    return labels


def _windows_of(arr, window):
    rows, cols = arr.shape[:2]
    w = arr.reshape(rows // window, window, cols // window, window)
    return w.transpose(0, 2, 1, 3).reshape(-1, window * window)


def window_masks(rows, cols, window, shift, valid_rows=None, valid_cols=None):
    """Additive masks, one (M*M, M*M) matrix per window, or ``None`` if all zero."""
    labels = region_labels(rows, cols, window, shift, valid_rows, valid_cols)
    per_win = _windows_of(labels, window)
    mask = np.where(per_win[:, :, None] == per_win[:, None, :], 0.0, MASK_VALUE)
    return mask if mask.any() else None


def build_shift_masks(rows, cols, window):
    """Masks for the shifted partition of a grid whose sides are multiples of ``window``."""
    if rows % window or cols % window:
        raise DimensionError(f"grid {rows}x{cols} is not a multiple of window {window}")
    masks = window_masks(rows, cols, window, window // 2)
    n_win = (rows // window) * (cols // window)
    if masks is None:
        masks = np.zeros((n_win, window * window, window * window))
    return list(masks)


@dataclass
class AttentionStage:
    ln1_gain: Tensor
    ln1_bias: Tensor
    wq: Tensor
    wk: Tensor
    wv: Tensor
    wo: Tensor
    ln2_gain: Tensor
    ln2_bias: Tensor
    mlp_w1: Tensor
    mlp_b1: Tensor
    mlp_w2: Tensor
    mlp_b2: Tensor

    @classmethod
    def init(cls, rng, d_model, mlp_ratio=4):
        hidden = mlp_ratio * d_model
        ones = lambda n: Tensor(np.ones(n), requires_grad=True)  # noqa: E731
        zeros = lambda n: Tensor(np.zeros(n), requires_grad=True)  # noqa: E731
        return cls(
            ln1_gain=ones(d_model), ln1_bias=zeros(d_model),
            wq=uniform_init(rng, (d_model, d_model), d_model),
            wk=uniform_init(rng, (d_model, d_model), d_model),
            wv=uniform_init(rng, (d_model, d_model), d_model),
            wo=uniform_init(rng, (d_model, d_model), d_model),
            ln2_gain=ones(d_model), ln2_bias=zeros(d_model),
            mlp_w1=uniform_init(rng, (d_model, hidden), d_model), mlp_b1=zeros(hidden),
            mlp_w2=uniform_init(rng, (hidden, d_model), hidden), mlp_b2=zeros(d_model),
        )

    def named_parameters(self, prefix):
        return [(f"{prefix}.{name}", getattr(self, name)) for name in self.__dataclass_fields__]


@dataclass
class SwinParams:
    stages: list[AttentionStage]  # [plain windows, shifted windows]
    window: int = 2
    heads: int = 1

    @classmethod
    def init(cls, rng, d_model, window=2, heads=1):
        if window < 1:
            raise ConfigError(f"window size must be >= 1, got {window}")
        if d_model % heads:
            raise ConfigError(f"d_model={d_model} not divisible by heads={heads}")
        return cls(stages=[AttentionStage.init(rng, d_model), AttentionStage.init(rng, d_model)],
                   window=window, heads=heads)

    def named_parameters(self, prefix):
        out = []
        for i, stage in enumerate(self.stages):
            out.extend(stage.named_parameters(f"{prefix}.stage{i}"))
        return out


def window_attention(g, stage, window, shifted, heads=1):
    """Self-attention inside non-overlapping ``window`` x ``window`` windows.

    With ``shifted`` the grid is rolled by ``window // 2`` on both axes first,
    attention is masked so only cells of the same original region interact,
    and the result is rolled back. Grids are zero-padded to multiples of the
    window and cropped afterwards; padding cells are masked out as keys.
    """
    x = _grid_data(g)
    unbatched = x.ndim == 3
    if unbatched:
        x = reshape(x, (1,) + x.shape)
    batch, rows, cols, d = x.shape
    m = window
    prow, pcol = -rows % m, -cols % m
    if prow or pcol:
        x = pad(x, [(0, 0), (0, prow), (0, pcol), (0, 0)])
    hp, wp = rows + prow, cols + pcol
    shift = m // 2 if shifted else 0
    if shift:
        x = roll(x, (-shift, -shift), axis=(1, 2))
    mask = window_masks(hp, wp, m, shift, rows, cols)

    n_win = (hp // m) * (wp // m)
    tokens = m * m
    xw = reshape(transpose(reshape(x, (batch, hp // m, m, wp // m, m, d)), (0, 1, 3, 2, 4, 5)),
                 (batch, n_win, tokens, d))
    dh = d // heads

    def split(t):
        return transpose(reshape(t, (batch, n_win, tokens, heads, dh)), (0, 1, 3, 2, 4))

    q, k, v = split(matmul(xw, stage.wq)), split(matmul(xw, stage.wk)), split(matmul(xw, stage.wv))
    scores = matmul(q, transpose(k, (0, 1, 2, 4, 3))) * (1.0 / math.sqrt(dh))
    if mask is not None:
        scores = scores + mask[None, :, None]
    attn = softmax(scores, axis=-1)
    out = transpose(matmul(attn, v), (0, 1, 3, 2, 4))
    out = matmul(reshape(out, (batch, n_win, tokens, d)), stage.wo)

    out = reshape(transpose(reshape(out, (batch, hp // m, wp // m, m, m, d)), (0, 1, 3, 2, 4, 5)),
                  (batch, hp, wp, d))
    if shift:
        out = roll(out, (shift, shift), axis=(1, 2))
    if prow or pcol:
        out = out[:, :rows, :cols, :]
    if unbatched:
        out = out[0]
    return _rewrap(g, out)


def _mlp(x, stage):
    h = gelu(matmul(x, stage.mlp_w1) + stage.mlp_b1)
    return matmul(h, stage.mlp_w2) + stage.mlp_b2


def swin_layer_forward(g, params):
    """Plain-window stage then shifted-window stage, each attention + MLP with pre-norm residuals."""
    x = _grid_data(g)
    for shifted, stage in zip((False, True), params.stages):
        x = window_attention(layer_norm(x, stage.ln1_gain, stage.ln1_bias, LN_EPS),
                             stage, params.window, shifted, params.heads) + x
        x = _mlp(layer_norm(x, stage.ln2_gain, stage.ln2_bias, LN_EPS), stage) + x
    return _rewrap(g, x)
