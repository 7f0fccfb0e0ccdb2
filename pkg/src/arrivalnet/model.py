"""The arrival-time forecaster: embedding, stacked 2-D period blocks, output head."""

from __future__ import annotations

import dataclasses
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from .backbones import InceptionParams, SwinParams, inception_forward, swin_layer_forward
from .embedding import EmbeddingParams, embed
from .errors import ConfigError, ContractError, NumericalError
from .periods import to_1d, to_2d, top_k_frequencies
from .samples import DELAY_CHANNEL, N_CONTEXT, N_FEATURES, Batch, SequenceSample
from .stationarizer import denormalize, normalize
from .tensor import (
    Tensor,
    concat,
    dft_amplitude,
    matmul,
    no_grad,
    reshape,
    scatter_add,
    softmax,
    take,
)

BACKBONES = ("inception", "swin")


@dataclass
class ModelConfig:
    d_model: int = 16
    num_blocks: int = 2
    top_k: int = 3
    num_kernels: int = 6
    n_past: int = 10
    n_future: int = 5
    window_size: int = 2
    heads: int = 1
    backbone: str = "inception"
    context_enabled: bool = True
    learning_rate: float = 0.001
    batch_size: int = 32
    epochs: int = 10
    patience: int = 3

    def __post_init__(self):
        self.validate()

    def validate(self):
        t = self.n_past + self.n_future
        if self.n_past < 2:
            raise ConfigError(f"n_past must be >= 2, got {self.n_past}")
        if self.n_future < 1:
            raise ConfigError(f"n_future must be >= 1, got {self.n_future}")
        if not 1 <= self.top_k <= t // 2:
            raise ConfigError(f"top_k={self.top_k} outside [1, {t // 2}] for sequence length {t}")
        if self.d_model < 2 or self.d_model % 2:
            raise ConfigError(f"d_model must be a positive even number, got {self.d_model}")
        if self.backbone not in BACKBONES:
            raise ConfigError(f"backbone must be one of {BACKBONES}, got {self.backbone!r}")
        if self.num_blocks < 1 or self.num_kernels < 1 or self.window_size < 1:
            raise ConfigError("num_blocks, num_kernels and window_size must be >= 1")
        if self.d_model % self.heads:
            raise ConfigError(f"d_model={self.d_model} not divisible by heads={self.heads}")
        if self.batch_size < 1 or self.epochs < 1 or self.learning_rate <= 0:
            raise ConfigError("batch_size, epochs and learning_rate must be positive")

    @property
    def seq_len(self):
        return self.n_past + self.n_future

    @property
    def in_channels(self):
        return N_FEATURES + (N_CONTEXT if self.context_enabled else 0)

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**d)


@dataclass
class BlockParams:
    backbone: InceptionParams | SwinParams

    def named_parameters(self, prefix):
        return self.backbone.named_parameters(prefix)


def block_forward(x, cfg, params):
    """One residual 2-D period block.

    For each sample the ``top_k`` dominant periods of ``x`` are found, the
    sequence is folded into a grid per period, passed through the backbone,
    unfolded, and the branches are mixed with softmax(amplitude) weights.
    Samples sharing a period are run through the backbone together.
    ``x`` is (T, d) or (B, T, d).
    """
    unbatched = x.ndim == 2
    if unbatched:
        x = reshape(x, (1,) + x.shape)
    batch, t, d = x.shape
    k = cfg.top_k
    n_freq = t // 2
    amp = dft_amplitude(x, n_freq)                     # (B, F), differentiable
    freqs = top_k_frequencies(amp.data, k)             # (B, k), 1-based
    flat_idx = (np.arange(batch)[:, None] * n_freq + freqs - 1).reshape(-1)
    weights = softmax(reshape(take(reshape(amp, (batch * n_freq,)), flat_idx), (batch, k)), axis=-1)
    weights = reshape(weights, (batch * k,))
    periods = t // freqs

    merged = params.backbone.merged_kernels() if cfg.backbone == "inception" else None
    outs, owners, slots = [], [], []
    for p in np.unique(periods):
        rows_b, cols_j = np.nonzero(periods == p)
        grid = to_2d(take(x, rows_b, axis=0), int(p))
        if cfg.backbone == "inception":
            grid = inception_forward(grid, params.backbone, merged)
        else:
            grid = swin_layer_forward(grid, params.backbone)
        outs.append(to_1d(grid, t))
        owners.append(rows_b)
        slots.append(rows_b * k + cols_j)
    branch = concat(outs, axis=0) if len(outs) > 1 else outs[0]
    w = take(weights, np.concatenate(slots))
    mixed = scatter_add(branch * reshape(w, (-1, 1, 1)), np.concatenate(owners), batch)
    out = mixed + x
    return out[0] if unbatched else out


class ArrivalNet:
    """Model parameters plus the forward pass.

    Parameters are float64 :class:`Tensor` leaves held in a fixed order so
    checkpoints are canonical.
    """

    def __init__(self, cfg=None, seed=0):
        self.cfg = cfg or ModelConfig()
        rng = np.random.default_rng(seed)
        c = self.cfg
        self.embedding = EmbeddingParams.init(rng, c.in_channels, c.d_model, c.n_past, c.n_future)
        self.blocks = []
        for _ in range(c.num_blocks):
            if c.backbone == "inception":
                bb = InceptionParams.init(rng, c.d_model, c.num_kernels)
            else:
                bb = SwinParams.init(rng, c.d_model, c.window_size, c.heads)
            self.blocks.append(BlockParams(bb))
        self.head_weight = Tensor(np.zeros((c.d_model, 1)), requires_grad=True)
        self.head_bias = Tensor(np.zeros(1), requires_grad=True)

    # -- parameters ----------------------------------------------------
    def named_parameters(self):
        out = OrderedDict(self.embedding.named_parameters("embed"))
        for i, block in enumerate(self.blocks):
            out.update(block.named_parameters(f"blocks.{i}"))
        out["head.weight"] = self.head_weight
        out["head.bias"] = self.head_bias
        return out

    def parameters(self):
        return list(self.named_parameters().values())

    def num_parameters(self):
        return sum(p.size for p in self.parameters())

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None

    def load_state(self, state):
        params = self.named_parameters()
        if list(state) != list(params):
            raise ContractError("parameter names/order do not match the model configuration")
        for name, value in state.items():
            value = np.asarray(value, dtype=np.float64)
            if value.shape != params[name].shape:
                raise ContractError(f"parameter {name}: shape {value.shape} != {params[name].shape}")
            params[name].data = value.copy()

    # -- forward -------------------------------------------------------
    def encode(self, past, context):
        """Normalise and embed; returns the (B, T, d) representation and stats."""
        window, stats = normalize(past)
        ctx = None
        if self.cfg.context_enabled:
            ctx = np.broadcast_to(context[:, None, :], past.shape[:2] + (N_CONTEXT,))
        return embed(window, ctx, self.embedding), stats

    def forward_normalized(self, past, context):
        """Normalised-space delay predictions (B, N_f) and the window stats."""
        x, stats = self.encode(past, context)
        for block in self.blocks:
            x = block_forward(x, self.cfg, block)
        y = matmul(x, self.head_weight) + self.head_bias      # (B, T, 1)
        y = reshape(y, y.shape[:2])[:, self.cfg.n_past:]
        return y, stats

    def forward(self, batch):
        """Predicted delays in seconds, (B, N_f)."""
        self._check_batch(batch)
        y, stats = self.forward_normalized(batch.past, batch.context)
        out = denormalize(y, stats, DELAY_CHANNEL)
        if not np.all(np.isfinite(out.data)):
            raise NumericalError("model produced non-finite delay predictions")
        return out

    def predict_delays(self, samples, batch_size=256):
        if isinstance(samples, SequenceSample):
            return self.predict_delays([samples])[0]
        chunks = []
        with no_grad():
            for i in range(0, len(samples), batch_size):
                chunks.append(self.forward(Batch.from_samples(samples[i:i + batch_size])).data)
        if not chunks:
            return np.zeros((0, self.cfg.n_future))
        return np.concatenate(chunks, axis=0)

    def _check_batch(self, batch):
        n_p, n_f = self.cfg.n_past, self.cfg.n_future
        if batch.past.shape[1:] != (n_p, N_FEATURES):
            raise ContractError(f"past window shape {batch.past.shape[1:]} != ({n_p}, {N_FEATURES})")
        if batch.future_delays.shape[1] != n_f:
            raise ContractError(f"sample has N_f={batch.future_delays.shape[1]}, model expects {n_f}")


def model_forward(sample, cfg, params):
    """Delay forecast (N_f,) for one sample with an existing model ``params``."""
    if params.cfg != cfg:
        raise ContractError("model was built with a different configuration")
    return params.predict_delays(sample)


def predict_arrivals(sample, cfg, params):
    """Forecast arrival times: predicted delay plus scheduled arrival."""
    if sample.future_scheduled is None:
        raise ContractError("sample has no scheduled arrival times")
    return model_forward(sample, cfg, params) + np.asarray(sample.future_scheduled, dtype=np.float64)


def persistence_forecast(samples):
    """Baseline: last observed delay repeated over the horizon, (B, N_f)."""
    return np.stack([np.full(s.n_future, s.past[-1, DELAY_CHANNEL]) for s in samples])
