"""Training loop: Adam on normalised-space MSE with a seeded train/test split."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, NumericalError
from .model import ArrivalNet
from .samples import DELAY_CHANNEL, Batch
from .tensor import backward, mean, no_grad

log = logging.getLogger(__name__)

TEST_FRACTION = 0.1
# Windows whose past delay barely moves (e.g. all clipped to zero) have a tiny
# sigma; the loss weight of such samples is capped as if sigma were 1 s.
LOSS_SIGMA_FLOOR_S = 1.0


class Adam:
    """Adam with bias correction over a fixed list of parameter tensors."""

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]
        self.t = 0

    def step(self):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                continue
            g = p.grad
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.data = p.data - self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def zero_grad(self):
        for p in self.params:
            p.grad = None


def normalized_targets(batch, stats):
    """Future delays in the past window's normalised delay units, plus loss weights."""
    mu = stats.mu[:, DELAY_CHANNEL][:, None]
    sigma = stats.sigma[:, DELAY_CHANNEL][:, None]
    target = (batch.future_delays - mu) / sigma
    weight = sigma / np.maximum(sigma, LOSS_SIGMA_FLOOR_S)
    return target, weight


def batch_loss(model, batch):
    """Mean squared error between normalised predictions and targets."""
    model._check_batch(batch)
    pred, stats = model.forward_normalized(batch.past, batch.context)
    target, weight = normalized_targets(batch, stats)
    resid = (pred - target) * weight
    return mean(resid * resid)


def _checked(loss, where):
    value = float(loss.data)
    if not math.isfinite(value):
        raise NumericalError(f"non-finite loss ({value}) at {where}")
    return value


def split_indices(n, seed, test_fraction=TEST_FRACTION):
    """Seeded random split into (train, test) index arrays."""
    if n < 2:
        raise ContractError(f"training needs at least 2 samples, got {n}")
    perm = np.random.default_rng(seed).permutation(n)
    n_test = min(n - 1, max(1, int(round(test_fraction * n))))
    return np.sort(perm[n_test:]), np.sort(perm[:n_test])


def dataset_loss(model, samples, batch_size=256):
    """Sample-weighted mean normalised MSE over ``samples`` (no graph)."""
    total = 0.0
    with no_grad():
        for i in range(0, len(samples), batch_size):
            chunk = samples[i:i + batch_size]
            total += _checked(batch_loss(model, Batch.from_samples(chunk)), "evaluation") * len(chunk)
    return total / len(samples)


@dataclass
class TrainResult:
    model: ArrivalNet
    history: list[dict] = field(default_factory=list)
    best_epoch: int = 0
    train_idx: np.ndarray | None = None
    test_idx: np.ndarray | None = None


def train(cfg, samples, seed=0):
    """Train a fresh model on ``samples``; returns the best-on-test model.

    Each epoch shuffles the training part with the seeded generator, takes
    Adam steps over mini-batches and evaluates the test loss. Training stops
    after ``cfg.patience`` epochs without test improvement.
    """
    train_idx, test_idx = split_indices(len(samples), seed)
    model = ArrivalNet(cfg, seed=seed)
    opt = Adam(model.parameters(), lr=cfg.learning_rate)
    rng = np.random.default_rng(seed + 1)
    train_set = [samples[i] for i in train_idx]
    test_set = [samples[i] for i in test_idx]
    log.info("split: %d train / %d test samples", len(train_set), len(test_set))

    best = (math.inf, 0, [p.data.copy() for p in model.parameters()])
    history, stale = [], 0
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(train_set))
        running, seen = 0.0, 0
        for start in range(0, len(order), cfg.batch_size):
            chunk = [train_set[i] for i in order[start:start + cfg.batch_size]]
            opt.zero_grad()
            loss = batch_loss(model, Batch.from_samples(chunk))
            running += _checked(loss, f"epoch {epoch}, batch {start // cfg.batch_size}") * len(chunk)
            seen += len(chunk)
            backward(loss)
            opt.step()
        test_loss = dataset_loss(model, test_set)
        history.append({"epoch": epoch, "train_loss": running / seen, "test_loss": test_loss})
        log.info("epoch %d  train %.5f  test %.5f", epoch, running / seen, test_loss)
        if test_loss < best[0]:
            best = (test_loss, epoch, [p.data.copy() for p in model.parameters()])
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                log.info("early stop after %d epochs without improvement", stale)
                break
    for p, data in zip(model.parameters(), best[2]):
        p.data = data
    return TrainResult(model=model, history=history, best_epoch=best[1],
                       train_idx=train_idx, test_idx=test_idx)


def fit_steps(model, samples, steps, lr=None, stop_below=None):
    """Full-batch Adam steps on a fixed sample set; returns the loss per step.

    Entry ``i`` is the loss before update ``i``; the final entry is the loss
    after the last update. With ``stop_below`` the loop ends as soon as the
    loss drops under that value.
    """
    batch = Batch.from_samples(samples)
    opt = Adam(model.parameters(), lr=lr or model.cfg.learning_rate)
    losses = []
    for step in range(steps):
        opt.zero_grad()
        loss = batch_loss(model, batch)
        losses.append(_checked(loss, f"step {step}"))
        if stop_below is not None and losses[-1] < stop_below:
            return losses
        backward(loss)
        opt.step()
    with no_grad():
        losses.append(_checked(batch_loss(model, batch), "final step"))
    return losses

