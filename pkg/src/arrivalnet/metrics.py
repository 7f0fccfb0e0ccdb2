"""Arrival-time error metrics, evaluation and per-link delay export."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ContractError
from .model import persistence_forecast
from .samples import DELAY_CHANNEL

MAPE_MIN_ARRIVAL_S = 1.0


@dataclass
class StepMetrics:
    step: int
    rmse_s: float
    mae_s: float
    mape_pct: float
    mae_quartiles: tuple[float, float, float, float, float]  # min, q1, median, q3, max


@dataclass
class MetricsReport:
    rmse_s: float
    mae_s: float
    mape_pct: float
    n_samples: int
    steps: list[StepMetrics] = field(default_factory=list)
    mape_excluded: int = 0  # horizon steps with |arrival| < 1 s left out of MAPE

    def to_dict(self):
        return {
            "rmse_s": self.rmse_s,
            "mae_s": self.mae_s,
            "mape_pct": self.mape_pct,
            "n_samples": self.n_samples,
            "mape_excluded": self.mape_excluded,
            "steps": [{"step": s.step, "rmse_s": s.rmse_s, "mae_s": s.mae_s, "mape_pct": s.mape_pct,
                       "mae_quartiles": list(s.mae_quartiles)} for s in self.steps],
        }

    def write_csv(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "rmse_s", "mae_s", "mape_pct"])
            for s in self.steps:
                w.writerow([s.step, repr(s.rmse_s), repr(s.mae_s), repr(s.mape_pct)])
            w.writerow(["aggregate", repr(self.rmse_s), repr(self.mae_s), repr(self.mape_pct)])
        return path


def compute_metrics(pred_arrivals, true_arrivals):
    """RMSE / MAE / MAPE of (B, N_f) arrival-time arrays.

    Aggregates average over the horizon inside each sample first, then over
    samples. Per-step values average over samples at that step.
    """
    pred = np.asarray(pred_arrivals, dtype=np.float64)
    true = np.asarray(true_arrivals, dtype=np.float64)
    if pred.shape != true.shape or pred.ndim != 2:
        raise ContractError(f"prediction {pred.shape} and truth {true.shape} must be equal (B, N_f)")
    n, horizon = pred.shape
    if n == 0:
        nan = float("nan")
        return MetricsReport(rmse_s=nan, mae_s=nan, mape_pct=nan, n_samples=0)
    err = true - pred
    abs_err = np.abs(err)
    valid = np.abs(true) >= MAPE_MIN_ARRIVAL_S
    pct = np.where(valid, 100.0 * abs_err / np.where(valid, np.abs(true), 1.0), 0.0)

    sample_rmse = np.sqrt((err ** 2).mean(axis=1))
    sample_mae = abs_err.mean(axis=1)
    n_valid = valid.sum(axis=1)
    has_valid = n_valid > 0
    sample_mape = pct.sum(axis=1)[has_valid] / n_valid[has_valid]

    steps = []
    for t in range(horizon):
        col_valid = valid[:, t]
        steps.append(StepMetrics(
            step=t + 1,
            rmse_s=float(np.sqrt((err[:, t] ** 2).mean())),
            mae_s=float(abs_err[:, t].mean()),
            mape_pct=float(pct[col_valid, t].mean()) if col_valid.any() else float("nan"),
            mae_quartiles=tuple(float(q) for q in np.percentile(abs_err[:, t], [0, 25, 50, 75, 100])),
        ))
    report = MetricsReport(
        rmse_s=float(sample_rmse.mean()),
        mae_s=float(sample_mae.mean()),
        mape_pct=float(sample_mape.mean()) if sample_mape.size else float("nan"),
        n_samples=n,
        steps=steps,
        mape_excluded=int((~valid).sum()),
    )
    tol = 1e-9 * max(1.0, report.rmse_s)
    assert report.mae_s <= report.rmse_s + tol, "MAE exceeds RMSE"
    assert all(s.mae_s <= s.rmse_s + tol for s in steps), "per-step MAE exceeds RMSE"
    return report


def _arrivals(samples, delays):
    if any(s.future_scheduled is None for s in samples):
        raise ContractError("evaluation needs scheduled arrival times on every sample")
    sched = np.stack([s.future_scheduled for s in samples])
    true = sched + np.stack([s.future_delays for s in samples])
    return sched + delays, true


def evaluate(model, samples):
    """Metrics of ``model`` on ``samples``, computed on arrival times."""
    cfg = model.cfg
    for s in samples:
        if s.n_past != cfg.n_past or s.n_future != cfg.n_future:
            raise ContractError(f"sample window {s.n_past}->{s.n_future} does not match "
                                f"model {cfg.n_past}->{cfg.n_future}")
    if not samples:
        return compute_metrics(np.zeros((0, cfg.n_future)), np.zeros((0, cfg.n_future)))
    pred, true = _arrivals(samples, model.predict_delays(samples))
    return compute_metrics(pred, true)


def evaluate_persistence(samples):
    """Metrics of the last-delay-carried-forward baseline."""
    pred, true = _arrivals(samples, persistence_forecast(samples))
    return compute_metrics(pred, true)


def link_delays(cumulative, initial=0.0):
    """Successive differences of cumulative delays, starting from ``initial``."""
    cum = np.asarray(cumulative, dtype=np.float64)
    return np.diff(np.concatenate([[initial], cum]))


def link_delay_table(samples, pred_delays):
    """Per-link mean ground-truth and predicted link delays.

    Returns ``(rows, skipped)`` where rows are ``(link_id, n, gt_mean_s,
    pred_mean_s)`` sorted by link id and ``skipped`` counts samples without
    route/link identifiers.
    """
    sums = {}
    skipped = 0
    for s, pred in zip(samples, pred_delays):
        ids = s.link_ids()
        if ids is None:
            skipped += 1
            continue
        prev = s.past[-1, DELAY_CHANNEL]
        gt = link_delays(s.future_delays, prev)
        pr = link_delays(pred, prev)
        for lid, g, p in zip(ids, gt, pr):
            acc = sums.setdefault(lid, [0, 0.0, 0.0])
            acc[0] += 1
            acc[1] += g
            acc[2] += p
    rows = [(lid, n, g / n, p / n) for lid, (n, g, p) in sorted(sums.items())]
    return rows, skipped


def link_delay_export(model, samples, out_path):
    """Write ``link_id,n,gt_mean_s,pred_mean_s`` for every link seen in ``samples``."""
    preds = model.predict_delays(samples) if samples else np.zeros((0, model.cfg.n_future))
    rows, skipped = link_delay_table(samples, preds)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["link_id", "n", "gt_mean_s", "pred_mean_s"])
        for lid, n, g, p in rows:
            w.writerow([lid, n, repr(float(g)), repr(float(p))])
    return rows, skipped
