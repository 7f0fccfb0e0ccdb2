"""Command-line interface: simulate, train, evaluate, predict, inspect periods, export link delays."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .data import load_dataset, save_sequences
from .errors import ArrivalNetError, ConfigError
from .metrics import evaluate, evaluate_persistence, link_delay_export
from .model import ModelConfig
from .periods import detect_periods
from .samples import Batch
from .sim import SimParams, simulate_dataset
from .stationarizer import normalize
from .tensor import no_grad
from .training import train

log = logging.getLogger("arrivalnet")


def _seed(text):
    value = int(text)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text}")
    return value


def load_config(path):
    if path is None:
        return ModelConfig()
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return ModelConfig.from_dict(raw)


def _write_text(out, text):
    if out is None or str(out) == "-":
        sys.stdout.write(text)
        return
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text, encoding="utf-8")
    log.info("wrote %s", out)


def _samples_for(model, path):
    return load_dataset(path, model.cfg.n_past, model.cfg.n_future)


def cmd_simulate(args):
    params = SimParams(clip_negative=args.clip_negative)
    result = simulate_dataset(args.seed, n_routes=args.routes, stops_per_route=args.stops,
                              n_days=args.days, profile=args.profile, params=params)
    out = args.out or "runs/dataset.jsonl"
    save_sequences(out, result.sequences)
    print(f"{len(result.sequences)} trip sequences -> {out} ({result.dropped} stops dropped)")
    return 0


def cmd_train(args):
    cfg = load_config(args.config)
    samples = load_dataset(args.data, cfg.n_past, cfg.n_future)
    result = train(cfg, samples, seed=args.seed)
    out = Path(args.out or "runs/model.ckpt")
    save_checkpoint(result.model, out)
    history = out.with_suffix(".history.json")
    history.write_text(json.dumps({"best_epoch": result.best_epoch, "epochs": result.history}, indent=2))
    print(f"best epoch {result.best_epoch}; checkpoint -> {out}; history -> {history}")
    return 0


def cmd_evaluate(args):
    model = load_checkpoint(args.checkpoint)
    samples = _samples_for(model, args.data)
    report = evaluate(model, samples)
    summary = {"model": report.to_dict()}
    if args.baseline and samples:
        summary["persistence"] = evaluate_persistence(samples).to_dict()
    if args.out:
        report.write_csv(args.out)
        log.info("metrics csv -> %s", args.out)
    print(json.dumps(summary, indent=2))
    return 0


def cmd_predict(args):
    model = load_checkpoint(args.checkpoint)
    samples = _samples_for(model, args.data)
    delays = model.predict_delays(samples) if samples else np.zeros((0, model.cfg.n_future))
    lines = []
    for s, d in zip(samples, delays):
        rec = {"route_id": s.route_id, "trip_id": s.trip_id, "start": s.start,
               "pred_delay_s": [float(v) for v in d]}
        if s.future_scheduled is not None:
            rec["pred_arrival_s"] = [float(v) for v in d + s.future_scheduled]
        lines.append(json.dumps(rec) + "\n")
    _write_text(args.out, "".join(lines))
    return 0


def cmd_inspect_periods(args):
    if args.checkpoint:
        model = load_checkpoint(args.checkpoint)
        cfg = model.cfg
    else:
        model, cfg = None, load_config(args.config)
    samples = load_dataset(args.data, cfg.n_past, cfg.n_future)
    if not 0 <= args.index < len(samples):
        raise ConfigError(f"sample index {args.index} out of range ({len(samples)} samples)")
    sample = samples[args.index]
    if model is None:
        # raw normalised past window
        x, _ = normalize(sample.past)
        k = min(cfg.top_k, sample.n_past // 2)
        source = "normalised past window"
    else:
        batch = Batch.from_samples([sample])
        with no_grad():
            x, _ = model.encode(batch.past, batch.context)
        x = x.data[0]
        k = cfg.top_k
        source = "embedded input of the first block"
    decomposition = detect_periods(x, k)
    out = {"route_id": sample.route_id, "trip_id": sample.trip_id, "start": sample.start,
           "source": source, **decomposition.to_dict()}
    _write_text(args.out, json.dumps(out, indent=2) + "\n")
    return 0


def cmd_export_link_delays(args):
    model = load_checkpoint(args.checkpoint)
    samples = _samples_for(model, args.data)
    out = args.out or "runs/link_delays.csv"
    rows, skipped = link_delay_export(model, samples, out)
    print(f"{len(rows)} links -> {out} ({skipped} samples without identifiers skipped)")
    return 0


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="model config JSON (fields of ModelConfig)")
    common.add_argument("--seed", type=_seed, default=0, help="random seed (default 0)")
    common.add_argument("--out", help="output path")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress")

    parser = argparse.ArgumentParser(prog="arrivalnet", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="generate a synthetic JSONL dataset")
    p.add_argument("--profile", choices=("tram", "bus"), default="tram")
    p.add_argument("--routes", type=int, default=8)
    p.add_argument("--stops", type=int, default=30, help="stops per route")
    p.add_argument("--days", type=int, default=2, help="service days to simulate")
    p.add_argument("--clip-negative", action="store_true", help="set negative delays to zero")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", parents=[common], help="train a model and write a checkpoint")
    p.add_argument("--data", required=True, help="JSONL dataset")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", parents=[common], help="RMSE/MAE/MAPE on a dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--baseline", action="store_true", help="also report the persistence baseline")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", parents=[common], help="write per-window forecasts as JSONL")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("inspect-periods", parents=[common], help="dominant periods of one window")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", help="inspect the model's embedded input instead of raw features")
    p.add_argument("--index", type=int, default=0, help="sample index (default 0)")
    p.set_defaults(func=cmd_inspect_periods)

    p = sub.add_parser("export-link-delays", parents=[common], help="per-link mean delays as CSV")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_export_link_delays)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ArrivalNetError, ValueError, OSError) as exc:
        print(f"arrivalnet {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
