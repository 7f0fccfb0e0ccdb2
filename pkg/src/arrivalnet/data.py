"""JSONL dataset persistence.

One trip sequence per line::

    {"route_id": str, "trip_id": str,
     "stops": [{"s_km": f, "t_sched_s": f, "delay_s": f, "signal": 0|1, "t_mean_s": f}, ...],
     "peak": 0|1, "weekday": 0|1, "sched_arrivals_s": [f, ...],
     "first_stop": int}            # optional, default 1

Windows are cut at load time from N_p/N_f.
"""

from __future__ import annotations

import json
import logging
import math
from pathlib import Path

from .errors import FormatError
from .samples import FEATURES, StopRecord, TripSequence
from .sim import build_windows

log = logging.getLogger(__name__)

MAX_REJECT_FRACTION = 0.10
_REQUIRED = ("route_id", "trip_id", "stops", "peak", "weekday", "sched_arrivals_s")


def _flag(value, name):
    if isinstance(value, str) or value not in (0, 1):
        raise ValueError(f"{name} must be 0 or 1, got {value!r}")
    return int(value)


def _number(value, name):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ValueError(f"{name} must be a finite number, got {value!r}")
    return float(value)


def parse_sequence(obj):
    """Validate one decoded JSON object; raises ``ValueError`` with a reason."""
    if not isinstance(obj, dict):
        raise ValueError("line is not a JSON object")
    missing = [k for k in _REQUIRED if k not in obj]
    if missing:
        raise ValueError(f"missing keys: {', '.join(missing)}")
    if not isinstance(obj["route_id"], str) or not isinstance(obj["trip_id"], str):
        raise ValueError("route_id and trip_id must be strings")
    stops = obj["stops"]
    if not isinstance(stops, list) or not stops:
        raise ValueError("stops must be a non-empty list")
    records = []
    for i, st in enumerate(stops):
        if not isinstance(st, dict) or set(st) != set(FEATURES):
            got = len(st) if isinstance(st, dict) else "non-object"
            raise ValueError(f"stop {i}: expected the {len(FEATURES)} channels {FEATURES}, got {got}")
        records.append(StopRecord(
            s_km=_number(st["s_km"], f"stop {i} s_km"),
            t_sched_s=_number(st["t_sched_s"], f"stop {i} t_sched_s"),
            delay_s=_number(st["delay_s"], f"stop {i} delay_s"),
            signal=_flag(st["signal"], f"stop {i} signal"),
            t_mean_s=_number(st["t_mean_s"], f"stop {i} t_mean_s"),
        ))
    sched = obj["sched_arrivals_s"]
    if not isinstance(sched, list) or len(sched) != len(stops):
        raise ValueError("sched_arrivals_s must list one time per stop")
    first_stop = obj.get("first_stop", 1)
    if isinstance(first_stop, bool) or not isinstance(first_stop, int) or first_stop < 0:
        raise ValueError(f"first_stop must be a non-negative integer, got {first_stop!r}")
    return TripSequence(
        route_id=obj["route_id"],
        trip_id=obj["trip_id"],
        stops=records,
        sched_arrivals_s=[_number(t, "sched_arrivals_s") for t in sched],
        peak=_flag(obj["peak"], "peak"),
        weekday=_flag(obj["weekday"], "weekday"),
        first_stop=first_stop,
    )


def read_sequences(path):
    """Parse a JSONL file into trip sequences.

    Returns ``(sequences, rejected)`` with ``rejected`` a list of
    ``(line_number, reason)``. Blank lines are ignored. Raises
    :class:`FormatError` if more than 10% of the lines are rejected.
    """
    sequences, rejected, total = [], [], 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            total += 1
            try:
                sequences.append(parse_sequence(json.loads(line)))
            except (ValueError, TypeError) as exc:
                rejected.append((lineno, str(exc)))
    for lineno, reason in rejected:
        log.warning("%s:%d rejected: %s", path, lineno, reason)
    if total and len(rejected) > MAX_REJECT_FRACTION * total:
        raise FormatError(f"{path}: {len(rejected)} of {total} lines rejected "
                          f"(limit {MAX_REJECT_FRACTION:.0%}); first: line {rejected[0][0]}: {rejected[0][1]}")
    if total == 0:
        log.warning("%s: empty dataset", path)
    return sequences, rejected


def load_dataset(path, n_past, n_future):
    """Read a JSONL dataset and cut it into N_p/N_f windows."""
    sequences, rejected = read_sequences(path)
    samples, skipped = build_windows(sequences, n_past, n_future)
    if rejected:
        log.warning("%s: %d line(s) rejected", path, len(rejected))
    if skipped:
        log.info("%s: %d sequence(s) shorter than %d stops skipped", path, skipped, n_past + n_future)
    return samples


def save_sequences(path, sequences):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for seq in sequences:
            fh.write(json.dumps(seq.to_dict(), separators=(",", ":")) + "\n")
    return path
