import json
import logging

import numpy as np
import pytest

from arrivalnet.data import load_dataset, parse_sequence, read_sequences, save_sequences
from arrivalnet.errors import FormatError

STOP = {"s_km": 0.5, "t_sched_s": 90.0, "delay_s": 12.0, "signal": 1, "t_mean_s": 95.0}


def record(n=3, **over):
    rec = {"route_id": "R1", "trip_id": "t1", "stops": [dict(STOP) for _ in range(n)],
           "peak": 0, "weekday": 1, "sched_arrivals_s": [90.0 * (i + 1) for i in range(n)]}
    rec.update(over)
    return rec


def write_lines(path, objs):
    path.write_text("".join((o if isinstance(o, str) else json.dumps(o)) + "\n" for o in objs))
    return path


def test_empty_file_warns(tmp_path, caplog):
    path = tmp_path / "empty.jsonl"
    path.write_text("")
    with caplog.at_level(logging.WARNING):
        assert load_dataset(path, 10, 5) == []
    assert "empty" in caplog.text


def test_four_channel_line_rejected_with_line_number(tmp_path, caplog):
    bad = record()
    del bad["stops"][1]["t_mean_s"]
    path = write_lines(tmp_path / "d.jsonl", [record()] * 10 + [bad])
    with caplog.at_level(logging.WARNING):
        seqs, rejected = read_sequences(path)
    assert len(seqs) == 10
    assert [r[0] for r in rejected] == [11]
    assert "stop 1" in rejected[0][1]
    assert ":11 rejected" in caplog.text


def test_too_many_rejects_fail(tmp_path):
    path = write_lines(tmp_path / "d.jsonl", [record()] * 8 + ["{not json", record(peak=2)])
    with pytest.raises(FormatError, match="2 of 10"):
        read_sequences(path)


def test_missing_file():
    with pytest.raises(OSError):
        read_sequences("/nonexistent/data.jsonl")


@pytest.mark.parametrize("mutate", [
    lambda r: r.pop("peak"),
    lambda r: r.update(peak="yes"),
    lambda r: r["stops"][0].update(delay_s=float("nan")),
    lambda r: r["stops"][0].update(signal=0.5),
    lambda r: r.update(sched_arrivals_s=[1.0]),
    lambda r: r.update(stops=[]),
    lambda r: r.update(route_id=3),
    lambda r: r.update(first_stop=-1),
])
def test_schema_violations(mutate):
    rec = record()
    mutate(rec)
    with pytest.raises(ValueError):
        parse_sequence(rec)


def test_roundtrip_simulated(tmp_path, small_sim, small_samples):
    path = save_sequences(tmp_path / "sim.jsonl", small_sim.sequences)
    seqs, rejected = read_sequences(path)
    assert rejected == []
    assert [s.to_dict() for s in seqs] == [s.to_dict() for s in small_sim.sequences]
    loaded = load_dataset(path, 10, 5)
    assert len(loaded) == len(small_samples)
    for a, b in zip(loaded, small_samples):
        np.testing.assert_array_equal(a.past, b.past)
        np.testing.assert_array_equal(a.future_delays, b.future_delays)
        np.testing.assert_array_equal(a.future_scheduled, b.future_scheduled)
        assert (a.peak, a.weekday, a.route_id, a.start) == (b.peak, b.weekday, b.route_id, b.start)
