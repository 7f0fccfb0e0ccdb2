"""Per-stop records, trip sequences and windowed training samples."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

FEATURES = ("s_km", "t_sched_s", "delay_s", "signal", "t_mean_s")
N_FEATURES = len(FEATURES)
DELAY_CHANNEL = FEATURES.index("delay_s")
N_CONTEXT = 2  # peak flag, weekday flag


@dataclass(frozen=True)
class StopRecord:
    """Features of one stop, describing the link that ends there."""

    s_km: float       # link distance from the previous stop
    t_sched_s: float  # scheduled link travel time
    delay_s: float    # cumulative delay at this stop (may be negative)
    signal: int       # 1 if a traffic signal sits on the link
    t_mean_s: float   # historical mean link travel time

    def as_row(self):
        return [self.s_km, self.t_sched_s, self.delay_s, float(self.signal), self.t_mean_s]

    def to_dict(self):
        return {"s_km": self.s_km, "t_sched_s": self.t_sched_s, "delay_s": self.delay_s,
                "signal": int(self.signal), "t_mean_s": self.t_mean_s}


@dataclass
class TripSequence:
    """All extracted stops of one trip plus its static context."""

    route_id: str
    trip_id: str
    stops: list[StopRecord]
    sched_arrivals_s: list[float]  # seconds since scheduled trip start
    peak: int
    weekday: int
    first_stop: int = 1  # route index of stops[0]; identifies links for export

    def features(self):
        return np.array([s.as_row() for s in self.stops], dtype=np.float64).reshape(-1, N_FEATURES)

    def to_dict(self):
        return {
            "route_id": self.route_id,
            "trip_id": self.trip_id,
            "stops": [s.to_dict() for s in self.stops],
            "peak": int(self.peak),
            "weekday": int(self.weekday),
            "sched_arrivals_s": [float(t) for t in self.sched_arrivals_s],
            "first_stop": int(self.first_stop),
        }


@dataclass
class SequenceSample:
    """One training/evaluation window: N_p past stops and N_f future targets."""

    past: np.ndarray              # (N_p, 5)
    peak: int
    weekday: int
    future_delays: np.ndarray     # (N_f,) seconds
    future_scheduled: np.ndarray | None = None  # (N_f,) seconds since trip start
    route_id: str = ""
    trip_id: str = ""
    start: int = 0                # index in the trip of the first future stop

    @property
    def context(self):
        return np.array([self.peak, self.weekday], dtype=np.float64)

    @property
    def n_past(self):
        return self.past.shape[0]

    @property
    def n_future(self):
        return self.future_delays.shape[0]

    def link_ids(self):
        """Identifiers of the future links (``route:stop_index``)."""
        if not self.route_id:
            return None
        return [f"{self.route_id}:{self.start + i}" for i in range(self.n_future)]


@dataclass
class Batch:
    past: np.ndarray        # (B, N_p, 5)
    context: np.ndarray     # (B, 2)
    future_delays: np.ndarray  # (B, N_f)
    future_scheduled: np.ndarray | None = field(default=None)

    @classmethod
    def from_samples(cls, samples):
        sched = None
        if samples and all(s.future_scheduled is not None for s in samples):
            sched = np.stack([s.future_scheduled for s in samples])
        return cls(
            past=np.stack([s.past for s in samples]),
            context=np.stack([s.context for s in samples]),
            future_delays=np.stack([s.future_delays for s in samples]),
            future_scheduled=sched,
        )

    def __len__(self):
        return self.past.shape[0]
