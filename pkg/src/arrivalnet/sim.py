"""Synthetic city-transit feed: network, delay propagation, event logs, extraction.

The generator stands in for a real AVL (automatic vehicle location) archive.
It produces per-trip raw event logs (stop passages, trigger-point passages,
door openings) and the extraction step recovers arrival times from those
events, so the data pipeline is exercised end to end.
"""

from __future__ import annotations

import datetime as _dt
import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConfigError
from .samples import SequenceSample, StopRecord, TripSequence

log = logging.getLogger(__name__)

SIGNAL_THRESHOLD_M = 20.0
WAYPOINT_SPACING_M = 10.0
MORNING_PEAK = (7 * 3600, 9 * 3600)
EVENING_PEAK = (16 * 3600, 19 * 3600)


@dataclass(frozen=True)
class Profile:
    mean_link_km: float
    mean_link_time_s: float
    dwell_s: float = 20.0


PROFILES = {
    "tram": Profile(mean_link_km=0.4702, mean_link_time_s=92.19),
    "bus": Profile(mean_link_km=0.46, mean_link_time_s=80.79),
}


@dataclass
class Link:
    s_km: float
    t_sched_s: float
    t_mean_s: float
    signal: int
    waypoints: np.ndarray  # (n, 2) metres
    base_delay_s: float    # intrinsic mean delay increment of the link


@dataclass
class Route:
    route_id: str
    links: list[Link]        # links[i] ends at stop i + 1
    stops_xy: np.ndarray     # (n_stops, 2)
    trigger_offset_m: np.ndarray  # per stop, distance past the stop point

    @property
    def n_stops(self):
        return len(self.links) + 1

    def chainage(self):
        """Distance along the route of every stop point, metres."""
        return np.concatenate([[0.0], np.cumsum([l.s_km * 1000.0 for l in self.links])])


@dataclass
class Network:
    routes: list[Route]
    signals_xy: np.ndarray  # (m, 2)
    profile: str = "tram"
    threshold_m: float = SIGNAL_THRESHOLD_M

    def links(self):
        return [l for r in self.routes for l in r.links]

    def route(self, route_id):
        for r in self.routes:
            if r.route_id == route_id:
                return r
        raise KeyError(route_id)


def signal_flags(waypoint_sets, signals_xy, threshold_m=SIGNAL_THRESHOLD_M):
    """1 for every link with a signal strictly closer than ``threshold_m`` to a waypoint."""
    if len(signals_xy) == 0:
        return [0] * len(waypoint_sets)
    tree = cKDTree(signals_xy)
    flags = []
    for wp in waypoint_sets:
        dist, _ = tree.query(wp, k=1)
        flags.append(int(np.min(dist) < threshold_m))
    return flags


def _waypoints(a, b):
    n = max(int(np.ceil(np.linalg.norm(b - a) / WAYPOINT_SPACING_M)), 1)
    t = np.linspace(0.0, 1.0, n + 1)[:, None]
    return a + t * (b - a)


def generate_network(seed, n_routes, stops_per_route, profile="tram", signal_fraction=0.3,
                     threshold_m=SIGNAL_THRESHOLD_M, min_stops=2):
    """Random stop chains with lognormal link lengths and signal placement.

    ``min_stops`` lets callers enforce ``stops_per_route >= N_p + N_f + 1``.
    """
    if n_routes < 1 or stops_per_route < max(2, min_stops):
        raise ConfigError(f"need n_routes >= 1 and stops_per_route >= {max(2, min_stops)}, "
                          f"got {n_routes} and {stops_per_route}")
    if profile not in PROFILES:
        raise ConfigError(f"unknown profile {profile!r}; choose from {sorted(PROFILES)}")
    prof = PROFILES[profile]
    rng = np.random.default_rng(seed)
    sigma_ln = 0.35
    mu_ln = np.log(prof.mean_link_km) - 0.5 * sigma_ln ** 2
    pace = (prof.mean_link_time_s - prof.dwell_s) / prof.mean_link_km  # s per km

    routes, signals, waypoint_sets = [], [], []
    for r in range(n_routes):
        n_links = stops_per_route - 1
        dist_km = rng.lognormal(mu_ln, sigma_ln, size=n_links)
        origin = rng.uniform(-5000.0, 5000.0, size=2)
        heading = rng.uniform(0.0, 2 * np.pi)
        xy = [origin]
        for d in dist_km:
            heading += rng.normal(0.0, 0.35)
            xy.append(xy[-1] + 1000.0 * d * np.array([np.cos(heading), np.sin(heading)]))
        xy = np.array(xy)
        links = []
        for i, d in enumerate(dist_km):
            wp = _waypoints(xy[i], xy[i + 1])
            waypoint_sets.append(wp)
            if rng.random() < signal_fraction:
                # a junction somewhere mid-link, slightly off the centre line
                frac = rng.uniform(0.25, 0.75)
                along = xy[i] + frac * (xy[i + 1] - xy[i])
                direction = (xy[i + 1] - xy[i]) / np.linalg.norm(xy[i + 1] - xy[i])
                normal = np.array([-direction[1], direction[0]])
                signals.append(along + normal * rng.uniform(-12.0, 12.0))
            t_sched = max(prof.dwell_s + pace * d + rng.normal(0.0, 6.0), 15.0)
            links.append(Link(s_km=float(d), t_sched_s=float(np.round(t_sched)), t_mean_s=0.0,
                              signal=0, waypoints=wp, base_delay_s=float(rng.normal(1.5, 2.0))))
        triggers = rng.uniform(10.0, 30.0, size=stops_per_route)
        routes.append(Route(route_id=f"R{r:03d}", links=links, stops_xy=xy, trigger_offset_m=triggers))
    # signals off the network that must not be matched
    for _ in range(max(1, n_routes * stops_per_route // 10)):
        signals.append(rng.uniform(-8000.0, 8000.0, size=2))
    signals_xy = np.array(signals).reshape(-1, 2)

    flags = signal_flags(waypoint_sets, signals_xy, threshold_m)
    for link, flag in zip((l for r in routes for l in r.links), flags):
        link.signal = flag
    net = Network(routes=routes, signals_xy=signals_xy, profile=profile, threshold_m=threshold_m)
    return net


# ----------------------------------------------------------------------
# delay propagation
# ----------------------------------------------------------------------

@dataclass
class SimParams:
    ar_coef: float = 0.6           # persistence of link-delay deviations
    noise_s: float = 9.0           # innovation std of link-delay deviations
    signal_delay_s: float = 5.0    # extra mean increment on signalised links
    peak_delay_s: float = 7.0      # extra mean increment per link in peak windows
    recovery: float = 0.72         # share of a negative delay recovered by holding at a stop
    departure_sd_s: float = 25.0   # spread of the initial (terminal) delay
    door_skip_prob: float = 0.12   # stop served without opening doors
    overshoot_prob: float = 0.06   # doors opened only after passing the trigger point
    drop_prob: float = 0.002       # stop with no usable events at all
    first_departure_s: float = 5 * 3600
    last_departure_s: float = 23 * 3600
    headway_s: float = 600.0
    weekday: bool = True
    clip_negative: bool = False


def is_peak(clock_s, weekday):
    """Weekday rush-hour flag for a clock time in seconds after midnight."""
    if not weekday:
        return 0
    c = clock_s % 86400
    return int(MORNING_PEAK[0] <= c < MORNING_PEAK[1] or EVENING_PEAK[0] <= c < EVENING_PEAK[1])


def is_weekday(day):
    """Calendar flag: Monday-Friday -> 1. ``day`` is a ``date`` or a bool."""
    if isinstance(day, (_dt.date, _dt.datetime)):
        return int(day.weekday() < 5)
    return int(bool(day))


@dataclass
class Event:
    time_s: float
    kind: str      # "stop_pass" | "trigger_pass" | "door_open"
    ref_stop: int  # stop the on-board unit considers current
    pos_m: float   # chainage along the route


@dataclass
class TripLog:
    route_id: str
    trip_id: str
    departure_clock_s: float
    weekday: int
    sched_clock_s: np.ndarray            # scheduled arrival per stop (clock seconds)
    events: list[Event] = field(default_factory=list)
    true_delays_s: np.ndarray | None = None   # simulator state, per stop
    link_delays_s: np.ndarray | None = None   # increments, per stop (index 0 = departure delay)


def _simulate_trip(route, rng, p, departure_clock_s, weekday, trip_id):
    n = route.n_stops
    peak = is_peak(departure_clock_s, weekday)
    sched = departure_clock_s + np.concatenate([[0.0], np.cumsum([l.t_sched_s for l in route.links])])
    delays = np.empty(n)
    incr = np.empty(n)
    delays[0] = incr[0] = rng.normal(0.0, p.departure_sd_s)
    dev = 0.0
    for i, link in enumerate(route.links, start=1):
        dev = p.ar_coef * dev + rng.normal(0.0, p.noise_s)
        step = link.base_delay_s + p.signal_delay_s * link.signal + p.peak_delay_s * peak + dev
        if delays[i - 1] < 0.0:
            step -= p.recovery * delays[i - 1]  # hold at the stop to absorb early running
        incr[i] = step
        delays[i] = delays[i - 1] + step
    if p.clip_negative:
        delays = np.maximum(delays, 0.0)
        incr = np.diff(np.concatenate([[0.0], delays]))

    chain = route.chainage()
    events = []
    ref = 0
    for i in range(n):
        arrive = sched[i] + delays[i]
        trigger_pos = chain[i] + route.trigger_offset_m[i]
        if 0 < i and rng.random() < p.drop_prob:
            if i < n - 1:
                events.append(Event(arrive + 25.0, "trigger_pass", ref, trigger_pos))
                ref = i + 1
            continue
        overshoot = i < n - 1 and rng.random() < p.overshoot_prob
        skip = not overshoot and rng.random() < p.door_skip_prob
        if overshoot:
            events.append(Event(arrive - 4.0, "stop_pass", ref, chain[i]))
            events.append(Event(arrive - 1.0, "trigger_pass", ref, trigger_pos))
            ref = i + 1
            events.append(Event(arrive, "door_open", ref, trigger_pos + 5.0))
        elif skip:
            events.append(Event(arrive, "stop_pass", ref, chain[i]))
            if i < n - 1:
                events.append(Event(arrive + 8.0, "trigger_pass", ref, trigger_pos))
                ref = i + 1
        else:
            events.append(Event(arrive, "door_open", ref, chain[i]))
            events.append(Event(arrive + 2.0, "stop_pass", ref, chain[i]))
            if i < n - 1:
                events.append(Event(arrive + 25.0, "trigger_pass", ref, trigger_pos))
                ref = i + 1
    return TripLog(route_id=route.route_id, trip_id=trip_id, departure_clock_s=departure_clock_s,
                   weekday=int(weekday), sched_clock_s=sched, events=events,
                   true_delays_s=delays, link_delays_s=incr)


def simulate_day(net, seed, params=None):
    """Simulate every scheduled trip of one service day on every route."""
    p = params or SimParams()
    master = np.random.default_rng(seed)
    departures = np.arange(p.first_departure_s, p.last_departure_s, p.headway_s)
    logs = []
    for route in net.routes:
        for k, dep in enumerate(departures):
            # per-trip stream derived from the master seed keeps trips independent
            rng = np.random.default_rng(master.integers(0, 2**63))
            offset = master.uniform(-60.0, 60.0)
            logs.append(_simulate_trip(route, rng, p, float(dep + offset), p.weekday,
                                       f"{route.route_id}-{seed}-{k:03d}"))
    return logs


# ----------------------------------------------------------------------
# extraction and windowing
# ----------------------------------------------------------------------

def arrival_times(log, route):
    """Arrival time per stop from raw events, or NaN where no event is usable.

    (a) doors open while the stop is still current -> door-open time;
    (b) doors open after the trigger point was passed but at the current
        stop's position -> door-open time, attributed to that stop;
    (c) no door opening -> time the stop point was passed.
    """
    chain = route.chainage()
    n = route.n_stops
    door = np.full(n, np.nan)
    passage = np.full(n, np.nan)
    for ev in log.events:
        if ev.kind == "door_open":
            stop = ev.ref_stop
            if 0 < stop and abs(ev.pos_m - chain[stop]) > abs(ev.pos_m - chain[stop - 1]):
                stop -= 1  # condition (b): unit already switched to the next stop
            if np.isnan(door[stop]):
                door[stop] = ev.time_s
        elif ev.kind == "stop_pass" and np.isnan(passage[ev.ref_stop]):
            passage[ev.ref_stop] = ev.time_s
    return np.where(np.isnan(door), passage, door)


def extract_delays(log, net):
    """Turn one trip log into contiguous stop-record sequences.

    Stops without usable events split the trip. Returns ``(sequences,
    dropped)`` where ``dropped`` counts stops that had no usable events.
    """
    route = net.route(log.route_id)
    arrivals = arrival_times(log, route)
    delays = arrivals - log.sched_clock_s
    peak = is_peak(log.departure_clock_s, log.weekday)
    sequences, current, first = [], [], None
    dropped = 0

    def flush():
        if current:
            stops = [rec for rec, _ in current]
            sched = [s for _, s in current]
            sequences.append(TripSequence(route_id=log.route_id, trip_id=f"{log.trip_id}/{first}",
                                          stops=stops, sched_arrivals_s=sched, peak=peak,
                                          weekday=log.weekday, first_stop=first))

    for i in range(1, route.n_stops):
        if np.isnan(delays[i]):
            dropped += 1
            flush()
            current, first = [], None
            continue
        link = route.links[i - 1]
        if first is None:
            first = i
        current.append((StopRecord(s_km=link.s_km, t_sched_s=link.t_sched_s, delay_s=float(delays[i]),
                                   signal=link.signal, t_mean_s=link.t_mean_s),
                        float(log.sched_clock_s[i] - log.departure_clock_s)))
    flush()
    return sequences, dropped


def build_windows(seqs, n_past, n_future):
    """Sliding windows (stride 1) of N_p past stops and N_f future targets.

    Returns ``(samples, skipped)`` where ``skipped`` counts sequences shorter
    than ``n_past + n_future``.
    """
    samples, skipped = [], 0
    span = n_past + n_future
    for seq in seqs:
        feats = seq.features()
        if len(feats) < span:
            skipped += 1
            continue
        sched = np.asarray(seq.sched_arrivals_s, dtype=np.float64)
        for i in range(len(feats) - span + 1):
            fut = slice(i + n_past, i + span)
            samples.append(SequenceSample(
                past=feats[i:i + n_past].copy(),
                peak=int(seq.peak),
                weekday=int(seq.weekday),
                future_delays=feats[fut, 2].copy(),
                future_scheduled=sched[fut].copy(),
                route_id=seq.route_id,
                trip_id=seq.trip_id,
                start=seq.first_stop + i + n_past,
            ))
    return samples, skipped


def calibrate_mean_travel_times(net, logs):
    """Set each link's historical mean travel time from simulated arrivals."""
    sums, counts = {}, {}
    for lg in logs:
        route = net.route(lg.route_id)
        arr = arrival_times(lg, route)
        for i, link in enumerate(route.links, start=1):
            tt = arr[i] - arr[i - 1]
            if np.isfinite(tt):
                sums[id(link)] = sums.get(id(link), 0.0) + tt
                counts[id(link)] = counts.get(id(link), 0) + 1
    for link in net.links():
        n = counts.get(id(link), 0)
        link.t_mean_s = float(sums[id(link)] / n) if n else link.t_sched_s


@dataclass
class SimulationResult:
    network: Network
    sequences: list[TripSequence]
    dropped: int


def simulate_dataset(seed, n_routes=8, stops_per_route=30, n_days=2, profile="tram",
                     params=None, history_days=1):
    """Network + several service days -> extracted trip sequences.

    Weekday/weekend alternates by day index (days 5 and 6 of each week are
    weekends). ``history_days`` extra days are simulated first to derive the
    historical mean link travel times, and are not part of the output.
    """
    base = params or SimParams()
    net = generate_network(seed, n_routes, stops_per_route, profile=profile)
    history = []
    for d in range(history_days):
        history += simulate_day(net, seed * 1000 + 900 + d, _day_params(base, d))
    calibrate_mean_travel_times(net, history or simulate_day(net, seed * 1000 + 999, base))
    sequences, dropped = [], 0
    for d in range(n_days):
        for lg in simulate_day(net, seed * 1000 + d, _day_params(base, d)):
            seqs, n_drop = extract_delays(lg, net)
            sequences += seqs
            dropped += n_drop
    if dropped:
        log.info("extraction dropped %d stops without usable events", dropped)
    return SimulationResult(network=net, sequences=sequences, dropped=dropped)


def _day_params(base, day_index):
    return replace(base, weekday=(day_index % 7) < 5)
