"""CSV instance files, candidate generation and the synthetic generator.

File layouts (UTF-8, header row first):

* ``routes.csv``      ``route_id,seq,stop_id,segment_seconds``
* ``passengers.csv``  ``passenger_id,board_stop,alight_stop,arrival_seconds``
* ``quotas.csv``      ``route_id,n``
* ``candidates.csv``  ``route_id,depart_seconds``
* ``schedule.csv``    ``route_id,depart_seconds`` (solver output, sorted)

Identifiers that all round-trip through ``int`` are loaded as integers,
anything else stays a string.
"""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .model import (DAY_SECONDS, BusCandidate, Frequency, Instance, InstanceError,
                    Passenger, Route)

DEFAULT_WINDOW = (18000, 86400)
DEFAULT_STEP = 60

ROUTES_HEADER = ["route_id", "seq", "stop_id", "segment_seconds"]
PASSENGERS_HEADER = ["passenger_id", "board_stop", "alight_stop", "arrival_seconds"]
QUOTAS_HEADER = ["route_id", "n"]
CANDIDATES_HEADER = ["route_id", "depart_seconds"]


class FormatError(InstanceError):
    def __init__(self, path, line, msg):
        self.path = str(path)
        self.line = line
        super().__init__(f"{path}:{line}: {msg}")


def _coerce_ids(values):
    try:
        ints = [int(v) for v in values]
    except ValueError:
        return list(values)
    if all(str(i) == v for i, v in zip(ints, values)):
        return ints
    return list(values)


def _read(path, header):
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            first = next(reader)
        except StopIteration:
            raise FormatError(path, 1, "missing header row") from None
        if [h.strip() for h in first] != header:
            raise FormatError(path, 1, f"expected header {','.join(header)}")
        rows = []
        for line, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise FormatError(path, line, f"expected {len(header)} fields, got {len(row)}")
            rows.append((line, [c.strip() for c in row]))
    return rows


def _int(path, line, value, what):
    try:
        return int(value)
    except ValueError:
        raise FormatError(path, line, f"{what} must be an integer, got {value!r}") from None


def read_routes(path) -> list:
    rows = _read(path, ROUTES_HEADER)
    rids = _coerce_ids([r[0] for _, r in rows])
    sids = _coerce_ids([r[2] for _, r in rows])
    grouped = {}
    for (line, row), rid, sid in zip(rows, rids, sids):
        seq = _int(path, line, row[1], "seq")
        seg = _int(path, line, row[3], "segment_seconds")
        if seg < 0:
            raise FormatError(path, line, "segment_seconds must be non-negative")
        if sid == "":
            raise FormatError(path, line, "empty stop_id")
        grouped.setdefault(rid, []).append((seq, sid, seg, line))
    routes = []
    for rid, entries in grouped.items():
        entries.sort()
        if [e[0] for e in entries] != list(range(len(entries))):
            raise FormatError(path, entries[0][3], f"route {rid!r}: seq must run 0..{len(entries) - 1}")
        if entries[0][2] != 0:
            raise FormatError(path, entries[0][3], f"route {rid!r}: segment_seconds must be 0 at seq 0")
        cum, t = [], 0
        for _, _, seg, _ in entries:
            t += seg
            cum.append(t)
        try:
            routes.append(Route(rid, [e[1] for e in entries], cum))
        except InstanceError as exc:
            raise FormatError(path, entries[0][3], str(exc)) from None
    return routes


def read_passengers(path) -> list:
    rows = _read(path, PASSENGERS_HEADER)
    pids = _coerce_ids([r[0] for _, r in rows])
    stops = _coerce_ids([r[1] for _, r in rows] + [r[2] for _, r in rows])
    board, alight = stops[:len(rows)], stops[len(rows):]
    out = []
    for (line, row), pid, b, a in zip(rows, pids, board, alight):
        arrival = _int(path, line, row[3], "arrival_seconds")
        try:
            out.append(Passenger(b, a, arrival, pid))
        except InstanceError as exc:
            raise FormatError(path, line, str(exc)) from None
    return out


def read_quotas(path) -> dict:
    rows = _read(path, QUOTAS_HEADER)
    rids = _coerce_ids([r[0] for _, r in rows])
    quotas = {}
    for (line, row), rid in zip(rows, rids):
        if rid in quotas:
            raise FormatError(path, line, f"duplicate quota for route {rid!r}")
        n = _int(path, line, row[1], "n")
        if n < 1:
            raise FormatError(path, line, f"route {rid!r}: quota must be at least 1")
        quotas[rid] = n
    return quotas


def read_departures(path) -> list:
    """Read ``candidates.csv`` or ``schedule.csv`` (same layout)."""
    rows = _read(path, CANDIDATES_HEADER)
    rids = _coerce_ids([r[0] for _, r in rows])
    return [BusCandidate(rid, _int(path, line, row[1], "depart_seconds"))
            for (line, row), rid in zip(rows, rids)]


def generate_candidates(routes, window=DEFAULT_WINDOW, step=DEFAULT_STEP) -> list:
    """Departures every ``step`` seconds from ``start`` up to ``end``, per route.

    Departures are seconds of the day, so ``86400`` itself is excluded; the
    default 5am-midnight window at one-minute steps gives 1140 per route.
    """
    start, end = (int(x) for x in window)
    step = int(step)
    if step < 1:
        raise ValueError("step must be at least 1 second")
    last = min(end, DAY_SECONDS - 1)
    if last < start or start < 0:
        raise ValueError(f"empty candidate window [{start}, {end}]")
    times = range(start, last + 1, step)
    ids = [r.route_id if isinstance(r, Route) else r for r in routes]
    return [BusCandidate(rid, t) for rid in ids for t in times]


def _align(value, known):
    """Match an id against ``known`` when one file coerced it to int and another did not."""
    if value in known:
        return value
    alt = str(value) if isinstance(value, int) else value
    if isinstance(alt, str) and alt not in known:
        try:
            alt = int(alt) if str(int(alt)) == alt else alt
        except ValueError:
            pass
    return alt if alt in known else value


def load_instance(routes, passengers, quotas, candidates=None, *, window=DEFAULT_WINDOW,
                  step=DEFAULT_STEP):
    """Read, validate and assemble an instance; returns ``(instance, report)``.

    Without a candidates file the candidate set is generated from
    ``window`` and ``step``.
    """
    route_list = read_routes(routes)
    known = {s for r in route_list for s in r.stops}
    route_ids = {r.route_id for r in route_list}
    pass_list = []
    for i, p in enumerate(read_passengers(passengers)):
        b, a = _align(p.board, known), _align(p.alight, known)
        for stop in (b, a):
            if stop not in known:
                raise FormatError(passengers, i + 2, f"unknown stop {stop!r}")
        pass_list.append(Passenger(b, a, p.arrival, p.pid))
    quota_map = {}
    for i, (rid, n) in enumerate(read_quotas(quotas).items()):
        rid = _align(rid, route_ids)
        if rid not in route_ids:
            raise FormatError(quotas, i + 2, f"unknown route {rid!r}")
        quota_map[rid] = n
    if candidates is not None:
        cands = []
        for i, b in enumerate(read_departures(candidates)):
            rid = _align(b.route_id, route_ids)
            if rid not in route_ids:
                raise FormatError(candidates, i + 2, f"unknown route {rid!r}")
            cands.append(BusCandidate(rid, b.depart))
    else:
        cands = generate_candidates(route_list, window, step)
    inst = Instance(route_list, pass_list, cands, quota_map)
    inst.check_quotas()
    return inst, inst.report()


def _write(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def save_instance(instance: Instance, directory) -> dict:
    """Write all four instance files into ``directory``; returns their paths."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    paths = {name: d / f"{name}.csv" for name in ("routes", "passengers", "quotas", "candidates")}
    rows = []
    for rid, route in instance.routes.items():
        prev = 0
        for seq, (stop, t) in enumerate(zip(route.stops, route.cum_time)):
            rows.append([rid, seq, stop, t - prev])
            prev = t
    _write(paths["routes"], ROUTES_HEADER, rows)
    _write(paths["passengers"], PASSENGERS_HEADER,
           [[i if p.pid is None else p.pid, p.board, p.alight, p.arrival]
            for i, p in enumerate(instance.passengers)])
    _write(paths["quotas"], QUOTAS_HEADER, [[rid, n] for rid, n in instance.quotas.items()])
    _write(paths["candidates"], CANDIDATES_HEADER, [[b.route_id, b.depart] for b in instance.candidates])
    return paths


def write_schedule(freq: Frequency, path) -> None:
    _write(path, CANDIDATES_HEADER, [[b.route_id, b.depart] for b in sorted(freq.chosen)])


# -- synthetic generator ------------------------------------------------------

@dataclass
class GeneratorConfig:
    """Knobs of the synthetic city.

    ``overlap`` is the probability that a route copies a contiguous stretch
    of ``shared_stops`` stops from an earlier route; 0 keeps all routes
    stop-disjoint. ``trip_decay`` sets OD locality: a trip spanning ``L``
    segments has weight ``trip_decay ** (L - 1)``. Arrival times mix two
    Gaussian peaks with a uniform base over ``window``; each passenger then
    arrives ``early`` seconds (uniform range) before that time.
    """

    route_count: int = 50
    stops_per_route: tuple = (12, 24)
    segment_seconds: tuple = (60, 180)
    passenger_count: int = 50000
    trip_decay: float = 0.85
    peaks: tuple = ((28800, 3600, 0.35), (64800, 5400, 0.35))
    early: tuple = (60, 300)
    overlap: float = 0.3
    shared_stops: tuple = (3, 6)
    quota: int = 10
    window: tuple = DEFAULT_WINDOW
    step: int = DEFAULT_STEP
    seed: int = 0

    def __post_init__(self):
        for name in ("stops_per_route", "segment_seconds", "early", "shared_stops", "window"):
            setattr(self, name, tuple(getattr(self, name)))
        self.peaks = tuple(tuple(p) for p in self.peaks)
        if self.route_count < 1 or self.passenger_count < 0:
            raise ValueError("route_count must be >= 1 and passenger_count >= 0")
        if self.stops_per_route[0] < 2 or self.stops_per_route[0] > self.stops_per_route[1]:
            raise ValueError("stops_per_route must be a range starting at 2 or more")
        if not 0 <= self.overlap <= 1:
            raise ValueError("overlap must lie in [0, 1]")
        if sum(w for _, _, w in self.peaks) > 1:
            raise ValueError("peak weights must sum to at most 1")

    @classmethod
    def from_json(cls, path) -> "GeneratorConfig":
        return cls(**json.loads(Path(path).read_text()))

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


def _routes(cfg: GeneratorConfig, rng) -> list:
    routes = []
    next_stop = 1
    lo_seg, hi_seg = cfg.segment_seconds
    for i in range(cfg.route_count):
        m = int(rng.integers(cfg.stops_per_route[0], cfg.stops_per_route[1] + 1))
        stops = list(range(next_stop, next_stop + m))
        if i > 0 and rng.random() < cfg.overlap:
            partner = routes[int(rng.integers(i))].stops
            s = int(rng.integers(cfg.shared_stops[0], cfg.shared_stops[1] + 1))
            s = max(2, min(s, len(partner), m - 1))
            at = int(rng.integers(len(partner) - s + 1))
            stretch = list(partner[at:at + s])
            fresh = stops[:m - s]
            cut = int(rng.integers(len(fresh) + 1))
            stops = fresh[:cut] + stretch + fresh[cut:]
        next_stop += m
        segs = rng.integers(lo_seg, hi_seg + 1, size=m)
        segs[0] = 0
        routes.append(Route(i + 1, stops, [int(x) for x in np.cumsum(segs)]))
    return routes


def _arrivals(cfg: GeneratorConfig, rng, n: int) -> np.ndarray:
    start, end = cfg.window[0], min(cfg.window[1], DAY_SECONDS - 1)
    weights = [w for _, _, w in cfg.peaks]
    comp = rng.choice(len(weights) + 1, size=n, p=weights + [1 - sum(weights)])
    t = rng.uniform(start, end, size=n)
    for c, (mean, sd, _) in enumerate(cfg.peaks):
        sel = comp == c
        t[sel] = rng.normal(mean, sd, size=int(sel.sum()))
    t -= rng.integers(cfg.early[0], cfg.early[1] + 1, size=n)
    return np.clip(np.rint(t), 0, DAY_SECONDS - 1).astype(np.int64)


def generate_instance(cfg: GeneratorConfig) -> Instance:
    """Deterministic synthetic instance for ``cfg`` (same seed, same instance)."""
    rng = np.random.default_rng(cfg.seed)
    routes = _routes(cfg, rng)
    n = cfg.passenger_count
    which = rng.integers(len(routes), size=n)
    passengers = []
    arrivals = _arrivals(cfg, rng, n)
    u = rng.random(n)
    v = rng.random(n)
    cdfs = []
    for route in routes:
        w = cfg.trip_decay ** np.arange(len(route.stops) - 1)
        cdfs.append(np.cumsum(w) / w.sum())
    for k in range(n):
        route = routes[int(which[k])]
        m = len(route.stops)
        span = min(int(np.searchsorted(cdfs[int(which[k])], u[k], side="right")) + 1, m - 1)
        b = int(v[k] * (m - span))
        passengers.append(Passenger(route.stops[b], route.stops[b + span], int(arrivals[k]), k))
    cands = generate_candidates(routes, cfg.window, cfg.step)
    return Instance(routes, passengers, cands, {r.route_id: cfg.quota for r in routes})

