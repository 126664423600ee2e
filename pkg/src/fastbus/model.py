"""Domain types, the serve predicate and the served-passenger objective.

Times are integer seconds of the day. A bus ``(route_id, depart)`` serves a
passenger ``(board, alight, arrival)`` when its route visits ``board`` strictly
before ``alight`` and the passenger's wait at ``board`` lies in ``[0, theta]``.
"""
from __future__ import annotations

import bisect
from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from typing import Hashable, Iterable, Mapping, Sequence

DAY_SECONDS = 86400

StopId = Hashable
RouteId = Hashable


class InstanceError(ValueError):
    """Raised when an instance (or part of it) violates a structural rule."""


class InfeasibleQuotaError(InstanceError):
    """A route asks for more departures than it has candidates."""

    def __init__(self, route_id, quota, available):
        self.route_id = route_id
        self.quota = quota
        self.available = available
        super().__init__(
            f"route {route_id!r}: quota {quota} exceeds {available} candidate departures"
        )


class ContractError(RuntimeError):
    """Misuse of a stateful API (e.g. committing the same bus twice)."""


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


@dataclass(frozen=True)
class Route:
    route_id: RouteId
    stops: tuple
    cum_time: tuple

    def __post_init__(self):
        object.__setattr__(self, "stops", tuple(self.stops))
        object.__setattr__(self, "cum_time", tuple(self.cum_time))
        if len(self.stops) < 2:
            raise InstanceError(f"route {self.route_id!r}: needs at least 2 stops")
        if len(self.cum_time) != len(self.stops):
            raise InstanceError(f"route {self.route_id!r}: cum_time length mismatch")
        if len(set(self.stops)) != len(self.stops):
            raise InstanceError(f"route {self.route_id!r}: repeated stop")
        if any(s is None or s == "" for s in self.stops):
            raise InstanceError(f"route {self.route_id!r}: empty stop id")
        if not all(_is_int(t) for t in self.cum_time):
            raise InstanceError(f"route {self.route_id!r}: travel times must be integer seconds")
        if self.cum_time[0] != 0:
            raise InstanceError(f"route {self.route_id!r}: cum_time must start at 0")
        if any(b < a for a, b in zip(self.cum_time, self.cum_time[1:])):
            raise InstanceError(f"route {self.route_id!r}: cum_time must be non-decreasing")

    @cached_property
    def position(self) -> dict:
        return {s: k for k, s in enumerate(self.stops)}

    def covers(self, board, alight) -> bool:
        """True when the route visits ``board`` strictly before ``alight``."""
        pos = self.position
        b = pos.get(board)
        a = pos.get(alight)
        return b is not None and a is not None and b < a

    def offset(self, stop) -> int:
        """Travel time from the first stop to ``stop``."""
        return self.cum_time[self.position[stop]]


@dataclass(frozen=True)
class Passenger:
    board: StopId
    alight: StopId
    arrival: int
    pid: Hashable = field(default=None, compare=False)

    def __post_init__(self):
        if not _is_int(self.arrival):
            raise InstanceError(f"passenger {self.pid!r}: arrival must be integer seconds")
        if not 0 <= self.arrival < DAY_SECONDS:
            raise InstanceError(f"passenger {self.pid!r}: arrival {self.arrival} outside [0, 86400)")
        if self.board == self.alight:
            raise InstanceError(f"passenger {self.pid!r}: board and alight stops coincide")


@dataclass(frozen=True, order=True)
class BusCandidate:
    route_id: RouteId
    depart: int


def serve_indicator(bus: BusCandidate, p: Passenger, routes: Mapping, theta: int) -> int:
    """1 if ``bus`` serves ``p`` within waiting threshold ``theta``, else 0."""
    if theta < 0:
        raise ValueError("theta must be non-negative")
    try:
        route = routes[bus.route_id]
    except KeyError:
        raise InstanceError(f"unknown route {bus.route_id!r}") from None
    if not route.covers(p.board, p.alight):
        return 0
    wait = bus.depart + route.offset(p.board) - p.arrival
    return int(0 <= wait <= theta)


def coverage(buses: Iterable[BusCandidate], p: Passenger, routes: Mapping, theta: int) -> int:
    prod = 1
    for b in buses:
        prod *= 1 - serve_indicator(b, p, routes, theta)
    return 1 - prod


def od_routes(routes: Mapping) -> dict:
    """Map ``(board, alight)`` pairs to the routes covering them in order.

    Values are lists of ``(route_id, offset_to_board)``. Only pairs that some
    route covers appear as keys.
    """
    table = defaultdict(list)
    for rid, route in routes.items():
        for i, s in enumerate(route.stops):
            t = route.cum_time[i]
            for e in route.stops[i + 1:]:
                table[(s, e)].append((rid, t))
    return dict(table)


def objective(buses: Iterable[BusCandidate], passengers: Sequence[Passenger],
              routes: Mapping, theta: int) -> int:
    """Number of passengers served by at least one bus in ``buses``.

    Equivalent to summing :func:`coverage` over ``passengers`` but looks up
    departures per route with bisection instead of testing every bus.
    """
    departs = defaultdict(list)
    for b in buses:
        if b.route_id not in routes:
            raise InstanceError(f"unknown route {b.route_id!r}")
        departs[b.route_id].append(b.depart)
    if not departs:
        return 0
    for d in departs.values():
        d.sort()
    # stop -> [(route_id, position, offset)] restricted to routes with buses
    at_stop = defaultdict(list)
    for rid in departs:
        route = routes[rid]
        for k, s in enumerate(route.stops):
            at_stop[s].append((rid, k, route.cum_time[k]))
    served = 0
    for p in passengers:
        for rid, k, off in at_stop.get(p.board, ()):
            a = routes[rid].position.get(p.alight)
            if a is None or a <= k:
                continue
            d = departs[rid]
            lo = p.arrival - off
            i = bisect.bisect_left(d, lo)
            if i < len(d) and d[i] <= lo + theta:
                served += 1
                break
    return served


@dataclass(frozen=True)
class Frequency:
    """A chosen set of departures, sorted by ``(route_id, depart)``.

    ``info`` carries solver statistics and is ignored by equality.
    """

    chosen: tuple
    info: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        chosen = tuple(sorted(self.chosen))
        if len(set(chosen)) != len(chosen):
            raise InstanceError("frequency contains duplicate departures")
        object.__setattr__(self, "chosen", chosen)

    def __len__(self):
        return len(self.chosen)

    def __iter__(self):
        return iter(self.chosen)

    @property
    def counts(self) -> dict:
        out = defaultdict(int)
        for b in self.chosen:
            out[b.route_id] += 1
        return dict(out)

    def validate(self, instance: "Instance", require_candidates: bool = True) -> None:
        """Check exact quota satisfaction and (optionally) membership in the candidate set."""
        counts = self.counts
        for rid in counts:
            if rid not in instance.routes:
                raise InstanceError(f"frequency uses unknown route {rid!r}")
        for rid, n in instance.quotas.items():
            if counts.get(rid, 0) != n:
                raise InstanceError(
                    f"route {rid!r}: {counts.get(rid, 0)} departures chosen, quota is {n}"
                )
        if require_candidates:
            cand = instance.candidate_set
            missing = [b for b in self.chosen if b not in cand]
            if missing:
                raise InstanceError(f"{len(missing)} chosen departures are not candidates, e.g. {missing[0]}")


@dataclass
class ValidationReport:
    unservable: int
    candidates_per_route: dict


def _sort_key(x):
    # route ids of mixed type still get a total order
    return (type(x).__name__, x)


class Instance:
    """Routes, passengers, candidate departures and per-route quotas.

    Routes are stored sorted by id and candidates by ``(route_id, depart)``;
    that order is the deterministic tie-break used by every solver.
    """

    def __init__(self, routes: Iterable[Route], passengers: Iterable[Passenger],
                 candidates: Iterable[BusCandidate], quotas: Mapping):
        routes = list(routes)
        ids = [r.route_id for r in routes]
        if len(set(ids)) != len(ids):
            raise InstanceError("duplicate route id")
        self.routes = {r.route_id: r for r in sorted(routes, key=lambda r: _sort_key(r.route_id))}
        self.passengers = list(passengers)
        cands = sorted(candidates, key=lambda b: (_sort_key(b.route_id), b.depart))
        for b in cands:
            if b.route_id not in self.routes:
                raise InstanceError(f"candidate references unknown route {b.route_id!r}")
            if not _is_int(b.depart):
                raise InstanceError(f"candidate {b}: departure must be integer seconds")
        if len(set(cands)) != len(cands):
            raise InstanceError("duplicate candidate departure")
        self.candidates = cands
        self.quotas = {}
        for rid, n in quotas.items():
            if rid not in self.routes:
                raise InstanceError(f"quota references unknown route {rid!r}")
            if not _is_int(n) or n < 1:
                raise InstanceError(f"route {rid!r}: quota must be a positive integer, got {n!r}")
            self.quotas[rid] = n
        for rid in self.routes:
            if rid not in self.quotas:
                raise InstanceError(f"route {rid!r} has no quota")
        self.quotas = {rid: self.quotas[rid] for rid in self.routes}

    def __eq__(self, other):
        if not isinstance(other, Instance):
            return NotImplemented
        return (self.routes == other.routes
                and self.candidates == other.candidates
                and self.quotas == other.quotas
                and [(p.pid, p) for p in self.passengers] == [(p.pid, p) for p in other.passengers])

    @cached_property
    def candidate_set(self) -> frozenset:
        return frozenset(self.candidates)

    @cached_property
    def _candidate_counts(self) -> dict:
        out = {rid: 0 for rid in self.routes}
        for b in self.candidates:
            out[b.route_id] += 1
        return out

    def candidates_per_route(self) -> dict:
        return dict(self._candidate_counts)

    def check_quotas(self, quotas: Mapping | None = None) -> None:
        counts = self.candidates_per_route()
        for rid, n in (quotas or self.quotas).items():
            if n > counts.get(rid, 0):
                raise InfeasibleQuotaError(rid, n, counts.get(rid, 0))

    @property
    def total_quota(self) -> int:
        return sum(self.quotas.values())

    def unservable(self) -> int:
        """Passengers whose OD pair no route covers in order (time ignored)."""
        table = od_routes(self.routes)
        return sum((p.board, p.alight) not in table for p in self.passengers)

    def report(self) -> ValidationReport:
        return ValidationReport(self.unservable(), self.candidates_per_route())

    def objective(self, buses: Iterable[BusCandidate], theta: int) -> int:
        return objective(buses, self.passengers, self.routes, theta)

    def with_quotas(self, quotas: Mapping) -> "Instance":
        return Instance(self.routes.values(), self.passengers, self.candidates, quotas)

    def with_passengers(self, passengers: Iterable[Passenger]) -> "Instance":
        return Instance(self.routes.values(), passengers, self.candidates, self.quotas)
