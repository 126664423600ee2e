"""Comparison schedulers and the exhaustive oracle."""
from __future__ import annotations

import math
from itertools import combinations

import numpy as np

from .index import ServeIndex
from .model import BusCandidate, Frequency, Instance, serve_indicator


class OracleLimitError(RuntimeError):
    def __init__(self, count: int, limit: int):
        self.count = count
        self.limit = limit
        super().__init__(f"{count} quota-respecting selections exceed the limit of {limit}")


def fix_interval(window, quotas) -> Frequency:
    """Evenly spaced departures per route, the first at the window start.

    The spacing is ``(end - start) // n`` seconds. Departures need not be
    members of any candidate set.
    """
    start, end = (int(x) for x in window)
    if end <= start:
        raise ValueError(f"empty service window [{start}, {end}]")
    chosen = []
    for rid, n in quotas.items():
        if n < 1:
            raise ValueError(f"route {rid!r}: quota must be positive")
        interval = (end - start) // n
        if interval == 0:
            raise ValueError(f"route {rid!r}: {n} departures do not fit in {end - start} seconds")
        chosen.extend(BusCandidate(rid, start + m * interval) for m in range(n))
    return Frequency(tuple(chosen), info={"algorithm": "fixinterval", "window": [start, end]})


def top_k(instance: Instance, theta: int, *, index: ServeIndex | None = None) -> Frequency:
    """Per route, the ``n_i`` departures serving the most passengers on their own.

    Ties go to the earlier departure; routes do not see each other.
    """
    instance.check_quotas()
    if index is None:
        index = ServeIndex(instance, theta)
    picks = []
    for r, rid in enumerate(index.route_ids):
        lo, hi = index.route_ptr[r], index.route_ptr[r + 1]
        buses = np.arange(lo, hi)
        ranked = buses[np.lexsort((buses, -index.standalone[lo:hi]))]
        picks.extend(int(b) for b in ranked[:instance.quotas[rid]])
    return Frequency(tuple(index.bus(b) for b in picks),
                     info={"algorithm": "topk", "spn": index.evaluate(picks)})


def combination_count(instance: Instance) -> int:
    counts = instance.candidates_per_route()
    return math.prod(math.comb(counts[rid], n) for rid, n in instance.quotas.items())


def brute_force_opt(instance: Instance, theta: int, limit: int = 2_000_000):
    """Exact optimum by enumerating every quota-respecting selection.

    Coverage is evaluated straight from :func:`serve_indicator`, independent
    of the serve index. Branches whose optimistic bound (current coverage
    plus, per remaining route, the best ``n_i`` residual gains) cannot beat
    the incumbent are skipped. Among optimal selections the lexicographically
    first is returned. Returns ``(Frequency, opt)``.
    """
    instance.check_quotas()
    total = combination_count(instance)
    if total > limit:
        raise OracleLimitError(total, limit)
    routes = instance.routes
    per_route = {rid: [] for rid in routes}
    for b in instance.candidates:
        mask = 0
        for i, p in enumerate(instance.passengers):
            if serve_indicator(b, p, routes, theta):
                mask |= 1 << i
        per_route[b.route_id].append((b, mask))
    order = [rid for rid in routes if instance.quotas[rid] > 0]
    quotas = instance.quotas
    best = [-1, None]

    def bound(covered, level):
        extra = 0
        for rid in order[level:]:
            gains = sorted(((m & ~covered).bit_count() for _, m in per_route[rid]), reverse=True)
            extra += sum(gains[:quotas[rid]])
        return covered.bit_count() + extra

    def dfs(level, covered, chosen):
        if level == len(order):
            value = covered.bit_count()
            if value > best[0]:
                best[0], best[1] = value, list(chosen)
            return
        if best[0] >= 0 and bound(covered, level) <= best[0]:
            return
        cands = per_route[order[level]]
        for combo in combinations(range(len(cands)), quotas[order[level]]):
            mask = covered
            for i in combo:
                mask |= cands[i][1]
            dfs(level + 1, mask, chosen + [cands[i][0] for i in combo])

    dfs(0, 0, [])
    return Frequency(tuple(best[1]), info={"algorithm": "bruteforce", "spn": best[0],
                                            "combinations": total}), best[0]
