"""Overlap-ratio guided clustering of routes.

Every route starts as its own cluster. The cluster whose passenger pool is
most shared with the rest (relative to what it can serve on its own) absorbs
the cluster it shares most passengers with, until every cluster's overlap
ratio is at most the threshold.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .greedy import run_greedy_batch
from .index import ServeIndex, _expand_ranges
from .model import Instance, Passenger, Route


def rational(x) -> Fraction:
    """Exact rational from an int, decimal string, float or Fraction."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(x)


def passenger_pool(passengers: Sequence[Passenger], routes: Iterable[Route]) -> set:
    """Indexes of passengers whose OD pair some route in ``routes`` covers in order."""
    routes = list(routes)
    return {i for i, p in enumerate(passengers)
            if any(r.covers(p.board, p.alight) for r in routes)}


def overlap_ratio(pool, g_bar: int, other_pools: Iterable) -> Fraction:
    """Share of ``pool`` that also lies in some other pool, over ``g_bar``.

    Defined as 0 when ``g_bar`` is 0 or there are no other pools.
    """
    if g_bar == 0:
        return Fraction(0)
    pool = set(int(p) for p in pool)
    shared = set()
    for other in other_pools:
        shared |= pool.intersection(int(p) for p in other)
    return Fraction(len(shared), g_bar)


@dataclass
class Cluster:
    routes: tuple          # route ids, sorted
    buses: np.ndarray      # candidate indexes, ascending
    pool: np.ndarray       # passenger indexes, ascending
    g_bar: int
    rho: Fraction
    first: int             # smallest route position, used for tie-breaks

    @property
    def pool_size(self) -> int:
        return len(self.pool)


@dataclass
class ClusterSet:
    clusters: list
    rho_threshold: Fraction
    merges: int = 0

    def __len__(self):
        return len(self.clusters)

    def __iter__(self):
        return iter(self.clusters)

    @property
    def rho_max(self) -> Fraction:
        return max((c.rho for c in self.clusters), default=Fraction(0))

    def to_json(self) -> list:
        return [{"cluster_id": i, "route_ids": list(c.routes), "pool_size": c.pool_size,
                 "rho": float(c.rho)} for i, c in enumerate(self.clusters)]


def bus_route_partitioning(instance: Instance, theta: int, n_min: int, rho, *,
                           index: ServeIndex | None = None) -> ClusterSet:
    """Merge route clusters until every overlap ratio is at most ``rho``.

    ``g_bar`` of a single route is the greedy objective with ``n_min``
    departures (fewer if the route has fewer candidates). A merged cluster
    uses the lower bound ``max(g_k + g_j - |S_k & S_j|, g_k, g_j)``. The
    expanded cluster is the one with the largest ratio, its partner the one
    sharing the most pool passengers with it; ties go to the cluster holding
    the earliest route.
    """
    rho = rational(rho)
    if not 0 < rho <= 1:
        raise ValueError("rho must lie in (0, 1]")
    if n_min < 1:
        raise ValueError("n_min must be positive")
    if index is None:
        index = ServeIndex(instance, theta)
    n_routes = len(index.route_ids)
    sizes = np.diff(index.route_ptr)
    quota = np.minimum(n_min, sizes)
    _, gains, pick_ptr, _ = run_greedy_batch(index, index.route_ptr, np.arange(index.n_buses),
                                             quota)
    g_single = np.add.reduceat(gains, pick_ptr[:-1]) if len(gains) else np.zeros(n_routes)
    g_single = np.where(np.diff(pick_ptr) > 0, g_single, 0)

    owner_ptr, owner_route = index.owner_ptr, index.owner_route
    count = np.diff(owner_ptr)
    # clusters are keyed by their earliest route position
    cluster_of = np.arange(n_routes, dtype=np.int64)
    clusters = {}
    for r, rid in enumerate(index.route_ids):
        buses = np.arange(index.route_ptr[r], index.route_ptr[r + 1], dtype=np.int64)
        clusters[r] = Cluster((rid,), buses, index.route_pool(r), int(g_single[r]),
                              Fraction(0), r)

    def ratio(c):
        if c.g_bar == 0:
            return Fraction(0)
        return Fraction(int(np.count_nonzero(count[c.pool] >= 2)), c.g_bar)

    for c in clusters.values():
        c.rho = ratio(c)

    merges = 0
    while len(clusters) > 1:
        ck = max(clusters.values(), key=lambda c: (c.rho, -c.first))
        if ck.rho <= rho:
            break
        shared = ck.pool[count[ck.pool] >= 2]
        lo, hi = owner_ptr[shared], owner_ptr[shared + 1]
        owners = cluster_of[owner_route[_expand_ranges(lo, hi)]]
        pairs = np.unique(np.repeat(shared, hi - lo) * n_routes + owners)
        common = np.bincount(pairs % n_routes, minlength=n_routes)
        common[ck.first] = -1
        mask = np.full(n_routes, True)
        mask[list(clusters)] = False
        common[mask] = -1
        cj = clusters.pop(int(np.argmax(common)))
        n_common = int(common[cj.first])
        both = np.intersect1d(ck.pool, cj.pool, assume_unique=True)
        count[both] -= 1
        ck.g_bar = max(ck.g_bar + cj.g_bar - n_common, ck.g_bar, cj.g_bar)
        ck.pool = np.union1d(ck.pool, cj.pool)
        ck.buses = np.union1d(ck.buses, cj.buses)
        members = set(ck.routes + cj.routes)
        ck.routes = tuple(rid for rid in index.route_ids if rid in members)
        for rid in cj.routes:
            cluster_of[index.route_pos[rid]] = ck.first
        if cj.first < ck.first:
            clusters.pop(ck.first)
            cluster_of[cluster_of == ck.first] = cj.first
            ck.first = cj.first
            clusters[ck.first] = ck
        # other clusters' shared sets are unchanged: the union of the pools
        # they are compared against is the same before and after the merge
        ck.rho = ratio(ck)
        merges += 1
    return ClusterSet([clusters[k] for k in sorted(clusters)], rho, merges)

