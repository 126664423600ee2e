"""Index-based greedy under per-route departure quotas."""
from __future__ import annotations

import numpy as np
from numba import njit

from .index import ServeIndex, commit_bus, restore_state
from .model import Frequency, Instance


@njit(cache=True, nogil=True)
def greedy_one(buses, bus_route, quota, picks, picked_gain, open_, gains, served,
               fwd_ptr, fwd_idx, inv_ptr, inv_idx):
    """Fill ``picks`` from ``buses`` by largest marginal gain; returns evaluations.

    ``buses`` must be in tie-break order; the first maximum wins. ``quota``
    is consumed in place and must be feasible for ``buses``. ``open_`` is
    scratch space of at least ``len(buses)``.
    """
    m = len(buses)
    for k in range(m):
        open_[k] = quota[bus_route[buses[k]]] > 0
    evals = 0
    for it in range(len(picks)):
        best = -1
        best_gain = -1
        for k in range(m):
            if open_[k]:
                evals += 1
                g = gains[buses[k]]
                if g > best_gain:
                    best_gain = g
                    best = k
        b = buses[best]
        open_[best] = False
        picks[it] = b
        picked_gain[it] = best_gain
        commit_bus(b, gains, served, fwd_ptr, fwd_idx, inv_ptr, inv_idx)
        r = bus_route[b]
        quota[r] -= 1
        if quota[r] == 0:
            for k in range(m):
                if open_[k] and bus_route[buses[k]] == r:
                    open_[k] = False
    return evals


@njit(cache=True, nogil=True)
def cluster_quota_ptr(cl_ptr, cl_buses, bus_route, quota):
    """Offsets of each cluster's picks: the quota sum of the routes it holds.

    Cluster buses are ascending, so the buses of one route are adjacent.
    """
    n = len(cl_ptr) - 1
    ptr = np.zeros(n + 1, dtype=np.int64)
    for c in range(n):
        total = 0
        last = -1
        for k in range(cl_ptr[c], cl_ptr[c + 1]):
            r = bus_route[cl_buses[k]]
            if r != last:
                total += quota[r]
                last = r
        ptr[c + 1] = ptr[c] + total
    return ptr


@njit(cache=True, nogil=True)
def greedy_batch(cl_ptr, cl_buses, bus_route, quota, standalone, gains, served,
                 fwd_ptr, fwd_idx, inv_ptr, inv_idx):
    """Independent greedy runs, one per cluster, each from a fresh state.

    Cluster ``c`` owns ``cl_buses[cl_ptr[c]:cl_ptr[c + 1]]`` (ascending) and
    clusters share no route. ``gains``/``served`` must be fresh and are
    fresh again on return; ``quota`` is consumed. Returns (picks,
    picked_gain, pick_ptr, evaluations per cluster).
    """
    n = len(cl_ptr) - 1
    pick_ptr = cluster_quota_ptr(cl_ptr, cl_buses, bus_route, quota)
    picks = np.empty(pick_ptr[n], dtype=np.int64)
    picked_gain = np.empty(pick_ptr[n], dtype=np.int64)
    evals = np.zeros(n, dtype=np.int64)
    width = 0
    for c in range(n):
        width = max(width, cl_ptr[c + 1] - cl_ptr[c])
    open_ = np.empty(width, dtype=np.bool_)
    for c in range(n):
        lo, hi = pick_ptr[c], pick_ptr[c + 1]
        evals[c] = greedy_one(cl_buses[cl_ptr[c]:cl_ptr[c + 1]], bus_route, quota,
                              picks[lo:hi], picked_gain[lo:hi], open_, gains, served,
                              fwd_ptr, fwd_idx, inv_ptr, inv_idx)
        restore_state(picks[lo:hi], gains, served, standalone,
                      fwd_ptr, fwd_idx, inv_ptr, inv_idx)
    return picks, picked_gain, pick_ptr, evals


def run_greedy_batch(index: ServeIndex, cl_ptr: np.ndarray, cl_buses: np.ndarray,
                     quota: np.ndarray):
    """Greedy per cluster; ``quota`` is by route position and left untouched."""
    with index.scratch_state() as (gains, served):
        return greedy_batch(np.asarray(cl_ptr, dtype=np.int64),
                            np.asarray(cl_buses, dtype=np.int64), index.bus_route,
                            quota.astype(np.int64), index.standalone, gains, served,
                            index.fwd_ptr, index.fwd_idx, index.inv_ptr, index.inv_idx)


def run_greedy(index: ServeIndex, buses: np.ndarray, quota: np.ndarray):
    """Greedy over one ascending set of buses with fresh serve state.

    ``quota`` is indexed by route position; routes not present in ``buses``
    must have quota 0. Returns (picks, gains, evaluations).
    """
    buses = np.asarray(buses, dtype=np.int64)
    picks, gains, _, evals = run_greedy_batch(index, np.array([0, len(buses)]), buses, quota)
    return picks, gains, int(evals[0])


def to_frequency(index: ServeIndex, picks, **info) -> Frequency:
    # bus indices follow (route_id, depart) order, so this presorts the schedule
    return Frequency(tuple(index.bus(int(b)) for b in np.sort(picks)), info=info)


def greedy_solve(instance: Instance, theta: int, *, index: ServeIndex | None = None) -> Frequency:
    """Repeatedly add the bus with the largest marginal gain.

    Ties go to the smallest ``(route_id, depart)``. A route drops out once its
    quota is met; zero-gain buses keep being added until every quota is met.
    """
    instance.check_quotas()
    if index is None:
        index = ServeIndex(instance, theta)
    picks, gains, evals = run_greedy(index, np.arange(index.n_buses),
                                     index.quota_array(instance.quotas))
    return to_frequency(index, picks, algorithm="greedy", spn=int(gains.sum()),
                        evaluations=evals, order=[int(b) for b in picks],
                        gains=[int(g) for g in gains])
