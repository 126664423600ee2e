"""Partitioned greedy, threshold greedy, and their combination.

The threshold greedy sorts buses once by stand-alone gain and sweeps them
repeatedly, committing every bus whose live marginal gain reaches the
current threshold ``h``; ``h`` shrinks by a factor ``1 + eps`` per sweep.
Gains are integers, so a comparison ``gain >= h`` only depends on
``ceil(h)``. The threshold sequence is therefore generated exactly as runs of
equal integer ceilings instead of carrying an ever-growing rational.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from functools import lru_cache
from fractions import Fraction

import numpy as np
from numba import njit

from .greedy import cluster_quota_ptr, run_greedy_batch, to_frequency
from .index import ServeIndex, commit_bus, restore_state
from .model import Frequency, Instance
from .partition import ClusterSet, bus_route_partitioning, rational


def first_sweep_at_or_below(h0: int, t: int, eps: Fraction) -> int:
    """Smallest ``k >= 0`` with ``h0 / (1 + eps)**k <= t``."""
    if t >= h0:
        return 0
    p, q = eps.numerator, eps.denominator
    x = math.log(h0 / t) / math.log1p(p / q)
    k = max(0, math.ceil(x))
    if abs(x - round(x)) < 1e-9 * max(1.0, x):
        # too close to call in floating point: settle it with integers
        k = max(0, round(x))
        while k > 0 and h0 * q ** (k - 1) <= t * (p + q) ** (k - 1):
            k -= 1
        while h0 * q ** k > t * (p + q) ** k:
            k += 1
    return k


def threshold_runs(h0: int, eps: Fraction):
    """Yield ``(ceil(h), sweeps, first_sweep)`` for ``h = h0 / (1 + eps)**k``.

    The run at integer threshold 1 is cut to a single sweep: once ``h <= 1``
    no later sweep can commit a bus with positive gain.
    """
    if h0 <= 0:
        return
    start = 0
    for t in range(h0, 0, -1):
        end = first_sweep_at_or_below(h0, t - 1, eps) if t > 1 else start + 1
        if end > start:
            yield t, end - start, start
        start = end


@lru_cache(maxsize=4096)
def _run_arrays(h0: int, eps: Fraction):
    runs = np.array(list(threshold_runs(h0, eps)), dtype=np.int64).reshape(-1, 3)
    return runs


@njit(cache=True, nogil=True)
def threshold_one(buses, order, run_t, run_n, run_first, standalone, bus_route, quota,
                  picks, picked_gain, pick_sweep, taken, gains, served,
                  fwd_ptr, fwd_idx, inv_ptr, inv_idx):
    """Threshold sweeps over ``buses`` followed by the zero-gain fill.

    ``buses`` is ascending; ``order`` lists positions into ``buses`` by
    descending stand-alone gain and is compacted in place. Run ``i``
    performs ``run_n[i]`` sweeps at integer threshold ``run_t[i]``.
    ``taken`` is cleared scratch of at least ``len(buses)``. Returns
    (picked by sweeps, evaluations, sweeps).
    """
    total = len(picks)
    n_order = len(order)
    picked = 0
    evals = 0
    sweeps = 0
    for i in range(len(run_t)):
        t = run_t[i]
        for s in range(run_n[i]):
            if picked >= total:
                break
            sweeps += 1
            skipped = 0
            scanned = 0
            for pos in range(n_order):
                k = order[pos]
                b = buses[k]
                scanned += 1
                if taken[k] or quota[bus_route[b]] == 0:
                    skipped += 1
                    continue
                evals += 1
                if gains[b] >= t:
                    picked_gain[picked] = gains[b]
                    commit_bus(b, gains, served, fwd_ptr, fwd_idx, inv_ptr, inv_idx)
                    taken[k] = True
                    picks[picked] = b
                    pick_sweep[picked] = run_first[i] + s
                    picked += 1
                    quota[bus_route[b]] -= 1
                    if picked >= total:
                        break
                if standalone[b] < t:
                    break
            # drop dead entries once they make up a real share of the scan
            if skipped >= 16 and 4 * skipped >= scanned:
                m = 0
                for pos in range(n_order):
                    k = order[pos]
                    if not taken[k] and quota[bus_route[buses[k]]] > 0:
                        order[m] = k
                        m += 1
                n_order = m
    swept = picked
    # every remaining bus has zero gain: fill by (route_id, depart)
    for k in range(len(buses)):
        if picked >= total:
            break
        b = buses[k]
        if not taken[k] and quota[bus_route[b]] > 0:
            taken[k] = True
            quota[bus_route[b]] -= 1
            picks[picked] = b
            picked_gain[picked] = gains[b]
            pick_sweep[picked] = -1
            commit_bus(b, gains, served, fwd_ptr, fwd_idx, inv_ptr, inv_idx)
            picked += 1
    return swept, evals, sweeps


@njit(cache=True, nogil=True)
def _descending_order(buses, standalone):
    """Positions of ``buses`` by descending stand-alone gain, stable (counting sort)."""
    m = len(buses)
    top = 0
    for k in range(m):
        top = max(top, standalone[buses[k]])
    start = np.zeros(top + 2, dtype=np.int64)
    for k in range(m):
        start[top - standalone[buses[k]] + 1] += 1
    for v in range(top + 1):
        start[v + 1] += start[v]
    order = np.empty(m, dtype=np.int64)
    for k in range(m):
        v = top - standalone[buses[k]]
        order[start[v]] = k
        start[v] += 1
    return order


@njit(cache=True, nogil=True)
def threshold_batch(cl_ptr, cl_buses, run_ptr, runs, standalone, bus_route, quota,
                    gains, served, fwd_ptr, fwd_idx, inv_ptr, inv_idx):
    """Independent threshold-greedy runs, one per cluster, each from a fresh state.

    Cluster ``c`` owns ``cl_buses[cl_ptr[c]:cl_ptr[c + 1]]`` (ascending, no
    shared routes) and the threshold runs ``runs[run_ptr[c]:run_ptr[c + 1]]``
    (rows of threshold, sweeps, first sweep). ``gains``/``served`` must be
    fresh and are fresh again on return; ``quota`` is consumed. Returns
    (picks, picked_gain, pick_sweep, pick_ptr, stats) with one stats row of
    (picked by sweeps, evaluations, sweeps) per cluster.
    """
    n = len(cl_ptr) - 1
    pick_ptr = cluster_quota_ptr(cl_ptr, cl_buses, bus_route, quota)
    picks = np.empty(pick_ptr[n], dtype=np.int64)
    picked_gain = np.empty(pick_ptr[n], dtype=np.int64)
    pick_sweep = np.empty(pick_ptr[n], dtype=np.int64)
    stats = np.zeros((n, 3), dtype=np.int64)
    width = 0
    for c in range(n):
        width = max(width, cl_ptr[c + 1] - cl_ptr[c])
    taken = np.zeros(width, dtype=np.bool_)
    for c in range(n):
        buses = cl_buses[cl_ptr[c]:cl_ptr[c + 1]]
        m = len(buses)
        order = _descending_order(buses, standalone)
        lo, hi = pick_ptr[c], pick_ptr[c + 1]
        r = runs[run_ptr[c]:run_ptr[c + 1]]
        swept, evals, sweeps = threshold_one(
            buses, order, r[:, 0], r[:, 1], r[:, 2], standalone, bus_route, quota,
            picks[lo:hi], picked_gain[lo:hi], pick_sweep[lo:hi], taken, gains, served,
            fwd_ptr, fwd_idx, inv_ptr, inv_idx)
        stats[c, 0] = swept
        stats[c, 1] = evals
        stats[c, 2] = sweeps
        taken[:m] = False
        restore_state(picks[lo:hi], gains, served, standalone,
                      fwd_ptr, fwd_idx, inv_ptr, inv_idx)
    return picks, picked_gain, pick_sweep, pick_ptr, stats


def run_pro_greedy_batch(index: ServeIndex, cl_ptr: np.ndarray, cl_buses: np.ndarray,
                         quota: np.ndarray, eps: Fraction):
    """Threshold greedy per cluster; ``quota`` is by route position and left untouched.

    Buses of routes with quota 0 must not appear in ``cl_buses``.
    """
    cl_ptr = np.asarray(cl_ptr, dtype=np.int64)
    cl_buses = np.asarray(cl_buses, dtype=np.int64)
    sizes = np.diff(cl_ptr)
    h0 = np.zeros(len(sizes), dtype=np.int64)
    nonempty = sizes > 0
    if nonempty.any():
        h0[nonempty] = np.maximum.reduceat(index.standalone[cl_buses], cl_ptr[:-1][nonempty])
    blocks = [_run_arrays(int(h), eps) for h in h0]
    run_ptr = np.zeros(len(blocks) + 1, dtype=np.int64)
    np.cumsum([len(b) for b in blocks], out=run_ptr[1:])
    runs = np.concatenate(blocks) if blocks else np.empty((0, 3), dtype=np.int64)
    with index.scratch_state() as (gains, served):
        out = threshold_batch(cl_ptr, cl_buses, run_ptr, runs, index.standalone,
                              index.bus_route, quota.astype(np.int64), gains, served,
                              index.fwd_ptr, index.fwd_idx, index.inv_ptr, index.inv_idx)
    return out + (h0,)


def run_pro_greedy(index: ServeIndex, buses: np.ndarray, quota: np.ndarray, eps: Fraction):
    """Threshold greedy over one set of buses with fresh serve state.

    Returns ``(picks, pick_sweep, stats)``; ``pick_sweep`` is -1 for buses
    added by the zero-gain fill.
    """
    buses = np.sort(np.asarray(buses, dtype=np.int64))
    buses = buses[quota[index.bus_route[buses]] > 0]
    picks, _, pick_sweep, _, st, h0 = run_pro_greedy_batch(
        index, np.array([0, len(buses)]), buses, quota, eps)
    stats = {"h0": int(h0[0]), "sweeps": int(st[0, 2]), "evaluations": int(st[0, 1]),
             "filled": int(len(picks) - st[0, 0])}
    return picks, pick_sweep, stats


def _check_epsilon(eps) -> Fraction:
    eps = rational(eps)
    if not 0 < eps < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    return eps


def pro_greedy_solve(instance: Instance, theta: int, epsilon, *,
                     index: ServeIndex | None = None) -> Frequency:
    eps = _check_epsilon(epsilon)
    instance.check_quotas()
    if index is None:
        index = ServeIndex(instance, theta)
    picks, sweeps, stats = run_pro_greedy(index, np.arange(index.n_buses),
                                          index.quota_array(instance.quotas), eps)
    return to_frequency(index, picks, algorithm="progreedy", spn=index.evaluate(picks),
                        epsilon=str(eps), order=[int(b) for b in picks],
                        pick_sweep=[int(s) for s in sweeps], **stats)


def _cluster_batches(index: ServeIndex, clusters: ClusterSet, threads: int):
    """Split the clusters into at most ``threads`` CSR batches of similar size."""
    n = len(clusters)
    groups = [list(range(n))]
    if threads > 1 and n > 1:
        groups = [[] for _ in range(min(threads, n))]
        load = [0] * len(groups)
        for c in sorted(range(n), key=lambda c: -len(clusters.clusters[c].buses)):
            g = load.index(min(load))
            groups[g].append(c)
            load[g] += len(clusters.clusters[c].buses)
        groups = [sorted(g) for g in groups]
    batches = []
    for g in groups:
        parts = [clusters.clusters[c].buses for c in g]
        ptr = np.zeros(len(parts) + 1, dtype=np.int64)
        np.cumsum([len(p) for p in parts], out=ptr[1:])
        buses = np.concatenate(parts) if parts else np.empty(0, dtype=np.int64)
        batches.append((g, ptr, buses))
    return batches


def _solve_clusters(index: ServeIndex, clusters: ClusterSet, quota: np.ndarray, solve_batch,
                    threads: int):
    """Per-cluster ``(picks, gains)`` in cluster order."""
    batches = _cluster_batches(index, clusters, threads)

    def run(batch):
        g, ptr, buses = batch
        picks, gains, pick_ptr = solve_batch(ptr, buses, quota)
        return [(c, picks[pick_ptr[i]:pick_ptr[i + 1]], gains[pick_ptr[i]:pick_ptr[i + 1]])
                for i, c in enumerate(g)]

    if len(batches) > 1:
        with ThreadPoolExecutor(max_workers=len(batches)) as pool:
            done = [r for out in pool.map(run, batches) for r in out]
    else:
        done = [r for batch in batches for r in run(batch)]
    done.sort(key=lambda r: r[0])
    return [(picks, gains) for _, picks, gains in done]


def _partitioned(instance, theta, rho, index, threads, solve_batch, algorithm, **extra):
    instance.check_quotas()
    if index is None:
        index = ServeIndex(instance, theta)
    n_min = min(instance.quotas.values())
    clusters = bus_route_partitioning(instance, theta, n_min, rho, index=index)
    quota = index.quota_array(instance.quotas)
    results = _solve_clusters(index, clusters, quota, solve_batch(index), threads)
    picks = np.concatenate([r[0] for r in results]) if results else np.empty(0, np.int64)
    per_cluster = []
    for i, (c, (_, gains)) in enumerate(zip(clusters, results)):
        per_cluster.append({"cluster_id": i, "route_ids": list(c.routes),
                            "pool_size": c.pool_size, "rho": float(c.rho),
                            "g_bar": c.g_bar, "spn": int(gains.sum())})
    return to_frequency(index, picks, algorithm=algorithm, spn=index.evaluate(picks),
                        rho=str(rational(rho)), rho_max=clusters.rho_max,
                        n_clusters=len(clusters), merges=clusters.merges,
                        per_cluster=per_cluster, **extra)


def part_greedy_solve(instance: Instance, theta: int, rho, *,
                      index: ServeIndex | None = None, threads: int = 1) -> Frequency:
    """Partition routes, then run greedy per cluster on the cluster's pool."""
    def solve_batch(idx):
        def run(ptr, buses, quota):
            picks, gains, pick_ptr, _ = run_greedy_batch(idx, ptr, buses, quota)
            return picks, gains, pick_ptr
        return run
    return _partitioned(instance, theta, rho, index, threads, solve_batch, "partgreedy")


def pro_part_greedy_solve(instance: Instance, theta: int, rho, epsilon, *,
                          index: ServeIndex | None = None, threads: int = 1) -> Frequency:
    """Partition routes, then run the threshold greedy per cluster."""
    eps = _check_epsilon(epsilon)

    def solve_batch(idx):
        def run(ptr, buses, quota):
            picks, gains, _, pick_ptr, _, _ = run_pro_greedy_batch(idx, ptr, buses, quota, eps)
            return picks, gains, pick_ptr
        return run
    return _partitioned(instance, theta, rho, index, threads, solve_batch, "propartgreedy",
                        epsilon=str(eps))
