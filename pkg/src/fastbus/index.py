"""Forward/inverted serve lists for O(1) marginal gains.

The forward list maps every candidate bus to the passengers it can serve and
keeps a counter of those still unserved; the inverted list maps every
passenger to the buses that could serve it. Committing a bus marks its
passengers served and decrements the counters of every other bus that could
have served them, so the counter of a bus *is* its marginal gain.

Buses are dense integers in ``(route_id, depart)`` order, passengers are
positions in ``instance.passengers``. Both lists are CSR arrays.
"""
from __future__ import annotations

import struct
import threading
from contextlib import contextmanager
from pathlib import Path

import numpy as np
from numba import njit

from .model import BusCandidate, ContractError, Instance, InstanceError, od_routes

OPEN, COMMITTED, REMOVED = 0, 1, 2

SNAPSHOT_MAGIC = b"FSIX1"
_KEY_SHIFT = np.int64(1) << 32


@njit(cache=True, nogil=True)
def commit_bus(b, gains, served, fwd_ptr, fwd_idx, inv_ptr, inv_idx):
    """Mark every unserved passenger of ``b`` served; returns how many flipped."""
    flips = 0
    for k in range(fwd_ptr[b], fwd_ptr[b + 1]):
        p = fwd_idx[k]
        if not served[p]:
            served[p] = True
            flips += 1
            for m in range(inv_ptr[p], inv_ptr[p + 1]):
                gains[inv_idx[m]] -= 1
    return flips


@njit(cache=True, nogil=True)
def restore_state(picks, gains, served, standalone, fwd_ptr, fwd_idx, inv_ptr, inv_idx):
    """Undo the commits of ``picks`` on a state that started fresh."""
    for b in picks:
        for k in range(fwd_ptr[b], fwd_ptr[b + 1]):
            p = fwd_idx[k]
            if served[p]:
                served[p] = False
                for m in range(inv_ptr[p], inv_ptr[p + 1]):
                    gains[inv_idx[m]] = standalone[inv_idx[m]]


@njit(cache=True, nogil=True)
def evaluate_picks(picks, n_passengers, fwd_ptr, fwd_idx):
    """Number of distinct passengers served by ``picks``."""
    served = np.zeros(n_passengers, dtype=np.bool_)
    total = 0
    for b in picks:
        for k in range(fwd_ptr[b], fwd_ptr[b + 1]):
            p = fwd_idx[k]
            if not served[p]:
                served[p] = True
                total += 1
    return total


def _expand_ranges(lo, hi):
    """Concatenate ``arange(lo[i], hi[i])`` for all i, vectorised."""
    counts = hi - lo
    total = int(counts.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64)
    starts = np.repeat(lo - np.concatenate(([0], np.cumsum(counts)[:-1])), counts)
    return starts + np.arange(total, dtype=np.int64)


def _csr(keys, values, n):
    order = np.argsort(keys, kind="stable")
    ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(keys, minlength=n), out=ptr[1:])
    return ptr, values[order].astype(np.int64)


class ServeIndex:
    """Serve lists of an instance for a fixed waiting threshold ``theta``."""

    def __init__(self, instance: Instance, theta: int, *, _arrays=None):
        if theta < 0:
            raise ValueError("theta must be non-negative")
        self.instance = instance
        self.theta = int(theta)
        self.route_ids = list(instance.routes)
        self.route_pos = {rid: i for i, rid in enumerate(self.route_ids)}
        cands = instance.candidates
        self.bus_route = np.fromiter((self.route_pos[b.route_id] for b in cands),
                                     dtype=np.int64, count=len(cands))
        self.bus_depart = np.fromiter((b.depart for b in cands), dtype=np.int64, count=len(cands))
        if len(cands) and self.bus_depart.min() < 0:
            raise InstanceError("candidate departures must be non-negative")
        n_routes = len(self.route_ids)
        self.route_ptr = np.zeros(n_routes + 1, dtype=np.int64)
        np.cumsum(np.bincount(self.bus_route, minlength=n_routes), out=self.route_ptr[1:])
        self.bus_id = {b: i for i, b in enumerate(cands)}
        if _arrays is None:
            _arrays = self._build()
        (self.fwd_ptr, self.fwd_idx, self.inv_ptr, self.inv_idx,
         self.pool_ptr, self.pool_idx) = _arrays
        self.standalone = np.diff(self.fwd_ptr)
        # passenger -> route positions whose pool holds it
        owner = np.repeat(np.arange(n_routes, dtype=np.int64), np.diff(self.pool_ptr))
        self.owner_ptr, self.owner_route = _csr(self.pool_idx, owner, self.n_passengers)
        self._local = threading.local()
        self.reset()

    # -- construction -------------------------------------------------

    def _build(self):
        inst = self.instance
        table = od_routes(inst.routes)
        pair_p, pair_r, pair_lo = [], [], []
        rpos = self.route_pos
        for i, p in enumerate(inst.passengers):
            for rid, off in table.get((p.board, p.alight), ()):
                pair_p.append(i)
                pair_r.append(rpos[rid])
                pair_lo.append(p.arrival - off)
        pair_p = np.asarray(pair_p, dtype=np.int64)
        pair_r = np.asarray(pair_r, dtype=np.int64)
        pair_lo = np.asarray(pair_lo, dtype=np.int64)
        n_p = len(inst.passengers)
        n_b = len(inst.candidates)
        n_r = len(self.route_ids)

        # buses are sorted by (route, depart): one global key array is sorted too
        bus_key = self.bus_route * _KEY_SHIFT + self.bus_depart
        lo_val = np.maximum(pair_lo, 0)
        hi_val = pair_lo + self.theta
        lo = np.searchsorted(bus_key, pair_r * _KEY_SHIFT + lo_val, side="left")
        hi = np.searchsorted(bus_key, pair_r * _KEY_SHIFT + np.maximum(hi_val, 0), side="right")
        hi = np.where(hi_val < 0, lo, np.maximum(hi, lo))

        inv_idx = _expand_ranges(lo, hi)
        per_pass = np.bincount(pair_p, weights=hi - lo, minlength=n_p).astype(np.int64)
        inv_ptr = np.zeros(n_p + 1, dtype=np.int64)
        np.cumsum(per_pass, out=inv_ptr[1:])
        owner = np.repeat(np.arange(n_p, dtype=np.int64), per_pass)
        fwd_ptr, fwd_idx = _csr(inv_idx, owner, n_b)
        pool_ptr, pool_idx = _csr(pair_r, pair_p, n_r)
        return fwd_ptr, fwd_idx, inv_ptr, inv_idx, pool_ptr, pool_idx

    # -- sizes / lookups ----------------------------------------------

    @property
    def n_buses(self) -> int:
        return len(self.bus_route)

    @property
    def n_passengers(self) -> int:
        return len(self.inv_ptr) - 1

    def bus(self, b: int) -> BusCandidate:
        return self.instance.candidates[b]

    def resolve(self, bus) -> int:
        if isinstance(bus, BusCandidate):
            try:
                return self.bus_id[bus]
            except KeyError:
                raise ContractError(f"{bus} is not a candidate") from None
        b = int(bus)
        if not 0 <= b < self.n_buses:
            raise ContractError(f"bus index {b} out of range")
        return b

    def served_list(self, bus) -> np.ndarray:
        b = self.resolve(bus)
        return self.fwd_idx[self.fwd_ptr[b]:self.fwd_ptr[b + 1]]

    def optional_buses(self, p: int) -> np.ndarray:
        return self.inv_idx[self.inv_ptr[p]:self.inv_ptr[p + 1]]

    def route_buses(self, route_id) -> np.ndarray:
        r = self.route_pos[route_id]
        return np.arange(self.route_ptr[r], self.route_ptr[r + 1], dtype=np.int64)

    def route_pool(self, r: int) -> np.ndarray:
        """Passengers whose OD pair lies on route position ``r`` (time ignored)."""
        return self.pool_idx[self.pool_ptr[r]:self.pool_ptr[r + 1]]

    def quota_array(self, quotas) -> np.ndarray:
        q = np.zeros(len(self.route_ids), dtype=np.int64)
        for rid, n in quotas.items():
            q[self.route_pos[rid]] = n
        return q

    # -- incremental state --------------------------------------------

    def fresh_state(self):
        """Independent ``(gains, served)`` arrays for a solver run."""
        return self.standalone.copy(), np.zeros(self.n_passengers, dtype=np.bool_)

    @contextmanager
    def scratch_state(self):
        """Fresh ``(gains, served)`` buffers reused by the calling thread.

        The body must hand them back fresh; if it raises they are dropped.
        """
        state = getattr(self._local, "state", None) or self.fresh_state()
        self._local.state = None
        yield state
        self._local.state = state

    def reset(self) -> None:
        self.gains, self.served = self.fresh_state()
        self.status = np.zeros(self.n_buses, dtype=np.int8)
        self.value = 0

    def _check_open(self, b: int) -> None:
        if self.status[b] == COMMITTED:
            raise ContractError(f"bus {self.bus(b)} already committed")
        if self.status[b] == REMOVED:
            raise ContractError(f"bus {self.bus(b)} belongs to a removed route")

    def marginal_gain(self, bus) -> int:
        b = self.resolve(bus)
        self._check_open(b)
        return int(self.gains[b])

    def commit(self, bus) -> int:
        b = self.resolve(bus)
        self._check_open(b)
        self.status[b] = COMMITTED
        flips = int(commit_bus(b, self.gains, self.served, self.fwd_ptr, self.fwd_idx,
                               self.inv_ptr, self.inv_idx))
        self.value += flips
        return flips

    def remove_route(self, route_id) -> None:
        r = self.route_pos[route_id]
        span = self.status[self.route_ptr[r]:self.route_ptr[r + 1]]
        span[span == OPEN] = REMOVED

    def eligible(self) -> np.ndarray:
        return np.flatnonzero(self.status == OPEN)

    def evaluate(self, picks) -> int:
        """Served-passenger count of ``picks``, using fresh state."""
        picks = np.asarray(picks, dtype=np.int64)
        if len(picks) and (picks.min() < 0 or picks.max() >= self.n_buses):
            raise ContractError("bus index out of range")
        return int(evaluate_picks(picks, self.n_passengers, self.fwd_ptr, self.fwd_idx))

    # -- snapshot -----------------------------------------------------

    def save(self, path) -> None:
        """Write the adjacency arrays in the ``FSIX1`` little-endian layout.

        Header: magic, then u32 theta, buses, passengers, serve pairs,
        routes and pool entries. Body: u32 arrays fwd_ptr, fwd_idx, inv_ptr,
        inv_idx, pool_ptr, pool_idx.
        """
        header = struct.pack("<6I", self.theta, self.n_buses, self.n_passengers,
                             len(self.fwd_idx), len(self.route_ids), len(self.pool_idx))
        with open(path, "wb") as fh:
            fh.write(SNAPSHOT_MAGIC)
            fh.write(header)
            for arr in (self.fwd_ptr, self.fwd_idx, self.inv_ptr, self.inv_idx,
                        self.pool_ptr, self.pool_idx):
                fh.write(arr.astype("<u4").tobytes())

    @classmethod
    def load(cls, path, instance: Instance) -> "ServeIndex":
        data = Path(path).read_bytes()
        if data[:5] != SNAPSHOT_MAGIC or len(data) < 5 + 24:
            raise InstanceError(f"{path}: not an index snapshot")
        theta, n_b, n_p, nnz, n_r, n_pool = struct.unpack_from("<6I", data, 5)
        if (n_b, n_p, n_r) != (len(instance.candidates), len(instance.passengers), len(instance.routes)):
            raise InstanceError(f"{path}: snapshot does not match the instance sizes")
        sizes = (n_b + 1, nnz, n_p + 1, nnz, n_r + 1, n_pool)
        off = 5 + 24
        if off + 4 * sum(sizes) != len(data):
            raise InstanceError(f"{path}: trailing or truncated snapshot data")
        arrays = []
        for n in sizes:
            arrays.append(np.frombuffer(data, dtype="<u4", count=n, offset=off).astype(np.int64))
            off += 4 * n
        return cls(instance, theta, _arrays=tuple(arrays))


def build(instance: Instance, theta: int) -> ServeIndex:
    return ServeIndex(instance, theta)
