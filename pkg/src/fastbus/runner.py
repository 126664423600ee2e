"""Uniform entry point for every scheduler, with wall-clock timing."""
from __future__ import annotations

import time
from fractions import Fraction

import numpy as np

from .baselines import brute_force_opt, fix_interval, top_k
from .greedy import greedy_solve
from .index import ServeIndex
from .io import DEFAULT_WINDOW
from .model import ContractError, Frequency, Instance
from .propart import part_greedy_solve, pro_greedy_solve, pro_part_greedy_solve

ALGORITHMS = ("greedy", "partgreedy", "propartgreedy", "progreedy", "fixinterval", "topk",
              "bruteforce")

# default experiment settings; "n" applies to generated instances only
DEFAULTS = {"theta": 180, "rho": "0.2", "epsilon": "0.01", "n": 30}


def build_index(instance: Instance, theta: int):
    t0 = time.perf_counter()
    index = ServeIndex(instance, theta)
    return index, (time.perf_counter() - t0) * 1000.0


def run_algorithm(name: str, instance: Instance, theta: int, *, index: ServeIndex | None = None,
                  rho=DEFAULTS["rho"], epsilon=DEFAULTS["epsilon"], window=DEFAULT_WINDOW,
                  threads: int = 1, limit: int = 2_000_000) -> tuple[Frequency, float]:
    """Run one scheduler; returns ``(frequency, runtime_ms)``.

    Only the solve call is timed; pass a prebuilt ``index`` to keep its
    construction out of the measurement.
    """
    if name not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {name!r}")
    t0 = time.perf_counter()
    if name == "greedy":
        freq = greedy_solve(instance, theta, index=index)
    elif name == "partgreedy":
        freq = part_greedy_solve(instance, theta, rho, index=index, threads=threads)
    elif name == "propartgreedy":
        freq = pro_part_greedy_solve(instance, theta, rho, epsilon, index=index, threads=threads)
    elif name == "progreedy":
        freq = pro_greedy_solve(instance, theta, epsilon, index=index)
    elif name == "topk":
        freq = top_k(instance, theta, index=index)
    elif name == "fixinterval":
        freq = fix_interval(window, instance.quotas)
    else:
        freq, _ = brute_force_opt(instance, theta, limit)
    return freq, (time.perf_counter() - t0) * 1000.0


def _plain(value):
    """JSON-safe copy: Fractions become decimal strings."""
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.integer):
        return int(value)
    return value


def metrics(freq: Frequency, instance: Instance, theta: int, runtime_ms: float, *,
            index_build_ms: float | None = None, params: dict | None = None) -> dict:
    """Metrics record of one run; ``spn`` is recomputed from the schedule itself.

    Raises :class:`ContractError` if a solver-reported value disagrees.
    """
    spn = instance.objective(freq, theta)
    reported = freq.info.get("spn")
    if reported is not None and reported != spn:
        raise ContractError(f"{freq.info.get('algorithm')}: reported spn {reported} != {spn}")
    out = {
        "algorithm": freq.info.get("algorithm"),
        "spn": spn,
        "runtime_ms": runtime_ms,
        "index_build_ms": index_build_ms,
        "params": _plain(params or {}),
        "unservable_count": instance.unservable(),
        "quota_total": instance.total_quota,
    }
    if "per_cluster" in freq.info:
        out["per_cluster"] = _plain(freq.info["per_cluster"])
        out["rho_max"] = str(freq.info["rho_max"])
        out["n_clusters"] = freq.info["n_clusters"]
    return out
