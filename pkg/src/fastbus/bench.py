"""Parameter-sweep benchmark harness.

A suite is a JSON object::

    {"generator": {...GeneratorConfig fields...}       # or
     "instance": {"routes": ..., "passengers": ..., "quotas": ...,
                  "candidates": ..., "window": [s, e], "step": 60},
     "algos": ["greedy", "partgreedy", ...],
     "defaults": {"theta": 180, "rho": "0.2", "epsilon": "0.01", "n": 30},
     "sweeps": {"theta": [60, 120], "rho": [...], "epsilon": [...],
                "n": [...], "passengers": [...]},
     "repeats": 10, "seed": 0, "fixinterval_window": [18000, 86400],
     "emit_schedules": false, "threads": 1}

Each sweep value is one cell; every other parameter keeps its default. With
a generator, repeat ``r`` draws a fresh instance with seed ``seed + r``, so
means are over seeds; with instance files every repeat reruns the same
instance, whose own quotas apply unless ``n`` is set. SPN is always
recomputed from the schedule.
"""
from __future__ import annotations

import csv
import json
import logging
import statistics
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from .io import (DEFAULT_STEP, DEFAULT_WINDOW, GeneratorConfig, generate_instance,
                 load_instance, write_schedule)
from .runner import ALGORITHMS, DEFAULTS, build_index, metrics, run_algorithm

log = logging.getLogger(__name__)

PARAMS = ("theta", "rho", "epsilon", "n", "passengers")
BENCH_HEADER = ["cell", "algo", "param", "value", "mean_spn", "mean_runtime_ms", "repeats"]
RUNS_HEADER = ["cell", "algo", "param", "value", "repeat", "seed", "spn", "runtime_ms"]


@dataclass
class Suite:
    algos: list
    generator: dict | None = None
    instance: dict | None = None
    defaults: dict = field(default_factory=dict)
    sweeps: dict = field(default_factory=dict)
    repeats: int = 10
    seed: int = 0
    fixinterval_window: tuple = DEFAULT_WINDOW
    emit_schedules: bool = False
    threads: int = 1

    def __post_init__(self):
        if (self.generator is None) == (self.instance is None):
            raise ValueError("a suite needs exactly one of 'generator' or 'instance'")
        unknown = [a for a in self.algos if a not in ALGORITHMS]
        if unknown:
            raise ValueError(f"unknown algorithms: {unknown}")
        bad = [p for p in list(self.sweeps) + list(self.defaults) if p not in PARAMS]
        if bad:
            raise ValueError(f"unknown parameters: {bad}")
        if self.repeats < 1:
            raise ValueError("repeats must be positive")
        self.fixinterval_window = tuple(self.fixinterval_window)

    @classmethod
    def from_json(cls, path) -> "Suite":
        return cls(**json.loads(Path(path).read_text()))

    def settings(self, param=None, value=None) -> dict:
        out = {k: v for k, v in DEFAULTS.items()
               if k != "n" or self.generator is not None}
        out.update(self.defaults)
        if param is not None:
            out[param] = value
        return out

    def cells(self):
        """``(cell, param, value, settings)`` for every sweep value."""
        if not self.sweeps:
            yield "default", "default", "", self.settings()
            return
        for param, values in self.sweeps.items():
            for value in values:
                yield f"{param}={value}", param, value, self.settings(param, value)


@dataclass
class BenchResult:
    runs: list = field(default_factory=list)       # one dict per (cell, algo, repeat)
    summary: list = field(default_factory=list)    # one dict per (cell, algo)
    failures: list = field(default_factory=list)   # (cell, algo, repeat, message)


class _Cache:
    """Instances and indexes of the current repeat, shared between cells."""

    def __init__(self, suite: Suite):
        self.suite = suite
        self.base = {}
        self.index = {}

    def instance(self, repeat: int, settings: dict):
        s = self.suite
        if s.generator is not None:
            cfg = GeneratorConfig(**s.generator)
            cfg = replace(cfg, seed=s.seed + repeat,
                          passenger_count=int(settings.get("passengers", cfg.passenger_count)))
            key = (cfg.seed, cfg.passenger_count)
            if key not in self.base:
                self.base.clear()
                self.index.clear()
                self.base[key] = (generate_instance(cfg), asdict(cfg))
        else:
            if "passengers" in settings:
                raise ValueError("a passengers setting needs a generator suite")
            key = ("files",)
            if key not in self.base:
                files = s.instance
                inst, _ = load_instance(files["routes"], files["passengers"], files["quotas"],
                                        files.get("candidates"),
                                        window=tuple(files.get("window", DEFAULT_WINDOW)),
                                        step=int(files.get("step", DEFAULT_STEP)))
                self.base[key] = (inst, {k: str(v) for k, v in files.items()})
        inst, source = self.base[key]
        if "n" in settings:
            inst = inst.with_quotas({rid: int(settings["n"]) for rid in inst.routes})
        return key, inst, source

    def built(self, key, theta: int, inst):
        """``(index, build_ms)``; the index does not depend on quotas."""
        if key + (theta,) not in self.index:
            self.index[key + (theta,)] = build_index(inst, theta)
        return self.index[key + (theta,)]


def run_suite(suite: Suite, out_dir=None) -> BenchResult:
    """Run every cell ``suite.repeats`` times; write outputs if ``out_dir`` is given."""
    result = BenchResult()
    cache = _Cache(suite)
    cells = list(suite.cells())
    warm = {"bruteforce", "fixinterval"}
    for repeat in range(suite.repeats):
        for cell, param, value, settings in cells:
            try:
                key, inst, source = cache.instance(repeat, settings)
                theta = int(settings["theta"])
                index, build_ms = cache.built(key, theta, inst)
            except Exception as exc:  # a broken cell must not stop the suite
                log.error("cell %s repeat %d: %s", cell, repeat, exc)
                for algo in suite.algos:
                    result.failures.append((cell, algo, repeat, str(exc)))
                continue
            for algo in suite.algos:
                try:
                    if algo not in warm:
                        # load compiled kernels outside the measurement
                        run_algorithm(algo, inst, theta, index=index, rho=settings["rho"],
                                      epsilon=settings["epsilon"], threads=suite.threads)
                        warm.add(algo)
                    freq, ms = run_algorithm(algo, inst, theta, index=index,
                                             rho=settings["rho"], epsilon=settings["epsilon"],
                                             window=suite.fixinterval_window,
                                             threads=suite.threads)
                    params = {k: settings[k] for k in settings}
                    record = metrics(freq, inst, theta, ms, index_build_ms=build_ms,
                                     params=params)
                    freq.validate(inst, require_candidates=algo != "fixinterval")
                except Exception as exc:
                    log.error("cell %s algo %s repeat %d: %s", cell, algo, repeat, exc)
                    result.failures.append((cell, algo, repeat, str(exc)))
                    continue
                seed = key[0] if suite.generator is not None else ""
                result.runs.append({"cell": cell, "algo": algo, "param": param, "value": value,
                                    "repeat": repeat, "seed": seed, "spn": record["spn"],
                                    "runtime_ms": ms})
                if suite.emit_schedules and out_dir is not None:
                    target = Path(out_dir) / "schedules" / cell / algo / f"r{repeat}"
                    target.mkdir(parents=True, exist_ok=True)
                    write_schedule(freq, target / "schedule.csv")
                    record["source"] = source
                    record["quotas"] = {str(k): v for k, v in inst.quotas.items()}
                    (target / "metrics.json").write_text(json.dumps(record, indent=2))
    result.summary = summarize(result.runs)
    if out_dir is not None:
        write_outputs(result, suite, out_dir)
    return result


def summarize(runs) -> list:
    groups = {}
    for r in runs:
        groups.setdefault((r["cell"], r["algo"]), []).append(r)
    out = []
    for (cell, algo), rs in groups.items():
        out.append({"cell": cell, "algo": algo, "param": rs[0]["param"], "value": rs[0]["value"],
                    "mean_spn": statistics.fmean(r["spn"] for r in rs),
                    "mean_runtime_ms": statistics.fmean(r["runtime_ms"] for r in rs),
                    "repeats": len(rs)})
    return out


def write_outputs(result: BenchResult, suite: Suite, out_dir) -> None:
    """``bench.csv``, ``runs.csv`` and per-parameter gnuplot tables.

    Each parameter gets ``<param>_spn.dat`` and ``<param>_runtime.dat`` with
    one row per swept value and one column per algorithm.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "bench.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, BENCH_HEADER, lineterminator="\n")
        w.writeheader()
        w.writerows(result.summary)
    with open(out / "runs.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, RUNS_HEADER, lineterminator="\n")
        w.writeheader()
        w.writerows(result.runs)
    table = {(s["param"], str(s["value"]), s["algo"]): s for s in result.summary}
    for param, values in (suite.sweeps or {"default": [""]}).items():
        for metric, name in (("mean_spn", "spn"), ("mean_runtime_ms", "runtime")):
            lines = ["# " + " ".join([param] + list(suite.algos))]
            for value in values:
                row = [str(value)]
                for algo in suite.algos:
                    s = table.get((param, str(value), algo))
                    row.append(f"{s[metric]:.6g}" if s else "NaN")
                lines.append(" ".join(row))
            (out / f"{param}_{name}.dat").write_text("\n".join(lines) + "\n")
    if result.failures:
        with open(out / "failures.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["cell", "algo", "repeat", "message"])
            w.writerows(result.failures)
