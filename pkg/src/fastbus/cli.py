"""Command-line interface: generate, solve, partition, compare, bench.

Exit codes: 0 success, 1 invalid input, 2 infeasible quotas or an
exhaustive search over its limit (argparse usage errors also exit 2),
3 an approximation bound violated in ``compare``.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

from .baselines import OracleLimitError
from .bench import Suite, run_suite
from .index import ServeIndex
from .io import (DEFAULT_STEP, DEFAULT_WINDOW, GeneratorConfig, generate_instance,
                 load_instance, save_instance, write_schedule)
from .model import InfeasibleQuotaError, InstanceError
from .partition import bus_route_partitioning, rational
from .runner import ALGORITHMS, DEFAULTS, build_index, metrics, run_algorithm

EXIT_INVALID, EXIT_INFEASIBLE, EXIT_BOUND = 1, 2, 3

log = logging.getLogger("fastbus")


def _window(text: str):
    try:
        start, end = (int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected START,END in integer seconds") from None
    return start, end


def _rational(text: str):
    try:
        return rational(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from None


def _instance_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("instance")
    g.add_argument("--routes", required=True, help="routes.csv")
    g.add_argument("--passengers", required=True, help="passengers.csv")
    g.add_argument("--quotas", required=True, help="quotas.csv")
    g.add_argument("--candidates", help="explicit candidates.csv (default: generated)")
    g.add_argument("--window", type=_window, metavar="START,END",
                   help="candidate window, also the FixInterval service window")
    g.add_argument("--step", type=int, default=DEFAULT_STEP, help="candidate spacing in seconds")
    g.add_argument("--theta", type=int, default=DEFAULTS["theta"], help="waiting threshold (s)")
    return p


def _load(args):
    inst, report = load_instance(args.routes, args.passengers, args.quotas, args.candidates,
                                 window=args.window or DEFAULT_WINDOW, step=args.step)
    if report.unservable:
        log.warning("%d passengers have an OD pair no route covers", report.unservable)
    return inst


def _index(inst, theta: int, cache: str | None):
    """Build the serve index, or reuse a snapshot made for the same threshold."""
    if cache and Path(cache).exists():
        try:
            index = ServeIndex.load(cache, inst)
            if index.theta == theta:
                return index, 0.0
            log.info("index snapshot built for theta=%d, rebuilding", index.theta)
        except InstanceError as exc:
            log.info("ignoring index snapshot: %s", exc)
    index, ms = build_index(inst, theta)
    if cache:
        index.save(cache)
    return index, ms


def cmd_generate(args) -> int:
    cfg = GeneratorConfig.from_json(args.config) if args.config else GeneratorConfig()
    overrides = {k: v for k, v in (("seed", args.seed), ("passenger_count", args.passenger_count),
                                   ("route_count", args.route_count), ("quota", args.quota),
                                   ("overlap", args.overlap)) if v is not None}
    cfg = replace(cfg, **overrides)
    paths = save_instance(generate_instance(cfg), args.out)
    Path(args.out, "generator.json").write_text(cfg.to_json() + "\n")
    for name, path in paths.items():
        print(f"{name}: {path}")
    return 0


def cmd_solve(args) -> int:
    if args.algo == "fixinterval" and args.window is None:
        args.parser.error("--algo fixinterval requires --window START,END")
    inst = _load(args)
    index, build_ms = (None, None)
    if args.algo not in ("fixinterval", "bruteforce"):
        index, build_ms = _index(inst, args.theta, args.index_cache)
    freq, ms = run_algorithm(args.algo, inst, args.theta, index=index, rho=args.rho,
                             epsilon=args.epsilon, window=args.window or DEFAULT_WINDOW,
                             threads=args.threads, limit=args.limit)
    freq.validate(inst, require_candidates=args.algo != "fixinterval")
    params = {"theta": args.theta, "seed": args.seed, "threads": args.threads}
    if args.algo in ("partgreedy", "propartgreedy"):
        params["rho"] = args.rho
    if args.algo in ("progreedy", "propartgreedy"):
        params["epsilon"] = args.epsilon
    if args.algo == "fixinterval":
        params["window"] = list(args.window)
    record = metrics(freq, inst, args.theta, ms, index_build_ms=build_ms, params=params)
    write_schedule(freq, args.out)
    Path(args.metrics).write_text(json.dumps(record, indent=2) + "\n")
    print(f"{args.algo}: spn={record['spn']} runtime_ms={ms:.3f} -> {args.out}")
    return 0


def cmd_partition(args) -> int:
    inst = _load(args)
    inst.check_quotas()
    index, _ = _index(inst, args.theta, None)
    n_min = args.n_min if args.n_min is not None else min(inst.quotas.values())
    clusters = bus_route_partitioning(inst, args.theta, n_min, args.rho, index=index)
    doc = {"rho": str(args.rho), "n_min": n_min, "rho_max": str(clusters.rho_max),
           "merges": clusters.merges, "clusters": clusters.to_json()}
    text = json.dumps(doc, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return 0


def bound_factor(algo: str, info: dict, epsilon) -> float | None:
    """Guaranteed fraction of OPT, or None for algorithms without one."""
    base = 1 - 1 / math.e
    if algo in ("progreedy", "propartgreedy"):
        base -= float(epsilon)
    if algo in ("partgreedy", "propartgreedy"):
        return (1 - float(info["rho_max"])) * base
    if algo in ("greedy", "progreedy"):
        return base
    return None


def cmd_compare(args) -> int:
    inst = _load(args)
    inst.check_quotas()
    index, _ = build_index(inst, args.theta)
    opt = None
    if not args.no_oracle:
        freq, _ = run_algorithm("bruteforce", inst, args.theta, limit=args.limit)
        opt = inst.objective(freq, args.theta)
    rows, violated = [], False
    for algo in ALGORITHMS:
        if algo == "bruteforce":
            continue
        freq, ms = run_algorithm(algo, inst, args.theta, index=index, rho=args.rho,
                                 epsilon=args.epsilon, window=args.window or DEFAULT_WINDOW)
        spn = inst.objective(freq, args.theta)
        factor = bound_factor(algo, freq.info, args.epsilon)
        row = {"algo": algo, "spn": spn, "runtime_ms": ms, "ratio": None, "bound": factor,
               "ok": None}
        if opt is not None:
            row["ratio"] = spn / opt if opt else 1.0
            if factor is not None:
                row["ok"] = spn >= factor * opt - 1e-9
                violated |= not row["ok"]
        rows.append(row)
    print(f"{'algo':<14}{'spn':>8}{'ratio':>9}{'bound':>9}  check")
    for r in rows:
        ratio = "-" if r["ratio"] is None else f"{r['ratio']:.4f}"
        bound = "-" if r["bound"] is None else f"{r['bound']:.4f}"
        check = {None: "-", True: "ok", False: "VIOLATED"}[r["ok"]]
        print(f"{r['algo']:<14}{r['spn']:>8}{ratio:>9}{bound:>9}  {check}")
    if opt is not None:
        print(f"{'bruteforce':<14}{opt:>8}")
    if args.json:
        Path(args.json).write_text(json.dumps({"opt": opt, "rows": rows}, indent=2) + "\n")
    return EXIT_BOUND if violated else 0


def cmd_bench(args) -> int:
    suite = Suite.from_json(args.suite)
    if args.repeats is not None:
        suite.repeats = args.repeats
    if args.threads is not None:
        suite.threads = args.threads
    result = run_suite(suite, args.out)
    print(f"{len(result.runs)} runs, {len(result.failures)} failures -> {args.out}/bench.csv")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fastbus",
                                     description="Bus departure scheduling for passenger coverage.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    inst = _instance_parser()

    p = sub.add_parser("generate", help="write a synthetic instance")
    p.add_argument("--config", help="GeneratorConfig JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--passenger-count", type=int)
    p.add_argument("--route-count", type=int)
    p.add_argument("--quota", type=int)
    p.add_argument("--overlap", type=float)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("solve", parents=[inst], help="run one scheduler")
    p.add_argument("--algo", choices=ALGORITHMS, default="greedy")
    p.add_argument("--rho", type=_rational, default=rational(DEFAULTS["rho"]))
    p.add_argument("--epsilon", type=_rational, default=rational(DEFAULTS["epsilon"]))
    p.add_argument("--out", default="schedule.csv", help="schedule CSV")
    p.add_argument("--metrics", default="metrics.json", help="metrics JSON")
    p.add_argument("--seed", type=int, default=0, help="recorded in metrics; solvers are deterministic")
    p.add_argument("--threads", type=int, default=1, help="clusters solved concurrently")
    p.add_argument("--limit", type=int, default=2_000_000, help="bruteforce selection limit")
    p.add_argument("--index-cache", help="index snapshot to reuse or create")
    p.set_defaults(func=cmd_solve, parser=p)

    p = sub.add_parser("partition", parents=[inst], help="print route clusters")
    p.add_argument("--rho", type=_rational, default=rational(DEFAULTS["rho"]))
    p.add_argument("--n-min", type=int, help="departures per route for g_bar (default: min quota)")
    p.add_argument("--out", help="write JSON here instead of stdout")
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("compare", parents=[inst], help="all schedulers against the optimum")
    p.add_argument("--rho", type=_rational, default=rational(DEFAULTS["rho"]))
    p.add_argument("--epsilon", type=_rational, default=rational(DEFAULTS["epsilon"]))
    p.add_argument("--no-oracle", action="store_true", help="skip the exhaustive optimum")
    p.add_argument("--limit", type=int, default=2_000_000, help="bruteforce selection limit")
    p.add_argument("--json", help="write the table as JSON")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("bench", help="run a parameter-sweep suite")
    p.add_argument("--suite", required=True, help="suite JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--repeats", type=int)
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except InfeasibleQuotaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except OracleLimitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (InstanceError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
