"""Command-line front end: experiment matrices, reports, and comparisons.

`rcsim run` executes a (workload x policy x seed) matrix, writing one report
JSON and one event log per cell plus a summary.csv; `rcsim compare` turns
summaries into a savings table against the peak-provisioned baseline.
Outputs are deterministic: re-running with identical inputs reproduces the
files byte for byte.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import io
import json
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from .cluster import build_cluster
from .resource_graph import GraphError, build_graph
from .sim import (
    Deadlock,
    FailureSpec,
    POLICIES,
    SIZING_MODES,
    SimConfig,
    Simulator,
)
from .workload import TraceRecord, load_trace_csv

logger = logging.getLogger("rcsim.cli")

SUMMARY_FIELDS = (
    "workload",
    "policy",
    "seed",
    "mem_gb_min",
    "used_gb_min",
    "cpu_core_s",
    "e2e_p50",
    "e2e_p99",
    "local_frac",
    "recoveries",
)


class ConfigError(ValueError):
    """Invalid configuration, workload, or flag combination."""


class KeyMismatch(ValueError):
    """Summaries being compared do not share the same workload keys."""


def _setup_logging() -> None:
    level_name = os.environ.get("RCSIM_LOG", "off").lower()
    levels = {"off": logging.CRITICAL + 10, "info": logging.INFO, "debug": logging.DEBUG}
    if level_name not in levels:
        raise ConfigError(f"RCSIM_LOG must be one of off, info, debug (got {level_name!r})")
    logging.basicConfig(level=levels[level_name], stream=sys.stderr,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")


def _parse_seeds(text: str) -> list[int]:
    if ".." in text:
        lo, hi = text.split("..", 1)
        seeds = list(range(int(lo), int(hi) + 1))
    else:
        seeds = [int(s) for s in text.split(",")]
    if not seeds:
        raise ConfigError("empty seed range")
    return seeds


def _parse_fail_inject(text: str) -> FailureSpec:
    if "@" not in text:
        raise ConfigError("--fail-inject expects comp@t")
    comp, t = text.rsplit("@", 1)
    try:
        return FailureSpec(comp_name=comp, at_time=float(t))
    except ValueError as exc:
        raise ConfigError(f"bad --fail-inject time: {t!r}") from exc


def _cell_name(workload: str, policy: str, seed: int) -> str:
    return f"{workload}__{policy}__s{seed}"


def _run_cell(
    cluster_path: str,
    workload_path: str,
    trace_path: Optional[str],
    invocations: int,
    gap_s: float,
    scale: float,
    policy: str,
    sizing: str,
    seed: int,
    fail_inject: Optional[str],
    debug: bool,
) -> tuple[str, str, int, str, list[str], list[str]]:
    """Worker for one matrix cell; returns (workload, policy, seed, report, log, row)."""
    with open(cluster_path) as fh:
        cluster = build_cluster(json.load(fh))
    with open(workload_path) as fh:
        graph = build_graph(json.load(fh))
    name = Path(workload_path).stem
    if trace_path is not None:
        trace = [t for t in load_trace_csv(trace_path) if t.app == graph.app]
    else:
        trace = [
            TraceRecord(graph.app, i * gap_s, scale) for i in range(invocations)
        ]
    failures = [_parse_fail_inject(fail_inject)] if fail_inject else []
    sim = Simulator(
        cluster,
        {graph.app: graph},
        trace,
        policy=policy,
        sizing_mode=sizing,
        seed=seed,
        debug=debug,
        failures=failures,
    )
    report = sim.run()
    agg = report.aggregate()
    row = [
        name,
        policy,
        str(seed),
        repr(agg["mem_gb_min"]),
        repr(agg["mem_used_gb_min"]),
        repr(agg["cpu_core_s_alloc"]),
        repr(agg["e2e_p50"]),
        repr(agg["e2e_p99"]),
        repr(agg["local_frac"]),
        str(int(agg["recoveries"])),
    ]
    return name, policy, seed, report.to_json(), report.event_log, row


def cmd_run(args: argparse.Namespace) -> int:
    # Validate every input up front so failures leave no partial outputs.
    try:
        with open(args.cluster) as fh:
            build_cluster(json.load(fh))
        for w in args.workload:
            with open(w) as fh:
                build_graph(json.load(fh))
        if args.trace is not None:
            load_trace_csv(args.trace)
        seeds = _parse_seeds(args.seeds)
        if args.fail_inject:
            _parse_fail_inject(args.fail_inject)
        for p in args.policy:
            if p not in POLICIES:
                raise ConfigError(f"unknown policy {p!r}")
        if args.sizing not in SIZING_MODES:
            raise ConfigError(f"unknown sizing mode {args.sizing!r}")
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read inputs: {exc}", file=sys.stderr)
        return 2
    except (GraphError, ConfigError, ValueError) as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return 2

    cells = [
        (w, p, s) for w in args.workload for p in args.policy for s in seeds
    ]
    jobs = max(1, args.jobs)
    results = {}
    try:
        if jobs == 1:
            for w, p, s in cells:
                results[(w, p, s)] = _run_cell(
                    args.cluster, w, args.trace, args.invocations, args.gap,
                    args.scale, p, args.sizing, s, args.fail_inject, args.debug,
                )
        else:
            with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
                futures = {
                    pool.submit(
                        _run_cell, args.cluster, w, args.trace, args.invocations,
                        args.gap, args.scale, p, args.sizing, s,
                        args.fail_inject, args.debug,
                    ): (w, p, s)
                    for w, p, s in cells
                }
                for fut in concurrent.futures.as_completed(futures):
                    results[futures[fut]] = fut.result()
    except Deadlock as exc:
        print(f"error: deadlock: {exc}", file=sys.stderr)
        return 3

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for w, p, s in cells:  # deterministic cell order
        name, policy, seed, report_json, event_log, row = results[(w, p, s)]
        cell = _cell_name(name, policy, seed)
        (out / f"{cell}.json").write_text(report_json + "\n")
        (out / f"{cell}.events.jsonl").write_text("\n".join(event_log) + "\n")
        rows.append(row)

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SUMMARY_FIELDS)
    writer.writerows(rows)
    (out / "summary.csv").write_text(buf.getvalue())
    print(f"wrote {len(rows)} cells to {out}")
    return 0


def _load_summary(path: str) -> dict[tuple[str, str, str], dict[str, str]]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or set(reader.fieldnames) != set(SUMMARY_FIELDS):
            raise ConfigError(f"{path}: not a summary.csv")
        return {
            (row["workload"], row["policy"], row["seed"]): row for row in reader
        }


def compare_table(rows: dict[tuple[str, str, str], dict[str, str]]) -> tuple[str, list[list[str]]]:
    """Savings of each policy versus the peak-provisioned baseline."""
    workloads = sorted({k[0] for k in rows})
    base_key = "faas-peak"
    for w in workloads:
        if not any(k[0] == w and k[1] == base_key for k in rows):
            raise KeyMismatch(f"workload {w!r} has no {base_key} baseline row")

    out_rows: list[list[str]] = []
    lines = [
        f"{'workload':<20} {'policy':<16} {'mem_reduction_%':>16} {'speedup':>10}"
    ]
    for w in workloads:
        seeds = sorted({k[2] for k in rows if k[0] == w})
        for policy in sorted({k[1] for k in rows if k[0] == w}):
            red_vals, speed_vals = [], []
            for s in seeds:
                base = rows.get((w, base_key, s))
                cur = rows.get((w, policy, s))
                if base is None or cur is None:
                    raise KeyMismatch(
                        f"missing cell for workload {w!r} seed {s}"
                    )
                base_mem = float(base["mem_gb_min"])
                cur_mem = float(cur["mem_gb_min"])
                red_vals.append(
                    (base_mem - cur_mem) / base_mem * 100.0 if base_mem else 0.0
                )
                base_e2e = float(base["e2e_p50"])
                cur_e2e = float(cur["e2e_p50"])
                speed_vals.append(base_e2e / cur_e2e if cur_e2e else 1.0)
            red = sum(red_vals) / len(red_vals)
            speed = sum(speed_vals) / len(speed_vals)
            lines.append(f"{w:<20} {policy:<16} {red:>16.1f} {speed:>10.2f}")
            out_rows.append([w, policy, f"{red:.6f}", f"{speed:.6f}"])
    return "\n".join(lines), out_rows


def cmd_compare(args: argparse.Namespace) -> int:
    try:
        merged: dict[tuple[str, str, str], dict[str, str]] = {}
        key_sets = []
        for path in args.summaries:
            rows = _load_summary(path)
            key_sets.append({k[0] for k in rows})
            merged.update(rows)
        if key_sets and any(ks != key_sets[0] for ks in key_sets[1:]):
            raise KeyMismatch("summaries do not share the same workload keys")
        table, out_rows = compare_table(merged)
    except OSError as exc:
        print(f"error: cannot read summary: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, KeyMismatch) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    print(table)
    savings = Path(args.out or Path(args.summaries[0]).parent) / "savings.csv"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["workload", "policy", "mem_reduction_pct", "speedup"])
    writer.writerows(out_rows)
    savings.write_text(buf.getvalue())
    print(f"wrote {savings}")
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rcsim",
        description="Trace-driven simulator for resource-centric serverless scheduling",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run an experiment matrix")
    run_p.add_argument("--cluster", required=True, help="cluster config JSON")
    run_p.add_argument("--workload", required=True, nargs="+",
                       help="workload spec JSON file(s)")
    run_p.add_argument("--policy", nargs="+", default=["adaptive"],
                       choices=POLICIES, help="execution policies to run")
    run_p.add_argument("--sizing", default="history", choices=SIZING_MODES,
                       help="sizing mode for the adaptive policy")
    run_p.add_argument("--seeds", default="0", help="seed list `a,b` or range `a..b`")
    run_p.add_argument("--trace", default=None, help="arrival trace CSV")
    run_p.add_argument("--invocations", type=int, default=3,
                       help="synthetic invocations when no trace is given")
    run_p.add_argument("--gap", type=float, default=10.0,
                       help="synthetic inter-arrival gap seconds")
    run_p.add_argument("--scale", type=float, default=1.0,
                       help="input scale for synthetic invocations")
    run_p.add_argument("--out", required=True, help="output directory")
    run_p.add_argument("--jobs", type=int, default=1, help="parallel cells")
    run_p.add_argument("--fail-inject", default=None, metavar="COMP@T",
                       help="inject one failure of component COMP at time T")
    run_p.add_argument("--debug", action="store_true",
                       help="check accounting invariants after every event")
    run_p.set_defaults(func=cmd_run)

    cmp_p = sub.add_parser("compare", help="compare summary.csv files")
    cmp_p.add_argument("summaries", nargs="+", help="summary.csv paths")
    cmp_p.add_argument("--out", default=None, help="directory for savings.csv")
    cmp_p.set_defaults(func=cmd_compare)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        _setup_logging()
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    args = make_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
