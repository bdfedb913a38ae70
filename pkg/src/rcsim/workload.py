"""Workload generation and ingestion.

Provides synthetic multi-phase applications (chains with per-phase CPU,
memory, and parallelism profiles, optionally with a fan-out stage),
invocation-size distributions shaped like production serverless memory-usage
profiles, a minimal trace-CSV reader, and the baseline execution strategies
used for policy comparisons.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .cluster import ClusterState
from .resource_graph import MB, ResourceGraph, build_graph
from .sim import (
    ADAPTIVE,
    POLICIES,
    CostModel,
    RunReport,
    SimConfig,
    Simulator,
)


class InvalidPhase(ValueError):
    """A multi-phase app description is malformed."""


@dataclass(frozen=True)
class TraceRecord:
    """One invocation arrival."""

    app: str
    arrival_time: float
    input_scale: float

    def __post_init__(self) -> None:
        if self.input_scale <= 0:
            raise ValueError("input_scale must be positive")


@dataclass(frozen=True)
class BaselinePolicy:
    """A named execution strategy plus its variant-specific parameters."""

    variant: str  # one of sim.POLICIES
    fixed_sizes_mb: Optional[dict[str, float]] = None  # dag-fixed overrides
    migration_gbps: Optional[float] = None  # migration-best bandwidth

    def __post_init__(self) -> None:
        if self.variant not in POLICIES:
            raise ValueError(f"unknown baseline variant {self.variant!r}")
        if self.variant == "migration-best" and self.migration_gbps is not None:
            if self.migration_gbps <= 0:
                raise ValueError("migration_gbps must be positive")


@dataclass(frozen=True)
class Phase:
    cpu: float  # parallel instances (vCPUs at full utilization)
    mem_mb: float  # peak private memory of the phase
    duration_s: float = 1.0
    parallelism: Optional[Sequence[Sequence[float]]] = None  # scale->count table
    data_mb: Optional[Sequence[Sequence[float]]] = None  # scale->MB shared data
    access_volume_mb: float = 0.0  # bytes read/written per instance


def gen_multiphase(
    app: str,
    phases: Sequence[Phase],
    max_cpu: float = 1024.0,
    max_mem_mb: float = 1e9,
) -> ResourceGraph:
    """Chain of compute components whose peaks match the phase profile.

    Each phase becomes one compute component with `cpu` parallel instances
    of work `duration_s` cpu-seconds each and `mem_mb` of private memory
    split across instances. A phase with a `data_mb` table also gets a
    shared data component accessed by that phase's component.
    """
    if not phases:
        raise InvalidPhase("at least one phase is required")
    computes = []
    datas = []
    triggers = []
    for i, ph in enumerate(phases):
        if ph.cpu < 1 or ph.mem_mb < 0 or ph.duration_s <= 0:
            raise InvalidPhase(f"phase {i}: cpu >= 1, mem >= 0, duration > 0 required")
        name = f"phase{i}"
        parallelism = (
            [[float(s), float(c)] for s, c in ph.parallelism]
            if ph.parallelism is not None
            else [[0.0, float(ph.cpu)]]
        )
        comp = {
            "id": name,
            "base_work_cpu_s": ph.duration_s,
            "parallelism": parallelism,
            "peak_mem_local_mb": ph.mem_mb / ph.cpu,
            "accesses": [],
        }
        if ph.data_mb is not None:
            data_name = f"{name}_data"
            datas.append(
                {"id": data_name, "size_mb": [[float(s), float(m)] for s, m in ph.data_mb]}
            )
            comp["accesses"].append(
                {"data": data_name, "volume_mb": ph.access_volume_mb}
            )
        computes.append(comp)
        if i > 0:
            triggers.append([f"phase{i - 1}", name])
    spec = {
        "app": app,
        "app_limit": {"max_cpu": max_cpu, "max_mem_mb": max_mem_mb},
        "computes": computes,
        "datas": datas,
        "triggers": triggers,
    }
    return build_graph(spec)


DISTRIBUTION_KINDS = ("Small", "Large", "Varying", "Stable")


def gen_distribution(kind: str, n: int, seed: int = 0) -> list[float]:
    """n input scales with the named shape, deterministic per seed.

    Scales are interpreted as megabytes of per-invocation memory demand:
    Small and Large are log-normal with low and high medians, Varying is
    bimodal with a coefficient of variation above 1, Stable is constant.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    if kind == "Stable":
        return [1024.0] * n
    if kind == "Small":
        scales = np.exp(rng.normal(np.log(96.0), 0.5, size=n))
        return [float(max(8.0, s)) for s in scales]
    if kind == "Large":
        scales = np.exp(rng.normal(np.log(4096.0), 0.4, size=n))
        return [float(max(512.0, s)) for s in scales]
    if kind == "Varying":
        small = np.exp(rng.normal(np.log(128.0), 0.3, size=n))
        large = np.exp(rng.normal(np.log(8192.0), 0.3, size=n))
        pick = rng.random(n) < 0.7
        scales = np.where(pick, small, large)
        return [float(max(8.0, s)) for s in scales]
    raise ValueError(f"unknown distribution kind {kind!r}")


def trace_for_scales(
    app: str, scales: Sequence[float], gap_s: float = 1.0, start_s: float = 0.0
) -> list[TraceRecord]:
    return [
        TraceRecord(app, start_s + i * gap_s, float(s)) for i, s in enumerate(scales)
    ]


def load_trace_csv(path: str | Path) -> list[TraceRecord]:
    """Read `app,arrival_s,scale` rows; arrivals must be nondecreasing."""
    records: list[TraceRecord] = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"app", "arrival_s", "scale"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ValueError(f"trace must have columns {sorted(required)}")
        prev = float("-inf")
        for row in reader:
            t = float(row["arrival_s"])
            if t < prev:
                raise ValueError("arrival times must be nondecreasing")
            prev = t
            records.append(TraceRecord(row["app"], t, float(row["scale"])))
    return records


def execute_baseline(
    policy: BaselinePolicy,
    graphs: dict[str, ResourceGraph],
    trace: Sequence[TraceRecord],
    cluster_state: ClusterState,
    seed: int = 0,
    cost: Optional[CostModel] = None,
    config: Optional[SimConfig] = None,
    sizing_mode: str = "history",
    **kwargs,
) -> RunReport:
    """Run a workload under one of the baseline strategies (or adaptive)."""
    cfg = config or SimConfig()
    if policy.variant == "migration-best" and policy.migration_gbps is not None:
        cfg.migration_gbps = policy.migration_gbps
    overrides = None
    if policy.fixed_sizes_mb:
        overrides = {name: mb * 1e6 for name, mb in policy.fixed_sizes_mb.items()}
    sim = Simulator(
        cluster_state,
        graphs,
        trace,
        policy=policy.variant,
        sizing_mode=sizing_mode,
        cost=cost,
        config=cfg,
        seed=seed,
        size_overrides=overrides,
        **kwargs,
    )
    return sim.run()
