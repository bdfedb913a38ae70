"""Deterministic discrete-event engine for resource-centric execution.

One Simulator runs a trace of invocations against a shared cluster under a
chosen execution policy (adaptive or one of the function-centric baselines)
and a sizing mode (history-driven, fixed, or peak-provisioned). Events are
ordered by (time, seq); identical inputs yield byte-identical event logs.

Execution model per compute component:

* environment prep (container start) can be overlapped by pre-launching;
  the perceived start latency is whatever prep remains when the trigger
  arrives (connection setup and runtime compilation overlap the boot);
* memory is acquired as an initial grant plus step increments; each
  increment costs a scheduler round trip, and container increments that
  land on a different server become swap space that slows the compute
  phase;
* the compute phase processes base work at min(vcpus, parallelism); CPU
  utilization samples drive the +1 / -1 vCPU autoscaling rule;
* the access phase charges per-byte local or remote rates for declared
  data-component accesses.

A failure discards the crashed container and every data component it
accesses, then restarts from the latest graph cut whose outgoing trigger
edges were recorded, giving at-least-once execution.
"""

from __future__ import annotations

import heapq
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

from . import cluster as cl
from .history import ResourceProfile, UsageSample
from .resource_graph import (
    GB,
    MB,
    ComponentId,
    ComputeSpec,
    ResourceGraph,
    graph_cut_before,
    topo_order,
)
from .scheduler import (
    ClusterFull,
    GlobalScheduler,
    Insufficient,
    PlacementDecision,
    RackScheduler,
    pick_server,
)
from .sizing import (
    Infeasible,
    SizingParams,
    SizingProblem,
    peak_provisioning,
    select_parallel_vcpus,
    solve_sizing,
)

logger = logging.getLogger("rcsim.sim")

ADAPTIVE = "adaptive"
FAAS_PEAK = "faas-peak"
DAG_FIXED = "dag-fixed"
ALWAYS_REMOTE = "always-remote"
MIGRATION_BEST = "migration-best"

POLICIES = (ADAPTIVE, FAAS_PEAK, DAG_FIXED, ALWAYS_REMOTE, MIGRATION_BEST)

SIZING_HISTORY = "history"
SIZING_FIXED = "fixed"
SIZING_PEAK = "peak"
SIZING_MODES = (SIZING_HISTORY, SIZING_FIXED, SIZING_PEAK)


class Deadlock(RuntimeError):
    """No runnable event while invocations are pending (policy bug)."""


def cpu_autoscale_tick(
    vcpus: float,
    util: float,
    low_streak: int,
    low_watermark: float = 0.5,
    low_samples: int = 2,
    can_grow: bool = True,
) -> tuple[float, int]:
    """One CPU-utilization sample applied to a running container.

    Saturated utilization adds one vCPU (when the server and the app limit
    allow growth); utilization below the low watermark for `low_samples`
    consecutive samples removes one, never dropping below a single vCPU.
    Returns (new vcpu count, new low-utilization streak).
    """
    if util >= 1.0:
        if can_grow:
            return vcpus + 1.0, 0
        return vcpus, 0
    if util < low_watermark:
        streak = low_streak + 1
        if streak >= low_samples and vcpus > 1.0:
            return vcpus - 1.0, 0
        return vcpus, streak
    return vcpus, 0


@dataclass(frozen=True)
class CostModel:
    """Scalar latency and bandwidth model for the simulated cluster."""

    cold_start_s: float = 0.5
    warm_start_s: float = 0.01
    conn_setup_s: float = 0.034
    compile_s: float = 0.2
    local_access_s_per_gb: float = 0.02
    remote_access_s_per_gb: Optional[float] = None  # derived from link speed
    batching_efficiency: float = 0.8
    swap_penalty_multiplier: float = 1.26

    def remote_rate(self, link_gbps: float) -> float:
        if self.remote_access_s_per_gb is not None:
            return self.remote_access_s_per_gb
        return 8.0 / (link_gbps * self.batching_efficiency)


@dataclass
class SimConfig:
    """Engine knobs beyond the latency model."""

    prelaunch: bool = True
    prewarm: bool = True
    cpu_sample_period_s: float = 0.25
    low_util_watermark: float = 0.5
    low_util_samples: int = 2
    sched_msg_s: float = 0.0002
    growth_pause_s: float = 0.005
    prewarm_keepalive_s: float = 30.0
    fixed_init: float = 256 * MB
    fixed_step: float = 64 * MB
    cost_factor: float = 2.0
    waste_thres: float = 0.2
    adjust_every: int = 16
    migration_gbps: Optional[float] = None  # defaults to the cluster link
    deadline_s: Optional[float] = None


@dataclass(frozen=True)
class FailureSpec:
    """Crash a component instance: at an absolute time, or mid-first-run."""

    comp_name: str
    at_time: Optional[float] = None  # None: halfway through its first run


@dataclass
class InvocationReport:
    app: str
    inv: int
    scale: float
    arrival: float
    end_to_end_s: float = 0.0
    mem_gb_min: float = 0.0
    mem_used_gb_min: float = 0.0
    cpu_core_s_alloc: float = 0.0
    cpu_core_s_used: float = 0.0
    local_access_fraction: float = 1.0
    startup_overhead_s: float = 0.0
    recoveries: int = 0
    completed: bool = False

    def row(self) -> dict:
        return {
            "app": self.app,
            "inv": self.inv,
            "scale": self.scale,
            "arrival": self.arrival,
            "end_to_end_s": self.end_to_end_s,
            "mem_gb_min": self.mem_gb_min,
            "mem_used_gb_min": self.mem_used_gb_min,
            "cpu_core_s_alloc": self.cpu_core_s_alloc,
            "cpu_core_s_used": self.cpu_core_s_used,
            "local_access_fraction": self.local_access_fraction,
            "startup_overhead_s": self.startup_overhead_s,
            "recoveries": self.recoveries,
            "completed": self.completed,
        }


def _percentile(values: list[float], q: float) -> float:
    if not values:
        return 0.0
    ordered = sorted(values)
    rank = max(1, math.ceil(q / 100.0 * len(ordered)))
    return ordered[rank - 1]


@dataclass
class RunReport:
    """Per-invocation metrics plus aggregates for one simulated run."""

    policy: str
    sizing_mode: str
    seed: int
    invocations: list[InvocationReport] = field(default_factory=list)
    event_log: list[str] = field(default_factory=list)
    events_processed: int = 0

    def aggregate(self) -> dict:
        done = [r for r in self.invocations if r.completed]
        agg: dict[str, float] = {
            "invocations": len(self.invocations),
            "completed": len(done),
            "mem_gb_min": sum(r.mem_gb_min for r in done),
            "mem_used_gb_min": sum(r.mem_used_gb_min for r in done),
            "cpu_core_s_alloc": sum(r.cpu_core_s_alloc for r in done),
            "cpu_core_s_used": sum(r.cpu_core_s_used for r in done),
            "recoveries": sum(r.recoveries for r in done),
        }
        e2e = [r.end_to_end_s for r in done]
        agg["e2e_mean"] = sum(e2e) / len(e2e) if e2e else 0.0
        agg["e2e_p50"] = _percentile(e2e, 50)
        agg["e2e_p99"] = _percentile(e2e, 99)
        mems = [r.mem_gb_min for r in done]
        agg["mem_gb_min_mean"] = sum(mems) / len(mems) if mems else 0.0
        agg["mem_gb_min_p50"] = _percentile(mems, 50)
        agg["mem_gb_min_p99"] = _percentile(mems, 99)
        fracs = [r.local_access_fraction for r in done]
        agg["local_frac"] = sum(fracs) / len(fracs) if fracs else 1.0
        return agg

    def utilization(self) -> float:
        agg = self.aggregate()
        return agg["mem_used_gb_min"] / agg["mem_gb_min"] if agg["mem_gb_min"] else 1.0

    def to_json(self) -> str:
        return json.dumps(
            {
                "policy": self.policy,
                "sizing_mode": self.sizing_mode,
                "seed": self.seed,
                "aggregate": self.aggregate(),
                "invocations": [r.row() for r in self.invocations],
            },
            separators=(",", ":"),
        )


# ---------------------------------------------------------------------------
# Sizing engine: history-driven plans with fixed / peak / declared modes.
# ---------------------------------------------------------------------------


class SizingEngine:
    """Per-component profiles and the allocation plans derived from them."""

    def __init__(
        self,
        graphs: dict[str, ResourceGraph],
        mode: str,
        cfg: SimConfig,
        granule: float,
        size_overrides: Optional[dict[str, float]] = None,
    ):
        self.graphs = graphs
        self.mode = mode
        self.cfg = cfg
        self.granule = granule
        self.size_overrides = size_overrides or {}  # component name -> bytes
        self.profiles: dict[ComponentId, ResourceProfile] = {}
        self.app_profiles: dict[str, ResourceProfile] = {}
        self._plan_cache: dict[ComponentId, tuple[int, SizingParams]] = {}

    def profile(self, cid: ComponentId) -> ResourceProfile:
        if cid not in self.profiles:
            self.profiles[cid] = ResourceProfile()
        return self.profiles[cid]

    def app_profile(self, app: str) -> ResourceProfile:
        if app not in self.app_profiles:
            self.app_profiles[app] = ResourceProfile()
        return self.app_profiles[app]

    def _round_up(self, amount: float) -> float:
        g = self.granule
        if amount <= 0:
            return g
        return math.ceil(amount / g - 1e-9) * g

    def declared_mem(self, cid: ComponentId, scale: float) -> float:
        spec = self.graphs[cid.app].spec_of(cid)
        if isinstance(spec, ComputeSpec):
            return spec.peak_mem_local * spec.instances(scale)
        return spec.size(scale)

    def mem_plan(self, cid: ComponentId, scale: float) -> SizingParams:
        """(init, step) for a component's memory under the active mode."""
        name = self.graphs[cid.app].spec_of(cid).name
        if name in self.size_overrides:
            return SizingParams(self._round_up(self.size_overrides[name]), self.granule)
        prof = self.profiles.get(cid)
        have_history = prof is not None and len(prof) > 0
        if self.mode == SIZING_FIXED:
            return SizingParams(self.cfg.fixed_init, self.cfg.fixed_step)
        if self.mode in (SIZING_PEAK, "dagmax"):
            peak = prof.max_peak_mem() if have_history else self.declared_mem(cid, scale)
            return SizingParams(self._round_up(peak), self.granule)
        if self.mode == "exact":
            # Idealized baseline: allocation equals the declared demand.
            return SizingParams(max(self.declared_mem(cid, scale), 1.0), self.granule)
        # history mode
        if not have_history:
            return SizingParams(self.cfg.fixed_init, self.cfg.fixed_step)
        cached = self._plan_cache.get(cid)
        n = len(prof)
        if cached is not None and n - cached[0] < self.cfg.adjust_every:
            return cached[1]
        problem = SizingProblem(
            history=tuple(prof.weighted_peaks()),
            cost_factor=self.cfg.cost_factor,
            thres=self.cfg.waste_thres,
            granule=self.granule,
        )
        try:
            plan = solve_sizing(problem)
        except Infeasible:
            plan = peak_provisioning(problem)
        self._plan_cache[cid] = (n, plan)
        return plan

    # SizingSource protocol --------------------------------------------------

    def container_plan(self, comp: ComponentId, scale: float) -> tuple[float, float, float]:
        spec = self.graphs[comp.app].compute(comp)
        vcpus = select_parallel_vcpus(self.profiles.get(comp), spec.instances(scale))
        plan = self.mem_plan(comp, scale)
        return float(vcpus), plan.init, plan.step

    def data_plan(self, data: ComponentId, scale: float) -> tuple[float, float]:
        plan = self.mem_plan(data, scale)
        return plan.init, plan.step

    def footprint_guess(self, cid: ComponentId, scale: float) -> tuple[float, float]:
        spec = self.graphs[cid.app].spec_of(cid)
        prof = self.profiles.get(cid)
        mem = (
            prof.ema_mem
            if prof is not None and prof.ema_mem is not None
            else self.declared_mem(cid, scale)
        )
        if isinstance(spec, ComputeSpec):
            cpu = float(select_parallel_vcpus(prof, spec.instances(scale)))
            return cpu, mem
        return 0.0, mem


# ---------------------------------------------------------------------------
# Runtime state.
# ---------------------------------------------------------------------------


@dataclass
class EnvState:
    """A pre-launched or pre-warmed execution environment."""

    pc: cl.PhysicalComponent
    decision: PlacementDecision
    began: float
    ready_at: float
    waiting_since: Optional[float] = None  # trigger arrived before ready


@dataclass
class DataState:
    data_id: ComponentId
    demand: float = 0.0
    chunks: list[cl.PhysicalComponent] = field(default_factory=list)
    active: bool = False
    internal: bool = False  # lives inside a peak-provisioned container
    started_at: float = 0.0
    home_server: Optional[int] = None
    used_counted: float = 0.0
    growth_scheduled: bool = False

    def allocated(self) -> float:
        return sum(c.mem for c in self.chunks)

    def local_bytes(self, server_id: int) -> float:
        return sum(c.mem for c in self.chunks if c.server_id == server_id)


@dataclass
class CompRun:
    comp_id: ComponentId
    container: Optional[cl.PhysicalComponent]
    owns_container: bool
    vcpus: float
    parallel: int
    work_total: float
    server_id: int
    work_done: float = 0.0
    swap_frac: float = 0.0
    phase: str = "compute"  # compute | access
    access_time: float = 0.0
    started: float = 0.0
    compute_begin: float = 0.0
    last_rate_change: float = 0.0
    last_vcpu_mark: float = 0.0
    vcpu_time: float = 0.0
    peak_vcpus: float = 0.0
    low_util_streak: int = 0
    mem_demand: float = 0.0
    used_counted: float = 0.0
    eta: float = 0.0
    finish_gen: int = 0
    tick_gen: int = 0
    swap_chunks: list[cl.PhysicalComponent] = field(default_factory=list)

    def rate(self, swap_mult: float) -> float:
        base = min(self.vcpus, float(self.parallel))
        penalty = 1.0 + self.swap_frac * (swap_mult - 1.0)
        return base / penalty


@dataclass
class Invocation:
    app: str
    inv: int
    graph: ResourceGraph
    scale: float
    arrival: float
    report: InvocationReport
    rack_id: int = 0
    current_server: Optional[int] = None
    current_container: Optional[int] = None
    finished: set[ComponentId] = field(default_factory=set)
    recorded: set[tuple[ComponentId, ComponentId]] = field(default_factory=set)
    exec_counts: dict[ComponentId, int] = field(default_factory=dict)
    running: dict[ComponentId, CompRun] = field(default_factory=dict)
    triggered: set[ComponentId] = field(default_factory=set)
    envs: dict[ComponentId, EnvState] = field(default_factory=dict)
    datas: dict[ComponentId, DataState] = field(default_factory=dict)
    faas_container: Optional[cl.PhysicalComponent] = None
    marks: list[int] = field(default_factory=list)
    local_volume: float = 0.0
    remote_volume: float = 0.0
    mem_alloc_level: float = 0.0
    mem_used_level: float = 0.0
    cpu_alloc_level: float = 0.0
    peak_used_mem: float = 0.0
    peak_used_cpu: float = 0.0
    done: bool = False
    _last_t: float = 0.0
    _mem_alloc_int: float = 0.0
    _mem_used_int: float = 0.0
    _cpu_alloc_int: float = 0.0

    def bump(self, t: float, *, alloc_mem=0.0, used_mem=0.0, alloc_cpu=0.0) -> None:
        dt = t - self._last_t
        assert dt > -1e-9, f"time moved backwards: {self._last_t} -> {t}"
        if dt > 0:
            self._mem_alloc_int += self.mem_alloc_level * dt
            self._mem_used_int += self.mem_used_level * dt
            self._cpu_alloc_int += self.cpu_alloc_level * dt
            self._last_t = t
        self.mem_alloc_level += alloc_mem
        self.mem_used_level += used_mem
        self.cpu_alloc_level += alloc_cpu
        self.peak_used_mem = max(self.peak_used_mem, self.mem_used_level)
        self.peak_used_cpu = max(self.peak_used_cpu, self.cpu_alloc_level)


@dataclass
class AppState:
    count: int = 0
    last_arrival: Optional[float] = None
    gap_ema: Optional[float] = None
    prewarm: Optional[EnvState] = None


# ---------------------------------------------------------------------------


class Simulator:
    """Runs one (workload, policy, sizing, seed) cell to completion."""

    def __init__(
        self,
        cluster_state: cl.ClusterState,
        graphs: dict[str, ResourceGraph],
        trace: Iterable,
        policy: str = ADAPTIVE,
        sizing_mode: str = SIZING_HISTORY,
        cost: Optional[CostModel] = None,
        config: Optional[SimConfig] = None,
        seed: int = 0,
        debug: bool = False,
        failures: Iterable[FailureSpec] = (),
        collect_log: bool = True,
        size_overrides: Optional[dict[str, float]] = None,
    ):
        if policy not in POLICIES:
            raise ValueError(f"unknown policy {policy!r}")
        if sizing_mode not in SIZING_MODES:
            raise ValueError(f"unknown sizing mode {sizing_mode!r}")
        self.cluster = cluster_state
        self.graphs = graphs
        self.trace = list(trace)
        self.policy = policy
        self.cost = cost or CostModel()
        self.cfg = config or SimConfig()
        self.seed = seed
        self.debug = debug
        self.failures = list(failures)
        self.collect_log = collect_log

        mode = sizing_mode
        if policy == DAG_FIXED:
            mode = "dagmax"
        elif policy == MIGRATION_BEST:
            mode = "exact"
        self.sizing = SizingEngine(
            graphs, mode, self.cfg, cluster_state.granule,
            size_overrides=size_overrides,
        )
        self.global_sched = GlobalScheduler(cluster_state)
        self.racks = [
            RackScheduler(cluster_state, r, self.sizing)
            for r in range(len(cluster_state.racks))
        ]
        self.report = RunReport(policy=policy, sizing_mode=mode, seed=seed)

        self._heap: list = []
        self._seq = 0
        self.now = 0.0
        self._apps: dict[str, AppState] = {}
        self._invocations: list[Invocation] = []
        self._pending_alloc: list[tuple[Invocation, ComponentId]] = []
        self._live = 0
        self._failures_midrun: dict[str, FailureSpec] = {
            f.comp_name: f for f in self.failures if f.at_time is None
        }
        self._remote_rate = self.cost.remote_rate(cluster_state.link_gbps)
        self._migration_bps = (self.cfg.migration_gbps or cluster_state.link_gbps) / 8.0 * 1e9

    # -- event plumbing ------------------------------------------------------

    def _schedule(self, t: float, kind: str, payload: tuple) -> None:
        self._seq += 1
        heapq.heappush(self._heap, (t, self._seq, kind, payload))

    def _log(self, record: dict) -> None:
        if self.collect_log:
            self.report.event_log.append(json.dumps(record, separators=(",", ":")))

    def _name(self, inv: Invocation, cid: ComponentId) -> str:
        return inv.graph.spec_of(cid).name

    def _log_decision(self, d: PlacementDecision, inv: Invocation) -> None:
        modes = set(d.access_modes.values())
        mode = None
        if modes:
            mode = modes.pop() if len(modes) == 1 else "mixed"
        self._log(
            {
                "t": round(self.now, 9),
                "app": inv.app,
                "inv": inv.inv,
                "comp": self._name(inv, d.component),
                "server": d.server_id,
                "cpu": d.cpu,
                "mem_mb": round(d.mem / MB, 6),
                "mode": mode,
                "colocated": d.colocated_with is not None,
                "cache_hit": None if d.compile_miss is None else (not d.compile_miss),
            }
        )

    # -- main loop -------------------------------------------------------------

    def run(self) -> RunReport:
        for rec in self.trace:
            self._schedule(rec.arrival_time, "Arrival", (rec,))
        for f in self.failures:
            if f.at_time is not None:
                self._schedule(f.at_time, "Failure", (f.comp_name,))

        handlers = {
            "Arrival": self._on_arrival,
            "PrelaunchStart": self._on_prelaunch_start,
            "PrelaunchDone": self._on_prelaunch_done,
            "PrewarmStart": self._on_prewarm_start,
            "PrewarmExpire": self._on_prewarm_expire,
            "ComponentStart": self._on_component_start,
            "ComponentFinish": self._on_component_finish,
            "Growth": self._on_growth,
            "CpuSample": self._on_cpu_sample,
            "Failure": self._on_failure,
            "RecoveryRestart": self._on_recovery_restart,
            "ConnSetupDone": self._on_conn_setup_done,
        }
        while self._heap:
            t, _, kind, payload = heapq.heappop(self._heap)
            if self.cfg.deadline_s is not None and t > self.cfg.deadline_s:
                break
            self.now = t
            self.cluster.clock = t
            handlers[kind](*payload)
            self.report.events_processed += 1
            if self.debug:
                self.cluster.check_conservation()

        if self._live > 0 or self._pending_alloc:
            waiting = sorted(
                (inv.app, inv.inv, self._name(inv, comp))
                for inv, comp in self._pending_alloc
            )
            raise Deadlock(
                f"{self._live} invocation(s) pending with an empty event "
                f"queue; components waiting for space: {waiting}"
            )
        return self.report

    # -- arrival / routing -------------------------------------------------------

    def _app_state(self, app: str) -> AppState:
        if app not in self._apps:
            self._apps[app] = AppState()
        return self._apps[app]

    def _on_arrival(self, rec) -> None:
        app = rec.app
        state = self._app_state(app)
        inv = Invocation(
            app=app,
            inv=state.count,
            graph=self.graphs[app],
            scale=rec.input_scale,
            arrival=self.now,
            report=InvocationReport(
                app=app, inv=state.count, scale=rec.input_scale, arrival=self.now
            ),
        )
        state.count += 1
        inv._last_t = self.now
        self.report.invocations.append(inv.report)
        self._invocations.append(inv)
        self._live += 1

        if state.last_arrival is not None:
            gap = self.now - state.last_arrival
            state.gap_ema = gap if state.gap_ema is None else 0.5 * gap + 0.5 * state.gap_ema
        state.last_arrival = self.now

        try:
            inv.rack_id = self.global_sched.global_route()
        except ClusterFull:
            self._finish_invocation(inv, completed=False)
            return

        if self.policy == FAAS_PEAK:
            self._start_faas_peak(inv)
        elif self.policy == MIGRATION_BEST:
            self._trigger(inv, topo_order(inv.graph)[0], self.now)
        else:
            self._admit(inv, state)

        if (
            self.cfg.prewarm
            and self.policy not in (FAAS_PEAK, MIGRATION_BEST)
            and state.gap_ema is not None
        ):
            begin = self.now + state.gap_ema - self.cost.cold_start_s
            if begin > self.now and state.prewarm is None:
                self._schedule(begin, "PrewarmStart", (app, rec.input_scale))

    def _admit(self, inv: Invocation, state: AppState) -> None:
        graph = inv.graph
        root = topo_order(graph)[0]
        rs = self.racks[inv.rack_id]

        env = None
        if state.prewarm is not None:
            env = state.prewarm
            state.prewarm = None

        if env is None:
            tried: set[int] = set()
            decision = None
            while decision is None:
                try:
                    decision = rs.place_invocation(inv)
                except Insufficient:
                    tried.add(inv.rack_id)
                    try:
                        inv.rack_id = self.global_sched.global_route(exclude=tried)
                        rs = self.racks[inv.rack_id]
                    except ClusterFull:
                        self._park(inv, root)
                        return
            if decision.mark_remainder != (0.0, 0.0):
                self._add_mark(inv, decision.server_id, *decision.mark_remainder)
            self._log_decision(decision, inv)
            pc = self._alloc_container(inv, decision, state="prelaunching")
            ready = self.now + self.cfg.sched_msg_s * 2 + max(
                self.cost.cold_start_s, self._env_extra_latency(decision)
            )
            inv.envs[root] = EnvState(pc, decision, self.now, ready)
            self._schedule(ready, "PrelaunchDone", (inv, root))
        else:
            decision = env.decision
            inv.rack_id = self.cluster.servers[decision.server_id].rack_id
            foot_cpu, foot_mem = self.racks[inv.rack_id].estimate_footprint(
                graph, inv.scale
            )
            self._add_mark(
                inv,
                decision.server_id,
                max(0.0, foot_cpu - decision.cpu),
                max(0.0, foot_mem - decision.mem),
            )
            ready = max(self.now + self.cost.warm_start_s, env.ready_at)
            inv.envs[root] = EnvState(env.pc, decision, env.began, ready)
            self._schedule(ready, "PrelaunchDone", (inv, root))
            inv.bump(self.now, alloc_mem=env.pc.mem, alloc_cpu=env.pc.cpu)
            self._log_decision(decision, inv)

        self._trigger(inv, root, self.now)

        if self.cfg.prelaunch and self.policy != MIGRATION_BEST:
            exec_ema = {}
            for c in graph.computes:
                prof = self.sizing.profiles.get(c.id)
                exec_ema[c.id] = prof.ema_exec if prof is not None else None
            first_ready = inv.envs[root].ready_at if root in inv.envs else self.now
            for plan in rs.prelaunch(
                inv, self.now, first_ready, exec_ema, self.cost.cold_start_s
            ):
                self._schedule(plan.begin_at, "PrelaunchStart", (inv, plan.component))

    def _park(self, inv: Invocation, comp: ComponentId) -> None:
        self._pending_alloc.append((inv, comp))

    def _retry_parked(self) -> None:
        if not self._pending_alloc:
            return
        parked, self._pending_alloc = self._pending_alloc, []
        for inv, comp in parked:
            if inv.done:
                continue
            root = topo_order(inv.graph)[0]
            if comp == root and not inv.triggered and self.policy not in (
                MIGRATION_BEST,
            ):
                if self.policy == FAAS_PEAK:
                    self._start_faas_peak(inv)
                else:
                    self._admit(inv, self._app_state(inv.app))
            else:
                self._trigger(inv, comp, self.now)

    def _add_mark(self, inv: Invocation, server_id: int, cpu: float, mem: float) -> None:
        if cpu <= 0 and mem <= 0:
            return
        self.cluster.mark_soft(server_id, inv.app, cpu, mem)
        inv.marks.append(server_id)

    # -- environments ------------------------------------------------------------

    def _alloc_container(
        self, inv: Invocation, d: PlacementDecision, state: str
    ) -> cl.PhysicalComponent:
        pc = self.cluster.try_alloc(
            d.server_id,
            d.cpu,
            d.mem,
            preempt_soft=True,
            kind=cl.CONTAINER,
            virtual_id=d.component,
            state=state,
            app=inv.app,
        )
        self.cluster.consume_mark(d.server_id, inv.app, d.cpu, d.mem)
        inv.bump(self.now, alloc_mem=d.mem, alloc_cpu=d.cpu)
        return pc

    def _release_container(self, inv: Invocation, pc: cl.PhysicalComponent,
                           state: str = "finished") -> None:
        self.cluster.release(pc, state=state)
        inv.bump(self.now, alloc_mem=-pc.mem, alloc_cpu=-pc.cpu)

    def _env_extra_latency(self, d: PlacementDecision) -> float:
        """Connection setup and compile work overlap the container boot."""
        extra = 0.0
        if any(m == "remote" for m in d.access_modes.values()):
            extra = max(extra, self.cost.conn_setup_s)
        if d.compile_miss:
            extra = max(extra, self.cost.compile_s)
        return extra

    def _note_conn_setup(
        self, inv: Invocation, comp: ComponentId, d: PlacementDecision, began: float
    ) -> None:
        """Record datapath-connection establishment for remote accesses.

        The location exchange starts when the placement is decided and runs
        concurrently with the environment boot, so it completes a fixed time
        after the decision regardless of the critical path.
        """
        if any(m == "remote" for m in d.access_modes.values()):
            self._schedule(began + self.cost.conn_setup_s, "ConnSetupDone", (inv, comp))

    def _on_conn_setup_done(self, inv: Invocation, comp: ComponentId) -> None:
        if inv.done:
            return
        self._log(
            {"t": round(self.now, 9), "ev": "ConnSetupDone", "app": inv.app,
             "inv": inv.inv, "comp": self._name(inv, comp)}
        )

    def _on_prelaunch_start(self, inv: Invocation, comp: ComponentId) -> None:
        if inv.done or comp in inv.triggered or comp in inv.envs or comp in inv.finished:
            return
        rs = self.racks[inv.rack_id]
        try:
            decision = rs.place_next(inv, comp, self._data_servers(inv, comp))
        except Insufficient:
            return  # best effort; the component will start on demand
        pc = self._alloc_container(inv, decision, state="prelaunching")
        prep = max(self.cost.cold_start_s, self._env_extra_latency(decision))
        env = EnvState(pc, decision, self.now, self.now + prep)
        inv.envs[comp] = env
        self._log_decision(decision, inv)
        self._note_conn_setup(inv, comp, decision, self.now)
        self._schedule(env.ready_at, "PrelaunchDone", (inv, comp))

    def _on_prelaunch_done(self, inv: Invocation, comp: ComponentId) -> None:
        env = inv.envs.get(comp)
        if env is None or inv.done:
            return
        if env.waiting_since is not None and comp not in inv.running:
            self._begin_component(inv, comp, env, trigger_time=env.waiting_since)

    def _on_prewarm_start(self, app: str, scale: float) -> None:
        state = self._app_state(app)
        if state.prewarm is not None:
            return
        graph = self.graphs[app]
        root = topo_order(graph)[0]
        try:
            rack_id = self.global_sched.global_route()
        except ClusterFull:
            return
        probe = Invocation(
            app=app, inv=-1, graph=graph, scale=scale, arrival=self.now,
            report=InvocationReport(app=app, inv=-1, scale=scale, arrival=self.now),
        )
        try:
            decision = self.racks[rack_id].place_invocation(probe)
        except Insufficient:
            return
        decision.mark_remainder = (0.0, 0.0)  # marks attach at admission
        pc = self.cluster.try_alloc(
            decision.server_id,
            decision.cpu,
            decision.mem,
            preempt_soft=True,
            kind=cl.CONTAINER,
            virtual_id=root,
            state="prelaunching",
            app=app,
        )
        env = EnvState(pc, decision, self.now, self.now + self.cost.cold_start_s)
        state.prewarm = env
        self._log(
            {"t": round(self.now, 9), "ev": "PrewarmStart", "app": app,
             "server": decision.server_id}
        )
        self._schedule(
            env.ready_at + self.cfg.prewarm_keepalive_s, "PrewarmExpire", (app, pc.id)
        )

    def _on_prewarm_expire(self, app: str, pc_id: int) -> None:
        state = self._app_state(app)
        if state.prewarm is not None and state.prewarm.pc.id == pc_id:
            self.cluster.release(state.prewarm.pc)
            state.prewarm = None

    # -- triggering ----------------------------------------------------------------

    def _data_servers(
        self, inv: Invocation, comp: ComponentId
    ) -> dict[ComponentId, Optional[int]]:
        out: dict[ComponentId, Optional[int]] = {}
        for data_id, _ in inv.graph.compute(comp).accesses:
            ds = inv.datas.get(data_id)
            if ds is None or not ds.active or ds.internal or not ds.chunks:
                out[data_id] = None
            else:
                servers = {c.server_id for c in ds.chunks}
                out[data_id] = ds.chunks[0].server_id if len(servers) == 1 else -1
        return out

    def _trigger(self, inv: Invocation, comp: ComponentId, t: float) -> None:
        if inv.done or comp in inv.triggered or comp in inv.finished:
            return
        inv.triggered.add(comp)

        if self.policy == FAAS_PEAK:
            self._schedule(t, "ComponentStart", (inv, comp, None))
            return
        if self.policy == MIGRATION_BEST and comp not in inv.envs:
            self._begin_migration_component(inv, comp, t)
            return

        env = inv.envs.get(comp)
        if env is not None:
            if self.now >= env.ready_at:
                self._begin_component(inv, comp, env, trigger_time=t)
            else:
                env.waiting_since = t
            return

        rs = self.racks[inv.rack_id]
        try:
            decision = rs.place_next(inv, comp, self._data_servers(inv, comp))
        except Insufficient:
            inv.triggered.discard(comp)
            self._park(inv, comp)
            return
        pc = self._alloc_container(inv, decision, state="prelaunching")
        ready = t + self.cfg.sched_msg_s * 2 + max(
            self.cost.cold_start_s, self._env_extra_latency(decision)
        )
        env = EnvState(pc, decision, t, ready, waiting_since=t)
        inv.envs[comp] = env
        self._log_decision(decision, inv)
        self._note_conn_setup(inv, comp, decision, t + self.cfg.sched_msg_s * 2)
        self._schedule(ready, "PrelaunchDone", (inv, comp))

    def _begin_component(
        self, inv: Invocation, comp: ComponentId, env: EnvState, trigger_time: float
    ) -> None:
        start = max(self.now, env.ready_at)
        inv.report.startup_overhead_s += start - trigger_time
        env.waiting_since = None
        self._schedule(start, "ComponentStart", (inv, comp, env))

    # -- memory acquisition -----------------------------------------------------------

    def _place_chunk(
        self,
        inv: Invocation,
        data_id: ComponentId,
        chunk: float,
        prefer: Optional[int],
        accessors: list[int],
        force_remote: bool,
    ) -> Optional[cl.PhysicalComponent]:
        rs = self.racks[inv.rack_id]
        try:
            d = rs.place_growth(
                inv,
                data_id,
                chunk,
                current_server=None if force_remote else prefer,
                accessor_servers=[] if force_remote else accessors,
                avoid=accessors if force_remote else (),
            )
        except Insufficient:
            return None
        pc = self.cluster.try_alloc(
            d.server_id,
            0.0,
            chunk,
            preempt_soft=True,
            kind=cl.MEMORY_CHUNK,
            virtual_id=data_id,
            state="running",
            app=inv.app,
        )
        pc.access_mode = d.access_modes.get(data_id, "local")
        self.cluster.consume_mark(d.server_id, inv.app, 0.0, chunk)
        inv.bump(self.now, alloc_mem=chunk)
        return pc

    def _acquire(
        self,
        inv: Invocation,
        data_id: ComponentId,
        sink: list[cl.PhysicalComponent],
        need: float,
        init: float,
        step: float,
        prefer: Optional[int],
        accessors: list[int],
        force_remote: bool,
        skip_init: bool = False,
    ) -> float:
        """Grant init then step increments until `need` is covered.

        Every step increment costs one scheduler round trip plus the grant
        pause; the initial grant is part of the component's planned start.
        Returns the total stall time. Increments may split into chunks of at
        most the cluster chunk cap. If at some point nothing fits anywhere,
        the remainder stays unallocated (the component runs short).
        """
        per_stall = self.cfg.sched_msg_s * 2 + self.cfg.growth_pause_s
        stall = 0.0
        covered = 0.0
        first = not skip_init
        while covered < need or first:
            grant = init if first else step
            is_step = not first
            first = False
            if grant <= 0:
                grant = self.cluster.granule
            if is_step:
                stall += per_stall
            remaining = grant
            while remaining > 0:
                chunk = min(remaining, self.cluster.chunk_cap)
                remaining -= chunk
                pc = self._place_chunk(inv, data_id, chunk, prefer, accessors, force_remote)
                if pc is None:
                    return stall
                sink.append(pc)
                if prefer is None and not force_remote:
                    prefer = pc.server_id
            covered += grant
        return stall

    def _ensure_data(
        self, inv: Invocation, run: CompRun, data_id: ComponentId
    ) -> float:
        """Materialize a data component if needed; returns added stall time."""
        spec = inv.graph.data(data_id)
        ds = inv.datas.get(data_id)
        if ds is None:
            ds = DataState(data_id=data_id)
            inv.datas[data_id] = ds
        if ds.active:
            return 0.0
        ds.demand = spec.size(inv.scale)
        ds.active = True
        ds.internal = self.policy == FAAS_PEAK
        ds.started_at = self.now
        ds.used_counted = 0.0
        ds.chunks = []
        stall = 0.0
        if not ds.internal:
            init, step = self.sizing.data_plan(data_id, inv.scale)
            stall = self._acquire(
                inv,
                data_id,
                ds.chunks,
                need=ds.demand,
                init=init,
                step=step,
                prefer=run.server_id,
                accessors=[run.server_id],
                force_remote=self.policy == ALWAYS_REMOTE,
            )
            ds.home_server = ds.chunks[0].server_id if ds.chunks else None
        else:
            ds.home_server = run.server_id
        if spec.growth_events and not ds.growth_scheduled:
            ds.growth_scheduled = True
            rate = run.rate(self.cost.swap_penalty_multiplier)
            nominal = run.work_total / rate if rate > 0 else 0.0
            for idx, (frac, _extra) in enumerate(spec.growth_events):
                self._schedule(self.now + frac * nominal, "Growth", (inv, data_id, idx))
        return stall

    # -- component start --------------------------------------------------------------

    def _on_component_start(
        self, inv: Invocation, comp: ComponentId, env: Optional[EnvState]
    ) -> None:
        if inv.done or comp in inv.running or comp in inv.finished:
            if env is not None and env.pc.live and comp in inv.finished:
                self._release_container(inv, env.pc)
                inv.envs.pop(comp, None)
            return
        inv.envs.pop(comp, None)
        spec = inv.graph.compute(comp)
        instances = spec.instances(inv.scale)
        mem_demand = spec.peak_mem_local * instances
        work_total = spec.base_work * instances

        if env is None:  # peak-provisioned shared container
            container = inv.faas_container
            run = CompRun(
                comp_id=comp,
                container=container,
                owns_container=False,
                vcpus=container.cpu,
                parallel=instances,
                work_total=work_total,
                server_id=container.server_id,
                started=self.now,
                peak_vcpus=container.cpu,
                mem_demand=mem_demand,
            )
        else:
            pc = env.pc
            pc.state = "running"
            run = CompRun(
                comp_id=comp,
                container=pc,
                owns_container=True,
                vcpus=pc.cpu,
                parallel=instances,
                work_total=work_total,
                server_id=pc.server_id,
                started=self.now,
                peak_vcpus=pc.cpu,
                mem_demand=mem_demand,
            )
        inv.running[comp] = run
        inv.exec_counts[comp] = inv.exec_counts.get(comp, 0) + 1
        inv.current_server = run.server_id
        inv.current_container = run.container.id if run.container else None

        stall = 0.0
        if env is not None and mem_demand > run.container.mem:
            _, _, step = self.sizing.container_plan(comp, inv.scale)
            stall += self._acquire(
                inv,
                comp,
                run.swap_chunks,
                need=mem_demand - run.container.mem,
                init=step,
                step=step,
                prefer=run.server_id,
                accessors=[run.server_id],
                force_remote=False,
                skip_init=True,
            )
        if mem_demand > 0:
            swap_remote = sum(
                c.mem for c in run.swap_chunks if c.server_id != run.server_id
            )
            uncovered = max(
                0.0,
                mem_demand
                - ((run.container.mem if env is not None else mem_demand)
                   + sum(c.mem for c in run.swap_chunks)),
            )
            run.swap_frac = min(1.0, (swap_remote + uncovered) / mem_demand)

        local_vol = remote_vol = 0.0
        for data_id, volume in spec.accesses:
            stall += self._ensure_data(inv, run, data_id)
            ds = inv.datas[data_id]
            total_vol = volume * instances
            if self.policy in (FAAS_PEAK, MIGRATION_BEST) or ds.internal:
                frac_local = 1.0
            elif self.policy == ALWAYS_REMOTE:
                frac_local = 0.0
            else:
                alloc = ds.allocated()
                frac_local = ds.local_bytes(run.server_id) / alloc if alloc > 0 else 1.0
            local_vol += total_vol * frac_local
            remote_vol += total_vol * (1.0 - frac_local)
        inv.local_volume += local_vol
        inv.remote_volume += remote_vol
        run.access_time = (
            local_vol / GB * self.cost.local_access_s_per_gb
            + remote_vol / GB * self._remote_rate
        )

        # Demand becomes visible once the memory ramp completes; the level
        # moves now and the integral is corrected for the ramp window.
        run.used_counted = mem_demand
        if env is not None:
            run.used_counted = min(
                mem_demand, run.container.mem + sum(c.mem for c in run.swap_chunks)
            )
        inv.bump(self.now, used_mem=run.used_counted)
        inv._mem_used_int -= run.used_counted * stall
        for data_id, _ in spec.accesses:
            ds = inv.datas[data_id]
            if ds.used_counted == 0.0 and ds.demand > 0:
                counted = ds.demand if ds.internal else min(ds.demand, ds.allocated())
                ds.used_counted = counted
                inv.bump(self.now, used_mem=counted)
                inv._mem_used_int -= counted * stall

        self._log(
            {"t": round(self.now, 9), "ev": "ComponentStart", "app": inv.app,
             "inv": inv.inv, "comp": spec.name, "server": run.server_id,
             "stall_s": round(stall, 9)}
        )

        begin = self.now + stall
        run.compute_begin = begin
        run.last_rate_change = begin
        run.last_vcpu_mark = self.now
        rate = run.rate(self.cost.swap_penalty_multiplier)
        eta = begin + (run.work_total / rate if rate > 0 else 0.0)
        self._set_finish(inv, run, eta)
        if (
            self.policy not in (FAAS_PEAK, MIGRATION_BEST)
            and run.owns_container
            and run.work_total > 0
        ):
            run.tick_gen += 1
            self._schedule(
                begin + self.cfg.cpu_sample_period_s, "CpuSample",
                (inv, comp, run.tick_gen),
            )

        failure = self._failures_midrun.get(spec.name)
        if failure is not None:
            del self._failures_midrun[spec.name]
            nominal = (run.work_total / rate if rate > 0 else 0.0) + run.access_time
            self._schedule(begin + 0.5 * max(nominal, 1e-6), "Failure", (spec.name,))

    def _set_finish(self, inv: Invocation, run: CompRun, eta: float) -> None:
        run.eta = eta
        run.finish_gen += 1
        self._schedule(eta, "ComponentFinish", (inv, run.comp_id, run.finish_gen))

    # Migration baseline: exact sizing, zero startup, pay pure data movement.
    def _begin_migration_component(self, inv: Invocation, comp: ComponentId, t: float) -> None:
        g = inv.graph
        spec = g.compute(comp)
        instances = spec.instances(inv.scale)
        vcpus = float(instances)
        mem = spec.peak_mem_local * instances
        new_data = sum(
            g.data(d).size(inv.scale)
            for d, _ in spec.accesses
            if d not in inv.datas or not inv.datas[d].active
        )
        delay = 0.0
        target: Optional[int] = inv.current_server
        if target is not None:
            srv = self.cluster.servers[target]
            if srv.free_cpu < vcpus or srv.free_mem < mem + new_data:
                target = None
        if target is None:
            resident = sum(ds.allocated() for ds in inv.datas.values() if ds.active)
            srv = pick_server(
                self.cluster.rack_servers(inv.rack_id),
                vcpus,
                mem + new_data + resident,
                inv.app,
            )
            if srv is None:
                inv.triggered.discard(comp)
                self._park(inv, comp)
                return
            target = srv.id
            moved = 0.0
            for ds in inv.datas.values():
                if not ds.active:
                    continue
                for i, c in enumerate(list(ds.chunks)):
                    if c.server_id == target:
                        continue
                    moved += c.mem
                    self.cluster.release(c)
                    ds.chunks[i] = self.cluster.try_alloc(
                        target, 0.0, c.mem, preempt_soft=True,
                        kind=cl.MEMORY_CHUNK, virtual_id=ds.data_id,
                        state="running", app=inv.app,
                    )
                ds.home_server = target
            delay = moved / self._migration_bps
            if moved > 0:
                self._log(
                    {"t": round(self.now, 9), "ev": "Migration", "app": inv.app,
                     "inv": inv.inv, "bytes": moved, "delay_s": round(delay, 9)}
                )

        decision = PlacementDecision(
            component=comp,
            server_id=target,
            cpu=vcpus,
            mem=mem,
            access_modes={d: "local" for d, _ in spec.accesses},
            colocated_with=inv.current_container,
        )
        pc = self._alloc_container(inv, decision, state="prelaunching")
        env = EnvState(pc, decision, t, t + delay)
        inv.envs[comp] = env
        self._log_decision(decision, inv)
        if delay > 0:
            env.waiting_since = t
            self._schedule(env.ready_at, "PrelaunchDone", (inv, comp))
        else:
            self._begin_component(inv, comp, env, trigger_time=t)

    # -- growth ---------------------------------------------------------------------

    def _on_growth(self, inv: Invocation, data_id: ComponentId, idx: int) -> None:
        if inv.done:
            return
        ds = inv.datas.get(data_id)
        if ds is None or not ds.active:
            return
        spec = inv.graph.data(data_id)
        _, extra = spec.growth_events[idx]
        old_counted = ds.used_counted
        ds.demand += extra
        stall = 0.0
        if not ds.internal:
            _, step = self.sizing.data_plan(data_id, inv.scale)
            accessors = sorted(
                {
                    r.server_id
                    for r in inv.running.values()
                    if any(d == data_id for d, _ in inv.graph.compute(r.comp_id).accesses)
                }
            )
            prefer = ds.home_server if ds.home_server is not None else (
                accessors[0] if accessors else None
            )
            deficit = ds.demand - ds.allocated()
            if deficit > 0:
                stall = self._acquire(
                    inv, data_id, ds.chunks,
                    need=deficit, init=step, step=step,
                    prefer=prefer, accessors=accessors,
                    force_remote=self.policy == ALWAYS_REMOTE,
                    skip_init=True,
                )
        new_counted = ds.demand if ds.internal else min(ds.demand, ds.allocated())
        if new_counted != old_counted:
            inv.bump(self.now, used_mem=new_counted - old_counted)
            inv._mem_used_int -= (new_counted - old_counted) * stall
            ds.used_counted = new_counted
        self._log(
            {"t": round(self.now, 9), "ev": "Growth", "app": inv.app, "inv": inv.inv,
             "comp": spec.name, "extra_mb": round(extra / MB, 6),
             "stall_s": round(stall, 9)}
        )
        if stall > 0:
            for run in inv.running.values():
                self._pause_run(inv, run, stall)

    def _pause_run(self, inv: Invocation, run: CompRun, stall: float) -> None:
        """Freeze a running component for `stall` seconds (blocking growth)."""
        if run.phase == "compute":
            rate = run.rate(self.cost.swap_penalty_multiplier)
            run.work_done += rate * max(0.0, self.now - run.last_rate_change)
            run.work_done = min(run.work_done, run.work_total)
            run.last_rate_change = self.now + stall
        self._set_finish(inv, run, run.eta + stall)

    # -- CPU autoscaling ---------------------------------------------------------------

    def _on_cpu_sample(self, inv: Invocation, comp: ComponentId, gen: int) -> None:
        run = inv.running.get(comp)
        if inv.done or run is None or run.tick_gen != gen:
            return
        run.vcpu_time += run.vcpus * (self.now - run.last_vcpu_mark)
        run.last_vcpu_mark = self.now

        if run.phase == "compute" and self.now >= run.compute_begin:
            util = min(run.vcpus, float(run.parallel)) / run.vcpus if run.vcpus else 0.0
        else:
            util = 0.0

        srv = self.cluster.servers[run.container.server_id]
        inv_cpu = sum(r.vcpus for r in inv.running.values())
        can_grow = srv.free_cpu >= 1.0 and inv_cpu + 1.0 <= inv.graph.app_limit[0]
        new_vcpus, run.low_util_streak = cpu_autoscale_tick(
            run.vcpus,
            util,
            run.low_util_streak,
            self.cfg.low_util_watermark,
            self.cfg.low_util_samples,
            can_grow,
        )
        if util >= 1.0 and not can_grow:
            self._log(
                {"t": round(self.now, 9), "ev": "ScaleUpDenied", "app": inv.app,
                 "inv": inv.inv, "comp": self._name(inv, comp)}
            )

        if new_vcpus != run.vcpus:
            delta = new_vcpus - run.vcpus
            self.cluster.adjust(run.container, dcpu=delta)
            inv.bump(self.now, alloc_cpu=delta)
            old_rate = run.rate(self.cost.swap_penalty_multiplier)
            run.vcpus = new_vcpus
            run.peak_vcpus = max(run.peak_vcpus, new_vcpus)
            new_rate = run.rate(self.cost.swap_penalty_multiplier)
            if run.phase == "compute" and abs(new_rate - old_rate) > 1e-12:
                run.work_done += old_rate * max(0.0, self.now - run.last_rate_change)
                run.work_done = min(run.work_done, run.work_total)
                run.last_rate_change = self.now
                remaining = max(0.0, run.work_total - run.work_done)
                self._set_finish(
                    inv, run,
                    self.now + (remaining / new_rate if new_rate > 0 else 0.0),
                )

        run.tick_gen += 1
        self._schedule(
            self.now + self.cfg.cpu_sample_period_s, "CpuSample", (inv, comp, run.tick_gen)
        )

    # -- finish -------------------------------------------------------------------------

    def _on_component_finish(self, inv: Invocation, comp: ComponentId, gen: int) -> None:
        run = inv.running.get(comp)
        if inv.done or run is None or run.finish_gen != gen:
            return
        if run.phase == "compute":
            run.work_done = run.work_total
            run.last_rate_change = self.now
            if run.access_time > 0:
                run.phase = "access"
                self._set_finish(inv, run, self.now + run.access_time)
                return
        self._complete_component(inv, comp, run)

    def _complete_component(self, inv: Invocation, comp: ComponentId, run: CompRun) -> None:
        spec = inv.graph.compute(comp)
        duration = self.now - run.started
        run.vcpu_time += run.vcpus * (self.now - run.last_vcpu_mark)

        inv.report.cpu_core_s_used += run.work_total
        mean_util = min(1.0, run.work_total / run.vcpu_time) if run.vcpu_time > 0 else 1.0
        self.sizing.profile(comp).record(
            UsageSample(
                invocation_id=inv.inv,
                peak_cpu=run.peak_vcpus,
                peak_mem=run.mem_demand,
                exec_time=max(duration, 1e-9),
                mean_cpu_util=mean_util,
            )
        )

        if run.owns_container:
            self._release_container(inv, run.container)
        for c in run.swap_chunks:
            if c.live:
                self.cluster.release(c)
                inv.bump(self.now, alloc_mem=-c.mem)
        inv.bump(self.now, used_mem=-run.used_counted)
        del inv.running[comp]
        inv.finished.add(comp)
        if run.container is not None:
            inv.current_server = run.container.server_id
            inv.current_container = run.container.id

        for u, v in inv.graph.triggers:
            if u == comp:
                inv.recorded.add((u, v))

        self._log(
            {"t": round(self.now, 9), "ev": "ComponentFinish", "app": inv.app,
             "inv": inv.inv, "comp": spec.name, "duration_s": round(duration, 9)}
        )

        for data_id, _ in spec.accesses:
            ds = inv.datas.get(data_id)
            if ds is None or not ds.active:
                continue
            if all(a in inv.finished for a in inv.graph.accessors(data_id)):
                self._release_data(inv, ds)

        for succ in inv.graph.successors(comp):
            if succ in inv.finished:
                continue
            if all(p in inv.finished for p in inv.graph.predecessors(succ)):
                self._trigger(inv, succ, self.now)

        if all(c.id in inv.finished for c in inv.graph.computes):
            self._finish_invocation(inv, completed=True)
        self._retry_parked()

    def _release_data(self, inv: Invocation, ds: DataState, state: str = "finished") -> None:
        lifetime = max(self.now - ds.started_at, 1e-9)
        if state == "finished":
            self.sizing.profile(ds.data_id).record(
                UsageSample(
                    invocation_id=inv.inv, peak_cpu=0.0, peak_mem=ds.demand,
                    exec_time=lifetime, mean_cpu_util=0.0,
                )
            )
        for c in ds.chunks:
            if c.live:
                self.cluster.release(c, state=state)
                inv.bump(self.now, alloc_mem=-c.mem)
        inv.bump(self.now, used_mem=-ds.used_counted)
        ds.chunks = []
        ds.active = False
        ds.used_counted = 0.0

    def _finish_invocation(self, inv: Invocation, completed: bool) -> None:
        inv.done = True
        self._live -= 1
        for env in inv.envs.values():
            if env.pc.live:
                self._release_container(inv, env.pc)
        inv.envs.clear()
        for run in list(inv.running.values()):
            if run.owns_container and run.container.live:
                self._release_container(inv, run.container, state="failed")
            for c in run.swap_chunks:
                if c.live:
                    self.cluster.release(c)
                    inv.bump(self.now, alloc_mem=-c.mem)
        inv.running.clear()
        for ds in inv.datas.values():
            if ds.active:
                self._release_data(inv, ds)
        if inv.faas_container is not None and inv.faas_container.live:
            self._release_container(inv, inv.faas_container)
        for server_id in set(inv.marks):
            self.cluster.clear_mark(server_id, inv.app)
        inv.bump(self.now)

        r = inv.report
        r.completed = completed
        r.end_to_end_s = self.now - inv.arrival
        r.mem_gb_min = inv._mem_alloc_int / GB / 60.0
        r.mem_used_gb_min = inv._mem_used_int / GB / 60.0
        r.cpu_core_s_alloc = inv._cpu_alloc_int
        total_vol = inv.local_volume + inv.remote_volume
        r.local_access_fraction = inv.local_volume / total_vol if total_vol > 0 else 1.0
        if completed:
            self.sizing.app_profile(inv.app).record(
                UsageSample(
                    invocation_id=inv.inv,
                    peak_cpu=max(inv.peak_used_cpu, 1.0),
                    peak_mem=inv.peak_used_mem,
                    exec_time=max(r.end_to_end_s, 1e-9),
                    mean_cpu_util=min(
                        1.0, r.cpu_core_s_used / max(inv._cpu_alloc_int, 1e-9)
                    ),
                )
            )
        self._log(
            {"t": round(self.now, 9), "ev": "InvocationDone", "app": inv.app,
             "inv": inv.inv, "completed": completed, "e2e_s": round(r.end_to_end_s, 9)}
        )
        self._retry_parked()

    # -- failure handling ------------------------------------------------------------------

    def _on_failure(self, comp_name: str) -> None:
        target = None
        for inv in self._invocations:
            if inv.done:
                continue
            for comp in inv.running:
                if self._name(inv, comp) == comp_name:
                    target = (inv, comp)
                    break
            if target:
                break
        if target is None:
            self._log({"t": round(self.now, 9), "ev": "FailureNoop", "comp": comp_name})
            return
        inv, comp = target
        inv.report.recoveries += 1
        self._log(
            {"t": round(self.now, 9), "ev": "Failure", "app": inv.app,
             "inv": inv.inv, "comp": comp_name}
        )

        crashed_accesses = {d for d, _ in inv.graph.compute(comp).accesses}

        for c, run in list(inv.running.items()):
            if run.phase == "compute":
                rate = run.rate(self.cost.swap_penalty_multiplier)
                run.work_done += rate * max(0.0, self.now - run.last_rate_change)
                run.work_done = min(run.work_done, run.work_total)
            inv.report.cpu_core_s_used += run.work_done
            if run.owns_container and run.container.live:
                self._release_container(inv, run.container, state="failed")
            for ch in run.swap_chunks:
                if ch.live:
                    self.cluster.release(ch, state="failed")
                    inv.bump(self.now, alloc_mem=-ch.mem)
            inv.bump(self.now, used_mem=-run.used_counted)
            del inv.running[c]
        for env in list(inv.envs.values()):
            if env.pc.live:
                self._release_container(inv, env.pc)
        inv.envs.clear()

        for data_id in crashed_accesses:
            ds = inv.datas.get(data_id)
            if ds is not None and ds.active:
                self._release_data(inv, ds, state="failed")

        prefix = graph_cut_before(inv.graph, inv.recorded)
        inv.finished &= prefix
        inv.triggered = set(inv.finished)
        self._schedule(self.now + self.cfg.sched_msg_s * 2, "RecoveryRestart", (inv,))

    def _on_recovery_restart(self, inv: Invocation) -> None:
        if inv.done:
            return
        self._log(
            {"t": round(self.now, 9), "ev": "RecoveryRestart", "app": inv.app,
             "inv": inv.inv}
        )
        for comp in topo_order(inv.graph):
            if comp in inv.finished:
                continue
            if all(p in inv.finished for p in inv.graph.predecessors(comp)):
                self._trigger(inv, comp, self.now)

    # -- peak-provisioned function baseline ---------------------------------------------------

    def _start_faas_peak(self, inv: Invocation) -> None:
        """One container per invocation, sized to the historical global peak."""
        g = inv.graph
        prof = self.sizing.app_profiles.get(inv.app)
        if prof is not None and len(prof) > 0:
            cpu = max(1.0, math.ceil(max(s.peak_cpu for s in prof.samples)))
            mem = max(s.peak_mem for s in prof.samples)
        else:
            cpu, mem = self.racks[inv.rack_id].estimate_footprint(g, inv.scale)
            cpu = max(1.0, math.ceil(cpu))
        srv = pick_server(self.cluster.rack_servers(inv.rack_id), cpu, mem, inv.app)
        if srv is None:
            self._park(inv, topo_order(g)[0])
            return
        pc = self.cluster.try_alloc(
            srv.id, cpu, mem, preempt_soft=True, kind=cl.CONTAINER,
            virtual_id=topo_order(g)[0], state="running", app=inv.app,
        )
        inv.faas_container = pc
        inv.current_server = srv.id
        inv.current_container = pc.id
        inv.bump(self.now, alloc_mem=mem, alloc_cpu=cpu)
        ready = self.now + self.cfg.sched_msg_s * 2 + self.cost.cold_start_s
        inv.report.startup_overhead_s += ready - self.now
        self._log(
            {"t": round(self.now, 9), "ev": "FaasStart", "app": inv.app,
             "inv": inv.inv, "server": srv.id, "cpu": cpu,
             "mem_mb": round(mem / MB, 6)}
        )
        root = topo_order(g)[0]
        inv.triggered.add(root)
        self._schedule(ready, "ComponentStart", (inv, root, None))


def run(
    cluster_state: cl.ClusterState,
    graphs: dict[str, ResourceGraph],
    trace: Iterable,
    policy: str = ADAPTIVE,
    sizing_mode: str = SIZING_HISTORY,
    seed: int = 0,
    **kwargs,
) -> RunReport:
    """Build a Simulator for one cell and run it to completion."""
    sim = Simulator(
        cluster_state, graphs, trace,
        policy=policy, sizing_mode=sizing_mode, seed=seed, **kwargs,
    )
    return sim.run()


def component_runtime(
    comp,
    access_modes: dict,
    vcpus: float,
    cost: CostModel,
    scale: float,
    link_gbps: float = 100.0,
    swap_frac: float = 0.0,
) -> float:
    """Nominal execution time of one compute component under a placement.

    Total base work (per-instance work times the instance count at this
    scale) divided by the granted vCPUs, plus per-GB access charges for each
    declared access at the local or remote rate given by access_modes, plus
    a swap penalty proportional to the over-memory fraction. Strictly
    increasing in remote volume whenever the remote rate exceeds the local
    rate.
    """
    instances = comp.instances(scale)
    base = comp.base_work * instances
    penalty = 1.0 + swap_frac * (cost.swap_penalty_multiplier - 1.0)
    compute = base * penalty / vcpus if vcpus > 0 else 0.0
    remote_rate = cost.remote_rate(link_gbps)
    access = 0.0
    for data_id, volume in comp.accesses:
        gb = volume * instances / GB
        if access_modes.get(data_id, "local") == "remote":
            access += gb * remote_rate
        else:
            access += gb * cost.local_access_s_per_gb
    return compute + access
