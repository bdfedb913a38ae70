"""Two-level scheduler: global rack routing and rack-level adaptive placement.

The global scheduler balances invocations across racks by estimated free
memory and re-routes when a rack reports Insufficient. Each rack scheduler
owns placement within its rack:

* whole-application fit: find servers able to hold the invocation's
  estimated peak concurrent footprint, pick the one with the smallest
  available resources, soft-mark the remainder for the later phases;
* per-component continuation: keep the next component on the same server
  (same container process) while capacity lasts, otherwise smallest-fit
  elsewhere with remote access to the data left behind;
* growth and scale-up follow the same locality ladder: current server,
  then servers running accessing components, then smallest fit anywhere;
* pre-launching walks the predicted execution timeline (from exec-time
  history) and starts each successor's environment just early enough to
  hide its startup, falling back to on-demand starts with no history.

Placement decisions are pure; the simulator applies them to the cluster and
charges the latencies.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Protocol, Sequence

from .cluster import ClusterState, Server
from .resource_graph import ComponentId, ResourceGraph, topo_order


class ClusterFull(RuntimeError):
    """Every rack rejected the invocation."""


class Insufficient(RuntimeError):
    """No server in the rack can host the request."""


@dataclass
class PlacementDecision:
    """One placement: where a component materializes and how it accesses data."""

    component: ComponentId
    server_id: int
    cpu: float
    mem: float
    access_modes: dict[ComponentId, str] = field(default_factory=dict)
    colocated_with: Optional[int] = None  # prior container's physical id
    compile_miss: Optional[bool] = None  # None: precompiled layout
    mark_remainder: tuple[float, float] = (0.0, 0.0)


class SizingSource(Protocol):
    """What the placement policy needs to know about component sizes."""

    def container_plan(self, comp: ComponentId, scale: float) -> tuple[float, float, float]:
        """(vcpus, mem init, mem step) for a compute component."""

    def data_plan(self, data: ComponentId, scale: float) -> tuple[float, float]:
        """(mem init, mem step) for a data component."""

    def footprint_guess(self, comp: ComponentId, scale: float) -> tuple[float, float]:
        """(cpu, mem) whole-component estimate for fit checks."""


class InvocationCtx(Protocol):
    app: str
    graph: ResourceGraph
    scale: float
    current_server: Optional[int]
    current_container: Optional[int]


def _smallest_fit(
    servers: Iterable[Server],
    cpu: float,
    mem: float,
    app: Optional[str],
    effective: bool,
) -> Optional[Server]:
    """Fitting server with the least free memory (then CPU, then id)."""
    best: Optional[Server] = None
    best_key = None
    for s in servers:
        fc, fm = s.effective_free(app) if effective else (s.free_cpu, s.free_mem)
        if fc >= cpu and fm >= mem:
            key = (fm, fc, s.id)
            if best is None or key < best_key:
                best, best_key = s, key
    return best


def pick_server(
    servers: Sequence[Server], cpu: float, mem: float, app: Optional[str]
) -> Optional[Server]:
    """Two-pass smallest-fit: honor other apps' soft marks, then preempt them."""
    return _smallest_fit(servers, cpu, mem, app, True) or _smallest_fit(
        servers, cpu, mem, app, False
    )


class GlobalScheduler:
    """Routes invocations to racks by estimated free memory."""

    def __init__(self, cluster: ClusterState):
        self.cluster = cluster

    def global_route(self, exclude: Iterable[int] = ()) -> int:
        excluded = set(exclude)
        best_rack, best_key = None, None
        for rack_id in range(len(self.cluster.racks)):
            if rack_id in excluded:
                continue
            key = (-self.cluster.rack_free_mem(rack_id), rack_id)
            if best_rack is None or key < best_key:
                best_rack, best_key = rack_id, key
        if best_rack is None:
            raise ClusterFull("all racks rejected the invocation")
        return best_rack


@dataclass
class PrelaunchPlan:
    component: ComponentId
    begin_at: float
    predicted_start: float


class RackScheduler:
    """Rack-level placement for one rack of the shared cluster state."""

    def __init__(self, cluster: ClusterState, rack_id: int, sizing: SizingSource):
        self.cluster = cluster
        self.rack_id = rack_id
        self.sizing = sizing
        # Realized access-mode layouts per app; uniform layouts are
        # precompiled and never consult the cache.
        self.compilation_cache: set[tuple[str, str, tuple]] = set()

    def _servers(self) -> list[Server]:
        return self.cluster.rack_servers(self.rack_id)

    # -- whole-invocation admission ---------------------------------------

    def estimate_footprint(self, g: ResourceGraph, scale: float) -> tuple[float, float]:
        """Peak concurrent (cpu, mem) over the graph's execution levels.

        Compute components are staged by longest-path depth; a data
        component spans the levels of its accessors. Per-component sizes
        come from profiled history when available, with the declared spec
        as the cold-start fallback.
        """
        order = topo_order(g)
        level = {cid: 0 for cid in order}
        for u, v in g.triggers:
            level[v] = max(level[v], level[u] + 1)
        n_levels = max(level.values()) + 1 if level else 1

        cpu_by_level = [0.0] * n_levels
        mem_by_level = [0.0] * n_levels
        for c in g.computes:
            cpu, mem = self.sizing.footprint_guess(c.id, scale)
            cpu_by_level[level[c.id]] += cpu
            mem_by_level[level[c.id]] += mem
        for d in g.datas:
            accessors = g.accessors(d.id)
            if not accessors:
                continue
            lo = min(level[a] for a in accessors)
            hi = max(level[a] for a in accessors)
            _, mem = self.sizing.footprint_guess(d.id, scale)
            for lv in range(lo, hi + 1):
                mem_by_level[lv] += mem
        return max(cpu_by_level), max(mem_by_level)

    def place_invocation(self, ctx: InvocationCtx) -> PlacementDecision:
        """Place the first compute component of a fresh invocation."""
        g = ctx.graph
        root = topo_order(g)[0]
        vcpus, mem_init, _ = self.sizing.container_plan(root, ctx.scale)
        foot_cpu, foot_mem = self.estimate_footprint(g, ctx.scale)

        servers = self._servers()
        whole = pick_server(servers, foot_cpu, foot_mem, ctx.app)
        if whole is not None:
            remainder = (
                max(0.0, foot_cpu - vcpus),
                max(0.0, foot_mem - mem_init),
            )
            return PlacementDecision(
                component=root,
                server_id=whole.id,
                cpu=vcpus,
                mem=mem_init,
                access_modes={d: "local" for d, _ in g.compute(root).accesses},
                mark_remainder=remainder,
            )

        alone = pick_server(servers, vcpus, mem_init, ctx.app)
        if alone is None:
            raise Insufficient(
                f"rack {self.rack_id}: no server fits the first component of {ctx.app}"
            )
        return PlacementDecision(
            component=root,
            server_id=alone.id,
            cpu=vcpus,
            mem=mem_init,
            access_modes={d: "local" for d, _ in g.compute(root).accesses},
        )

    # -- per-component placement ------------------------------------------

    def place_next(
        self,
        ctx: InvocationCtx,
        comp: ComponentId,
        data_servers: dict[ComponentId, Optional[int]],
    ) -> PlacementDecision:
        """Place a non-first component, preferring same-server continuation.

        data_servers maps each accessed data component to the server that
        fully hosts it (None while not yet materialized).
        """
        vcpus, mem_init, _ = self.sizing.container_plan(comp, ctx.scale)
        spec = ctx.graph.compute(comp)

        target: Optional[Server] = None
        colocated = None
        if ctx.current_server is not None:
            srv = self.cluster.servers[ctx.current_server]
            if srv.free_cpu >= vcpus and srv.free_mem >= mem_init:
                target = srv
                colocated = ctx.current_container
        if target is None:
            target = pick_server(self._servers(), vcpus, mem_init, ctx.app)
        if target is None:
            raise Insufficient(
                f"rack {self.rack_id}: no server fits component {comp}"
            )

        modes: dict[ComponentId, str] = {}
        for data_id, _ in spec.accesses:
            host = data_servers.get(data_id)
            if host is None or host == target.id:
                modes[data_id] = "local"
            else:
                modes[data_id] = "remote"

        decision = PlacementDecision(
            component=comp,
            server_id=target.id,
            cpu=vcpus,
            mem=mem_init,
            access_modes=modes,
            colocated_with=colocated,
        )
        decision.compile_miss = self.compile_layout(ctx.app, spec.name, modes)
        return decision

    def compile_layout(
        self, app: str, comp_name: str, modes: dict[ComponentId, str]
    ) -> Optional[bool]:
        """None for precompiled (uniform) layouts, else True on first sight."""
        values = set(modes.values())
        if len(values) <= 1:
            return None
        signature = tuple(sorted((str(d), m) for d, m in modes.items()))
        key = (app, comp_name, signature)
        if key in self.compilation_cache:
            return False
        self.compilation_cache.add(key)
        return True

    def place_growth(
        self,
        ctx: InvocationCtx,
        data_id: ComponentId,
        chunk_bytes: float,
        current_server: Optional[int],
        accessor_servers: Sequence[int],
        avoid: Iterable[int] = (),
    ) -> PlacementDecision:
        """Place one memory chunk: current server, then accessors, then anywhere."""
        avoid = set(avoid)

        def usable(server_ids: Iterable[int]) -> list[Server]:
            return [
                self.cluster.servers[s] for s in server_ids if s not in avoid
            ]

        tiers: list[list[Server]] = []
        if current_server is not None:
            tiers.append(usable([current_server]))
        tiers.append(usable(sorted(set(accessor_servers))))
        tiers.append([s for s in self._servers() if s.id not in avoid])
        # Last resort: ignore the avoid preference rather than fail.
        tiers.append(self._servers())

        for tier in tiers:
            srv = pick_server(tier, 0.0, chunk_bytes, ctx.app)
            if srv is not None:
                mode = "local" if srv.id in set(accessor_servers) else "remote"
                return PlacementDecision(
                    component=data_id,
                    server_id=srv.id,
                    cpu=0.0,
                    mem=chunk_bytes,
                    access_modes={data_id: mode},
                )
        raise Insufficient(
            f"rack {self.rack_id}: no server can host a {chunk_bytes:.0f}-byte chunk"
        )

    # -- proactive scheduling ----------------------------------------------

    def prelaunch(
        self,
        ctx: InvocationCtx,
        now: float,
        first_ready: float,
        exec_ema: dict[ComponentId, Optional[float]],
        startup_time: float,
    ) -> list[PrelaunchPlan]:
        """Plan environment pre-launches for all successors of the root.

        Predicted start times are chained along the trigger DAG from the
        root's readiness using per-component execution-time history; a
        component without history (or with an unpredictable predecessor)
        is skipped and starts on demand.
        """
        g = ctx.graph
        order = topo_order(g)
        predicted: dict[ComponentId, Optional[float]] = {order[0]: first_ready}
        plans: list[PrelaunchPlan] = []
        for comp in order[1:]:
            start: Optional[float] = 0.0
            for pred in g.predecessors(comp):
                p_start = predicted.get(pred)
                p_exec = exec_ema.get(pred)
                if p_start is None or p_exec is None:
                    start = None
                    break
                start = max(start, p_start + p_exec)
            predicted[comp] = start
            if start is None:
                continue
            plans.append(
                PrelaunchPlan(
                    component=comp,
                    begin_at=max(now, start - startup_time),
                    predicted_start=start,
                )
            )
        return plans
