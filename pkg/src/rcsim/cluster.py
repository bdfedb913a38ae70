"""Cluster substrate: racks, servers, and exact CPU/memory accounting.

Servers track hard allocations (which can never overcommit capacity) and
soft marks: low-priority per-application reservations of expected future
need. Marks never consume capacity; they only steer placement away from a
server and are trimmed when another application claims the space.

Every allocation is represented by a PhysicalComponent, the materialized
form of a virtual graph component: a container (cpu >= 1) or a memory chunk
(cpu == 0, granule-multiple size). Per-server allocation counters must equal
the sum over live physical components at every event boundary; the
simulator asserts this in debug mode after each mutation.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Mapping, Optional

from .resource_graph import MB, ComponentId
from .sizing import CHUNK_CAP, DEFAULT_GRANULE

CONTAINER = "container"
MEMORY_CHUNK = "memory_chunk"

LIVE_STATES = ("prelaunching", "running")


class Insufficient(RuntimeError):
    """Requested resources exceed the server's free capacity."""


class DoubleRelease(RuntimeError):
    """A physical component was released twice."""


class UnknownServer(KeyError):
    """No server with the given id exists."""


@dataclass
class PhysicalComponent:
    """Materialization of a virtual component on a concrete server."""

    id: int
    virtual_id: Optional[ComponentId]
    kind: str  # CONTAINER | MEMORY_CHUNK
    server_id: int
    cpu: float
    mem: float
    access_mode: str = "local"  # local | remote (relative to its accessor)
    state: str = "running"  # prelaunching | running | finished | failed

    @property
    def live(self) -> bool:
        return self.state in LIVE_STATES


@dataclass
class Server:
    id: int
    rack_id: int
    cpu_cap: float
    mem_cap: float
    cpu_alloc: float = 0.0
    mem_alloc: float = 0.0
    # Soft marks: app -> (cpu, mem), insertion-ordered for deterministic trim.
    soft_marks: dict[str, tuple[float, float]] = field(default_factory=dict)
    hosted: set[int] = field(default_factory=set)

    @property
    def free_cpu(self) -> float:
        return self.cpu_cap - self.cpu_alloc

    @property
    def free_mem(self) -> float:
        return self.mem_cap - self.mem_alloc

    def marked(self, exclude_app: Optional[str] = None) -> tuple[float, float]:
        cpu = mem = 0.0
        for app, (c, m) in self.soft_marks.items():
            if app != exclude_app:
                cpu += c
                mem += m
        return cpu, mem

    def effective_free(self, app: Optional[str] = None) -> tuple[float, float]:
        """Free capacity after discounting other applications' soft marks."""
        mc, mm = self.marked(exclude_app=app)
        return max(0.0, self.free_cpu - mc), max(0.0, self.free_mem - mm)


class ClusterState:
    """Servers grouped into racks, with the physical-component ledger."""

    def __init__(
        self,
        racks: list[list[Server]],
        link_gbps: float = 100.0,
        granule: float = DEFAULT_GRANULE,
        chunk_cap: float = CHUNK_CAP,
    ):
        self.racks = [[s.id for s in rack] for rack in racks]
        self.servers: dict[int, Server] = {s.id: s for rack in racks for s in rack}
        self.link_gbps = link_gbps
        self.granule = granule
        self.chunk_cap = chunk_cap
        self.clock = 0.0
        self.components: dict[int, PhysicalComponent] = {}
        self._next_pc = itertools.count()

    # -- allocation ------------------------------------------------------

    def try_alloc(
        self,
        server_id: int,
        cpu: float,
        mem: float,
        *,
        preempt_soft: bool = False,
        kind: str = CONTAINER,
        virtual_id: Optional[ComponentId] = None,
        state: str = "running",
        app: Optional[str] = None,
    ) -> PhysicalComponent:
        """Allocate (cpu, mem) on a server, registering a physical component.

        Soft marks never add capacity: a request that does not fit in the
        free physical space fails regardless of preempt_soft. With
        preempt_soft, other applications' marks overlapping the claimed
        space are trimmed after a successful allocation.
        """
        if cpu < 0 or mem < 0:
            raise ValueError("allocation amounts must be nonnegative")
        srv = self._server(server_id)
        if cpu > srv.free_cpu or mem > srv.free_mem:
            raise Insufficient(
                f"server {server_id}: need ({cpu}, {mem / MB:.0f} MB), "
                f"free ({srv.free_cpu}, {srv.free_mem / MB:.0f} MB)"
            )
        srv.cpu_alloc += cpu
        srv.mem_alloc += mem
        pc = PhysicalComponent(
            id=next(self._next_pc),
            virtual_id=virtual_id,
            kind=kind,
            server_id=server_id,
            cpu=cpu,
            mem=mem,
            state=state,
        )
        srv.hosted.add(pc.id)
        self.components[pc.id] = pc
        if preempt_soft:
            self._trim_marks(srv, keep_app=app)
        return pc

    def release(self, pc: PhysicalComponent, state: str = "finished") -> None:
        if not pc.live:
            raise DoubleRelease(f"physical component {pc.id} already released")
        srv = self._server(pc.server_id)
        srv.cpu_alloc -= pc.cpu
        srv.mem_alloc -= pc.mem
        srv.hosted.discard(pc.id)
        pc.state = state
        del self.components[pc.id]

    def adjust(self, pc: PhysicalComponent, dcpu: float = 0.0, dmem: float = 0.0) -> None:
        """Resize a live component in place (container resize, vCPU scaling)."""
        if not pc.live:
            raise DoubleRelease(f"physical component {pc.id} is not live")
        srv = self._server(pc.server_id)
        if dcpu > srv.free_cpu or dmem > srv.free_mem:
            raise Insufficient(f"server {pc.server_id}: resize does not fit")
        if pc.cpu + dcpu < 0 or pc.mem + dmem < 0:
            raise ValueError("resize below zero")
        srv.cpu_alloc += dcpu
        srv.mem_alloc += dmem
        pc.cpu += dcpu
        pc.mem += dmem

    def free_resources(self, server_id: int) -> tuple[float, float]:
        srv = self._server(server_id)
        return srv.free_cpu, srv.free_mem

    # -- soft marks ------------------------------------------------------

    def mark_soft(self, server_id: int, app: str, cpu: float, mem: float) -> None:
        srv = self._server(server_id)
        c, m = srv.soft_marks.get(app, (0.0, 0.0))
        srv.soft_marks[app] = (c + cpu, m + mem)

    def consume_mark(self, server_id: int, app: str, cpu: float, mem: float) -> None:
        srv = self._server(server_id)
        if app not in srv.soft_marks:
            return
        c, m = srv.soft_marks[app]
        c, m = max(0.0, c - cpu), max(0.0, m - mem)
        if c == 0.0 and m == 0.0:
            del srv.soft_marks[app]
        else:
            srv.soft_marks[app] = (c, m)

    def clear_mark(self, server_id: int, app: str) -> None:
        self._server(server_id).soft_marks.pop(app, None)

    def _trim_marks(self, srv: Server, keep_app: Optional[str]) -> None:
        """Shrink foreign marks so the total marked amount fits in free space."""
        over_cpu = srv.marked()[0] - srv.free_cpu
        over_mem = srv.marked()[1] - srv.free_mem
        if over_cpu <= 0 and over_mem <= 0:
            return
        for app in list(srv.soft_marks):
            if app == keep_app:
                continue
            if over_cpu <= 0 and over_mem <= 0:
                break
            c, m = srv.soft_marks[app]
            cut_c, cut_m = min(c, max(0.0, over_cpu)), min(m, max(0.0, over_mem))
            over_cpu -= cut_c
            over_mem -= cut_m
            c, m = c - cut_c, m - cut_m
            if c == 0.0 and m == 0.0:
                del srv.soft_marks[app]
            else:
                srv.soft_marks[app] = (c, m)

    # -- queries ---------------------------------------------------------

    def _server(self, server_id: int) -> Server:
        try:
            return self.servers[server_id]
        except KeyError:
            raise UnknownServer(server_id) from None

    def rack_servers(self, rack_id: int) -> list[Server]:
        return [self.servers[s] for s in self.racks[rack_id]]

    def rack_free_mem(self, rack_id: int) -> float:
        return sum(s.free_mem for s in self.rack_servers(rack_id))

    def iter_servers(self) -> Iterator[Server]:
        return iter(self.servers.values())

    def check_conservation(self) -> None:
        """Assert per-server counters equal the sums over live components."""
        by_server: dict[int, tuple[float, float]] = {
            sid: (0.0, 0.0) for sid in self.servers
        }
        for pc in self.components.values():
            assert pc.live, f"dead component {pc.id} still registered"
            assert pc.server_id in self.servers, f"component {pc.id} on dead server"
            c, m = by_server[pc.server_id]
            by_server[pc.server_id] = (c + pc.cpu, m + pc.mem)
        for sid, srv in self.servers.items():
            c, m = by_server[sid]
            assert abs(srv.cpu_alloc - c) < 1e-9, (
                f"server {sid}: cpu_alloc {srv.cpu_alloc} != components {c}"
            )
            assert abs(srv.mem_alloc - m) < 1e-6, (
                f"server {sid}: mem_alloc {srv.mem_alloc} != components {m}"
            )
            assert srv.cpu_alloc <= srv.cpu_cap + 1e-9, f"server {sid} cpu overcommit"
            assert srv.mem_alloc <= srv.mem_cap + 1e-6, f"server {sid} mem overcommit"
            assert srv.cpu_alloc >= -1e-9 and srv.mem_alloc >= -1e-6


def build_cluster(config: Mapping) -> ClusterState:
    """Build a ClusterState from a cluster-config document."""
    racks = []
    next_id = itertools.count()
    for rack_id, rack in enumerate(config.get("racks", [])):
        servers = [
            Server(
                id=next(next_id),
                rack_id=rack_id,
                cpu_cap=float(s["cpu"]),
                mem_cap=float(s["mem_mb"]) * MB,
            )
            for s in rack["servers"]
        ]
        racks.append(servers)
    if not racks:
        raise ValueError("cluster config defines no racks")
    return ClusterState(
        racks,
        link_gbps=float(config.get("link_gbps", 100.0)),
        granule=float(config.get("granule_mb", 64)) * MB,
        chunk_cap=float(config.get("chunk_cap_mb", 1024)) * MB,
    )


def load_cluster_config(path: str | Path) -> ClusterState:
    with open(path) as fh:
        return build_cluster(json.load(fh))


def default_cluster(servers: int = 8, cpu: float = 32, mem_gb: float = 64) -> ClusterState:
    """Evaluation-testbed shape: one rack of 32-vCPU / 64-GB servers."""
    return build_cluster(
        {
            "racks": [
                {"servers": [{"cpu": cpu, "mem_mb": mem_gb * 1024}] * servers}
            ],
            "link_gbps": 100.0,
        }
    )
