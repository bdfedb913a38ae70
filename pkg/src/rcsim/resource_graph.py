"""Resource-graph intermediate representation.

An application is a DAG of compute components (code regions with a distinct
CPU/parallelism profile) and data components (memory objects with distinct
lifetime and size behavior). Directed trigger edges carry control flow between
compute components; undirected access edges connect compute components to the
data components they read or write.

Graphs are built from declarative JSON workload specs and are immutable after
construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

MB = 1_000_000.0
GB = 1_000_000_000.0


class GraphError(ValueError):
    """Base class for workload-spec validation failures."""


class CyclicTriggers(GraphError):
    """Trigger edges contain a cycle."""


class DanglingAccess(GraphError):
    """A compute component accesses an undefined data component."""


class NoRoot(GraphError):
    """The trigger DAG has zero or multiple roots."""


@dataclass(frozen=True, order=True)
class ComponentId:
    """Stable identity of a component within one application's graph."""

    app: str
    index: int

    def __str__(self) -> str:
        return f"{self.app}/{self.index}"


@dataclass(frozen=True)
class PiecewiseLinear:
    """Piecewise-linear function of a scalar input scale.

    Defined by ascending ``(x, y)`` breakpoints; values are interpolated
    between breakpoints and clamped to the end values outside the covered
    range. A single breakpoint yields a constant function.
    """

    points: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        if not self.points:
            raise GraphError("breakpoint table must not be empty")
        xs = [x for x, _ in self.points]
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise GraphError(f"breakpoints must be strictly ascending in x: {xs}")

    def __call__(self, x: float) -> float:
        pts = self.points
        if x <= pts[0][0]:
            return pts[0][1]
        if x >= pts[-1][0]:
            return pts[-1][1]
        for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
            if x0 <= x <= x1:
                return y0 + (y1 - y0) * (x - x0) / (x1 - x0)
        raise AssertionError("unreachable: x inside range but no segment found")


@dataclass(frozen=True)
class ComputeSpec:
    """A compute component: CPU work, parallelism, and its data accesses."""

    id: ComponentId
    name: str
    base_work: float  # cpu-seconds per instance
    parallelism: PiecewiseLinear  # input scale -> instance count
    accesses: tuple[tuple[ComponentId, float], ...]  # (data id, bytes/instance)
    peak_mem_local: float  # bytes of private working memory per instance

    def instances(self, scale: float) -> int:
        return max(1, int(self.parallelism(scale) + 0.5))


@dataclass(frozen=True)
class DataSpec:
    """A data component: input-dependent size plus optional late growth."""

    id: ComponentId
    name: str
    size_fn: PiecewiseLinear  # input scale -> bytes
    growth_events: tuple[tuple[float, float], ...] = ()  # (time fraction, bytes)

    def size(self, scale: float) -> float:
        return self.size_fn(scale)


@dataclass(frozen=True)
class ResourceGraph:
    """Validated application IR: components, trigger DAG, and access edges."""

    app: str
    computes: tuple[ComputeSpec, ...]
    datas: tuple[DataSpec, ...]
    triggers: tuple[tuple[ComponentId, ComponentId], ...]
    accesses: tuple[tuple[ComponentId, ComponentId], ...]
    app_limit: tuple[float, float]  # (max vCPUs, max bytes)
    _by_id: Mapping[ComponentId, object] = field(hash=False, repr=False, default=None)

    def spec_of(self, cid: ComponentId):
        """The ComputeSpec or DataSpec registered under this id."""
        return self._by_id[cid]

    def compute(self, cid: ComponentId) -> ComputeSpec:
        spec = self._by_id[cid]
        assert isinstance(spec, ComputeSpec)
        return spec

    def data(self, cid: ComponentId) -> DataSpec:
        spec = self._by_id[cid]
        assert isinstance(spec, DataSpec)
        return spec

    def predecessors(self, cid: ComponentId) -> list[ComponentId]:
        return [u for u, v in self.triggers if v == cid]

    def successors(self, cid: ComponentId) -> list[ComponentId]:
        return [v for u, v in self.triggers if u == cid]

    def accessors(self, data_id: ComponentId) -> list[ComponentId]:
        """Compute components that access the given data component."""
        return [c for c, d in self.accesses if d == data_id]

    @property
    def root(self) -> ComponentId:
        order = topo_order(self)
        return order[0]


def _check_dag_and_root(
    compute_ids: Sequence[ComponentId],
    triggers: Sequence[tuple[ComponentId, ComponentId]],
) -> None:
    indeg = {c: 0 for c in compute_ids}
    succ: dict[ComponentId, list[ComponentId]] = {c: [] for c in compute_ids}
    for u, v in triggers:
        indeg[v] += 1
        succ[u].append(v)

    # Kahn-style elimination; leftover nodes imply a cycle. Checked before
    # the root count, since a cycle can also leave the graph rootless.
    remaining = dict(indeg)
    frontier = [c for c, d in remaining.items() if d == 0]
    seen = 0
    while frontier:
        u = frontier.pop()
        seen += 1
        for v in succ[u]:
            remaining[v] -= 1
            if remaining[v] == 0:
                frontier.append(v)
    if seen != len(compute_ids):
        raise CyclicTriggers("trigger edges contain a cycle")

    roots = [c for c in compute_ids if indeg[c] == 0]
    if len(roots) != 1:
        raise NoRoot(f"expected exactly one root compute component, found {len(roots)}")


def build_graph(spec: Mapping) -> ResourceGraph:
    """Construct and validate a ResourceGraph from a workload-spec document.

    Raises CyclicTriggers, DanglingAccess, or NoRoot on invalid specs; the
    same spec document always produces an identical graph.
    """
    app = spec["app"]
    limit = spec.get("app_limit", {})
    app_limit = (
        float(limit.get("max_cpu", 1e9)),
        float(limit.get("max_mem_mb", 1e12)) * MB,
    )

    computes_raw = spec.get("computes", [])
    datas_raw = spec.get("datas", [])

    ids: dict[str, ComponentId] = {}
    for idx, c in enumerate(computes_raw):
        name = c["id"]
        if name in ids:
            raise GraphError(f"duplicate component id {name!r}")
        ids[name] = ComponentId(app, idx)
    for off, d in enumerate(datas_raw):
        name = d["id"]
        if name in ids:
            raise GraphError(f"duplicate component id {name!r}")
        ids[name] = ComponentId(app, len(computes_raw) + off)

    data_names = {d["id"] for d in datas_raw}

    computes = []
    for c in computes_raw:
        accesses = []
        for a in c.get("accesses", []):
            if a["data"] not in data_names:
                raise DanglingAccess(
                    f"compute {c['id']!r} accesses undefined data {a['data']!r}"
                )
            accesses.append((ids[a["data"]], float(a["volume_mb"]) * MB))
        computes.append(
            ComputeSpec(
                id=ids[c["id"]],
                name=c["id"],
                base_work=float(c.get("base_work_cpu_s", 0.0)),
                parallelism=_table(c.get("parallelism", [[0.0, 1.0]])),
                accesses=tuple(accesses),
                peak_mem_local=float(c.get("peak_mem_local_mb", 0.0)) * MB,
            )
        )

    datas = []
    for d in datas_raw:
        growth = tuple(
            (float(frac), float(mb) * MB) for frac, mb in d.get("growth", [])
        )
        fracs = [f for f, _ in growth]
        if any(not 0.0 <= f < 1.0 for f in fracs) or any(
            b <= a for a, b in zip(fracs, fracs[1:])
        ):
            raise GraphError(
                f"growth fractions for {d['id']!r} must be strictly increasing in [0,1)"
            )
        datas.append(
            DataSpec(
                id=ids[d["id"]],
                name=d["id"],
                size_fn=_table(d["size_mb"], unit=MB),
                growth_events=growth,
            )
        )

    triggers = []
    for src, dst in spec.get("triggers", []):
        for name in (src, dst):
            if name not in ids or name in data_names:
                raise GraphError(f"trigger endpoint {name!r} is not a compute component")
        triggers.append((ids[src], ids[dst]))

    _check_dag_and_root([c.id for c in computes], triggers)

    accessed = {d for edges in (c.accesses for c in computes) for d, _ in edges}
    for d in datas:
        if d.id not in accessed:
            raise GraphError(f"data component {d.name!r} has no access edge")

    access_edges = tuple(
        (c.id, data_id) for c in computes for data_id, _ in c.accesses
    )
    graph = ResourceGraph(
        app=app,
        computes=tuple(computes),
        datas=tuple(datas),
        triggers=tuple(triggers),
        accesses=access_edges,
        app_limit=app_limit,
        _by_id={s.id: s for s in [*computes, *datas]},
    )
    return graph


def _table(points: Iterable[Sequence[float]], unit: float = 1.0) -> PiecewiseLinear:
    return PiecewiseLinear(tuple((float(x), float(y) * unit) for x, y in points))


def load_workload_spec(path: str | Path) -> ResourceGraph:
    with open(path) as fh:
        return build_graph(json.load(fh))


def topo_order(g: ResourceGraph) -> list[ComponentId]:
    """Topological order of compute components, ties broken by ascending index."""
    indeg = {c.id: 0 for c in g.computes}
    succ: dict[ComponentId, list[ComponentId]] = {c.id: [] for c in g.computes}
    for u, v in g.triggers:
        indeg[v] += 1
        succ[u].append(v)

    ready = sorted(c for c, d in indeg.items() if d == 0)
    order: list[ComponentId] = []
    while ready:
        u = ready.pop(0)
        order.append(u)
        changed = False
        for v in succ[u]:
            indeg[v] -= 1
            if indeg[v] == 0:
                ready.append(v)
                changed = True
        if changed:
            ready.sort()
    return order


def graph_cut_before(
    g: ResourceGraph, recorded: Iterable[tuple[ComponentId, ComponentId]]
) -> set[ComponentId]:
    """Maximal DAG prefix evidenced complete by the recorded trigger edges.

    A component belongs to the prefix when all of its trigger predecessors
    do and every one of its outgoing trigger edges is in ``recorded`` (edges
    are recorded when their source finishes, so a fully recorded out-edge
    set is completion evidence; a component with no outgoing edges never has
    such evidence and always re-executes). Recovery restarts at the
    components just after the cut.
    """
    recorded = set(recorded)
    out_edges: dict[ComponentId, list[tuple[ComponentId, ComponentId]]] = {
        c.id: [] for c in g.computes
    }
    for u, v in g.triggers:
        out_edges[u].append((u, v))

    prefix: set[ComponentId] = set()
    for cid in topo_order(g):
        edges = out_edges[cid]
        if not edges or any(e not in recorded for e in edges):
            continue
        if all(u in prefix for u, v in g.triggers if v == cid):
            prefix.add(cid)
    return prefix
