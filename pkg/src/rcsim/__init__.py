"""rcsim: trace-driven simulator for resource-centric serverless scheduling."""

from .resource_graph import (
    ComponentId,
    ComputeSpec,
    DataSpec,
    ResourceGraph,
    build_graph,
    graph_cut_before,
    load_workload_spec,
    topo_order,
)
from .history import ResourceProfile, UsageSample
from .sizing import (
    AggregationCandidate,
    AggregationProblem,
    SizingParams,
    SizingProblem,
    select_parallel_vcpus,
    solve_aggregation,
    solve_sizing,
)
from .cluster import ClusterState, PhysicalComponent, Server, build_cluster, default_cluster
from .scheduler import GlobalScheduler, PlacementDecision, RackScheduler
from .sim import CostModel, RunReport, SimConfig, Simulator, component_runtime, run
from .workload import (
    BaselinePolicy,
    Phase,
    TraceRecord,
    execute_baseline,
    gen_distribution,
    gen_multiphase,
    load_trace_csv,
)

__version__ = "0.1.0"

__all__ = [
    "AggregationCandidate",
    "AggregationProblem",
    "BaselinePolicy",
    "ClusterState",
    "ComponentId",
    "ComputeSpec",
    "CostModel",
    "DataSpec",
    "GlobalScheduler",
    "Phase",
    "PhysicalComponent",
    "PlacementDecision",
    "RackScheduler",
    "ResourceGraph",
    "ResourceProfile",
    "RunReport",
    "Server",
    "SimConfig",
    "Simulator",
    "SizingParams",
    "SizingProblem",
    "TraceRecord",
    "UsageSample",
    "build_cluster",
    "build_graph",
    "component_runtime",
    "default_cluster",
    "execute_baseline",
    "gen_distribution",
    "gen_multiphase",
    "graph_cut_before",
    "load_trace_csv",
    "load_workload_spec",
    "run",
    "select_parallel_vcpus",
    "solve_aggregation",
    "solve_sizing",
    "topo_order",
]
