"""Graph IR construction, ordering, and cut computation."""

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rcsim.resource_graph import (
    MB,
    ComponentId,
    CyclicTriggers,
    DanglingAccess,
    GraphError,
    NoRoot,
    PiecewiseLinear,
    build_graph,
    graph_cut_before,
    topo_order,
)


def chain_spec(names, app="app", datas=(), accesses=None):
    computes = [
        {"id": n, "base_work_cpu_s": 1.0, "parallelism": [[0, 1]],
         "peak_mem_local_mb": 10, "accesses": accesses.get(n, []) if accesses else []}
        for n in names
    ]
    return {
        "app": app,
        "app_limit": {"max_cpu": 64, "max_mem_mb": 64000},
        "computes": computes,
        "datas": list(datas),
        "triggers": [[a, b] for a, b in zip(names, names[1:])],
    }


def random_dag_spec(n, seed, edge_prob=0.3):
    """Random DAG over indices 0..n-1 with edges i -> j only for i < j,
    plus chain edges from node 0 so the root is unique."""
    rng = random.Random(seed)
    names = [f"c{i}" for i in range(n)]
    spec = chain_spec(names)
    triggers = [[names[i], names[i + 1]] for i in range(n - 1)]
    for i in range(n):
        for j in range(i + 2, n):
            if rng.random() < edge_prob:
                triggers.append([names[i], names[j]])
    spec["triggers"] = triggers
    return spec


class TestBuildGraph:
    def test_two_node_chain_with_data(self):
        spec = chain_spec(["A", "B"],
                          datas=[{"id": "D", "size_mb": [[1, 100]]}],
                          accesses={"B": [{"data": "D", "volume_mb": 10}]})
        g = build_graph(spec)
        order = topo_order(g)
        assert [g.spec_of(c).name for c in order] == ["A", "B"]
        assert g.root == order[0]
        assert len(g.datas) == 1
        assert g.accessors(g.datas[0].id) == [order[1]]

    def test_cycle_detected(self):
        spec = chain_spec(["A", "B"])
        spec["triggers"] = [["A", "B"], ["B", "A"]]
        with pytest.raises(CyclicTriggers):
            build_graph(spec)

    def test_dangling_access(self):
        spec = chain_spec(["A"], accesses={"A": [{"data": "nope", "volume_mb": 1}]})
        with pytest.raises(DanglingAccess):
            build_graph(spec)

    def test_no_root_rejected(self):
        spec = chain_spec(["A", "B", "C"])
        spec["triggers"] = [["A", "C"], ["B", "C"]]  # two roots
        with pytest.raises(NoRoot):
            build_graph(spec)

    def test_unaccessed_data_rejected(self):
        spec = chain_spec(["A"], datas=[{"id": "D", "size_mb": [[1, 10]]}])
        with pytest.raises(GraphError):
            build_graph(spec)

    def test_fanout_120_validated_against_reachability(self):
        """5-stage chain with a 120-wide fan stage, one data per sender."""
        width = 120
        computes = [{"id": "src", "base_work_cpu_s": 1, "parallelism": [[0, 1]],
                     "peak_mem_local_mb": 1, "accesses": []}]
        datas = []
        triggers = []
        for i in range(width):
            name = f"w{i}"
            datas.append({"id": f"d{i}", "size_mb": [[1, 10]]})
            computes.append({
                "id": name, "base_work_cpu_s": 1, "parallelism": [[0, 1]],
                "peak_mem_local_mb": 1,
                "accesses": [{"data": f"d{i}", "volume_mb": 1}],
            })
            triggers.append(["src", name])
        computes.append({"id": "sink", "base_work_cpu_s": 1, "parallelism": [[0, 1]],
                         "peak_mem_local_mb": 1,
                         "accesses": [{"data": f"d{i}", "volume_mb": 1} for i in range(width)]})
        triggers.extend([[f"w{i}", "sink"] for i in range(width)])
        g = build_graph({"app": "fan", "computes": computes, "datas": datas,
                         "triggers": triggers})
        assert len(g.computes) == 1 + width + 1
        assert len(g.datas) == width

        # Independent reachability oracle: BFS from the root touches all.
        succ = {}
        for u, v in g.triggers:
            succ.setdefault(u, []).append(v)
        seen = {g.root}
        frontier = [g.root]
        while frontier:
            u = frontier.pop()
            for v in succ.get(u, []):
                if v not in seen:
                    seen.add(v)
                    frontier.append(v)
        assert seen == {c.id for c in g.computes}

    def test_deterministic_construction(self):
        spec = random_dag_spec(12, seed=5)
        g1, g2 = build_graph(spec), build_graph(spec)
        assert g1.triggers == g2.triggers
        assert [c.id for c in g1.computes] == [c.id for c in g2.computes]


class TestPiecewiseLinear:
    def test_interpolation_and_clamp(self):
        f = PiecewiseLinear(((1.0, 3.0), (1000.0, 120.0)))
        assert f(1.0) == 3.0
        assert f(1000.0) == 120.0
        assert f(0.5) == 3.0  # clamped below
        assert f(2000.0) == 120.0  # clamped above
        mid = f(500.5)
        assert 3.0 < mid < 120.0

    def test_non_ascending_rejected(self):
        with pytest.raises(GraphError):
            PiecewiseLinear(((2.0, 1.0), (2.0, 5.0)))


def kahn_oracle(g):
    """Independent Kahn's algorithm with the same index tie-break."""
    indeg = {c.id: 0 for c in g.computes}
    for _, v in g.triggers:
        indeg[v] += 1
    order = []
    while indeg:
        ready = sorted([c for c, d in indeg.items() if d == 0])
        nxt = ready[0]
        order.append(nxt)
        del indeg[nxt]
        for u, v in g.triggers:
            if u == nxt:
                indeg[v] -= 1
    return order


class TestTopoOrder:
    def test_chain(self):
        g = build_graph(chain_spec(["A", "B", "C"]))
        assert [g.spec_of(c).name for c in topo_order(g)] == ["A", "B", "C"]

    def test_diamond_tie_break_by_index(self):
        spec = chain_spec(["A", "B", "C", "D"])
        spec["triggers"] = [["A", "B"], ["A", "C"], ["B", "D"], ["C", "D"]]
        g = build_graph(spec)
        assert [g.spec_of(c).name for c in topo_order(g)] == ["A", "B", "C", "D"]

    @pytest.mark.parametrize("seed", range(5))
    def test_random_dag_matches_kahn_oracle(self, seed):
        g = build_graph(random_dag_spec(50, seed=seed, edge_prob=0.1))
        assert topo_order(g) == kahn_oracle(g)

    def test_respects_every_edge(self):
        g = build_graph(random_dag_spec(30, seed=9))
        pos = {c: i for i, c in enumerate(topo_order(g))}
        assert len(pos) == len(g.computes)
        for u, v in g.triggers:
            assert pos[u] < pos[v]


def downward_closed_sets(g):
    """All trigger-DAG prefixes, by recursion over the topological order."""
    order = topo_order(g)
    preds = {c: set(g.predecessors(c)) for c in order}
    results = []

    def extend(i, current):
        if i == len(order):
            results.append(frozenset(current))
            return
        v = order[i]
        extend(i + 1, current)
        if preds[v] <= current:
            current.add(v)
            extend(i + 1, current)
            current.discard(v)

    extend(0, set())
    return results


def cut_oracle(g, recorded):
    """Maximal downward-closed set whose members' out-edges are all recorded.

    Members must carry completion evidence: at least one outgoing trigger
    edge, with every outgoing edge recorded.
    """
    best = frozenset()
    for s in downward_closed_sets(g):
        if len(s) <= len(best):
            continue
        ok = True
        for u in s:
            edges = [(a, b) for a, b in g.triggers if a == u]
            if not edges or any(e not in recorded for e in edges):
                ok = False
                break
        if ok:
            best = s
    return set(best)


class TestGraphCut:
    def test_chain_one_recorded(self):
        g = build_graph(chain_spec(["A", "B", "C"]))
        a, b, c = topo_order(g)
        assert graph_cut_before(g, {(a, b)}) == {a}

    def test_chain_two_recorded(self):
        g = build_graph(chain_spec(["A", "B", "C"]))
        a, b, c = topo_order(g)
        assert graph_cut_before(g, {(a, b), (b, c)}) == {a, b}

    def test_all_edges_recorded_gives_every_evidenced_component(self):
        g = build_graph(random_dag_spec(15, seed=3))
        sources = {u for u, _ in g.triggers}
        sinks = {c.id for c in g.computes} - sources
        prefix = graph_cut_before(g, set(g.triggers))
        # Everything with completion evidence is kept; sinks re-execute
        # because nothing ever records their completion.
        assert prefix == sources
        assert prefix.isdisjoint(sinks) and sinks

    def test_empty_recorded_chain_gives_empty(self):
        g = build_graph(chain_spec(["A", "B", "C"]))
        assert graph_cut_before(g, set()) == set()

    @pytest.mark.parametrize("seed", range(8))
    def test_random_subsets_match_bruteforce(self, seed):
        rng = random.Random(seed)
        g = build_graph(random_dag_spec(20, seed=seed, edge_prob=0.12))
        for _ in range(10):
            recorded = {e for e in g.triggers if rng.random() < 0.6}
            assert graph_cut_before(g, recorded) == cut_oracle(g, recorded)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 14), st.integers(0, 10_000), st.floats(0.05, 0.5))
def test_topo_is_permutation_respecting_edges(n, seed, p):
    g = build_graph(random_dag_spec(n, seed=seed, edge_prob=p))
    order = topo_order(g)
    assert sorted(order) == sorted(c.id for c in g.computes)
    pos = {c: i for i, c in enumerate(order)}
    assert all(pos[u] < pos[v] for u, v in g.triggers)
