"""Workload generators, trace ingestion, and baseline wiring."""

import statistics

import numpy as np
import pytest

from rcsim.cluster import default_cluster
from rcsim.resource_graph import MB, topo_order
from rcsim.workload import (
    BaselinePolicy,
    InvalidPhase,
    Phase,
    TraceRecord,
    execute_baseline,
    gen_distribution,
    gen_multiphase,
    load_trace_csv,
    trace_for_scales,
)


class TestGenMultiphase:
    def test_three_phase_chain_matches_requested_peaks(self):
        g = gen_multiphase("m", [
            Phase(cpu=1, mem_mb=1024, duration_s=1.0),
            Phase(cpu=8, mem_mb=12288, duration_s=1.0),
            Phase(cpu=1, mem_mb=2048, duration_s=1.0),
        ])
        order = topo_order(g)
        assert len(order) == 3
        peaks = [g.compute(c).peak_mem_local * g.compute(c).instances(1.0)
                 for c in order]
        assert peaks == [1024 * MB, 12288 * MB, 2048 * MB]
        cpus = [g.compute(c).instances(1.0) for c in order]
        assert cpus == [1, 8, 1]

    def test_twelvefold_memory_spread(self):
        g = gen_multiphase("m", [
            Phase(cpu=1, mem_mb=1000, duration_s=1.0),
            Phase(cpu=1, mem_mb=12000, duration_s=1.0),
        ])
        peaks = [g.compute(c).peak_mem_local * g.compute(c).instances(1.0)
                 for c in topo_order(g)]
        assert max(peaks) / min(peaks) == pytest.approx(12.0)

    def test_fanout_parallelism_table_endpoints(self):
        g = gen_multiphase("m", [
            Phase(cpu=3, mem_mb=100, duration_s=1.0,
                  parallelism=[[1, 3], [1000, 120]]),
        ])
        comp = g.computes[0]
        assert comp.instances(1.0) == 3
        assert comp.instances(1000.0) == 120
        assert 3 <= comp.instances(500.0) <= 120

    def test_empty_phases_rejected(self):
        with pytest.raises(InvalidPhase):
            gen_multiphase("m", [])
        with pytest.raises(InvalidPhase):
            gen_multiphase("m", [Phase(cpu=0, mem_mb=1, duration_s=1)])


class TestGenDistribution:
    def test_stable_is_constant(self):
        scales = gen_distribution("Stable", 100, seed=3)
        assert len(set(scales)) == 1

    def test_small_median_below_large(self):
        small = gen_distribution("Small", 500, seed=1)
        large = gen_distribution("Large", 500, seed=1)
        assert statistics.median(small) < statistics.median(large)

    def test_varying_has_high_coefficient_of_variation(self):
        scales = gen_distribution("Varying", 1000, seed=2)
        cv = statistics.pstdev(scales) / statistics.fmean(scales)
        assert cv >= 1.0

    def test_deterministic_per_seed(self):
        assert gen_distribution("Small", 50, seed=9) == gen_distribution(
            "Small", 50, seed=9
        )
        assert gen_distribution("Small", 50, seed=9) != gen_distribution(
            "Small", 50, seed=10
        )

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            gen_distribution("Huge", 10)
        with pytest.raises(ValueError):
            gen_distribution("Small", 0)


class TestTraceCsv:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "trace.csv"
        path.write_text("app,arrival_s,scale\napp,0.0,1.0\napp,1.5,2.0\n")
        records = load_trace_csv(path)
        assert records == [TraceRecord("app", 0.0, 1.0), TraceRecord("app", 1.5, 2.0)]

    def test_rejects_decreasing_arrivals(self, tmp_path):
        path = tmp_path / "trace.csv"
        path.write_text("app,arrival_s,scale\napp,5.0,1.0\napp,1.0,1.0\n")
        with pytest.raises(ValueError):
            load_trace_csv(path)

    def test_rejects_missing_columns(self, tmp_path):
        path = tmp_path / "trace.csv"
        path.write_text("app,when\napp,1\n")
        with pytest.raises(ValueError):
            load_trace_csv(path)

    def test_trace_for_scales(self):
        t = trace_for_scales("a", [1.0, 2.0], gap_s=3.0)
        assert [r.arrival_time for r in t] == [0.0, 3.0]


class TestBaselinePolicyValidation:
    def test_known_variants(self):
        for v in ("faas-peak", "dag-fixed", "always-remote", "migration-best"):
            BaselinePolicy(variant=v)

    def test_unknown_variant(self):
        with pytest.raises(ValueError):
            BaselinePolicy(variant="magic")

    def test_bad_migration_bandwidth(self):
        with pytest.raises(ValueError):
            BaselinePolicy(variant="migration-best", migration_gbps=-1)


class TestExecuteBaseline:
    def graph(self):
        return gen_multiphase("b", [
            Phase(cpu=1, mem_mb=1000, duration_s=0.5),
            Phase(cpu=4, mem_mb=4000, duration_s=0.5),
        ])

    def test_faas_peak_report(self):
        g = self.graph()
        rep = execute_baseline(
            BaselinePolicy("faas-peak"), {"b": g},
            [TraceRecord("b", 0.0, 1.0)], default_cluster(), debug=True,
        )
        assert rep.policy == "faas-peak"
        r = rep.invocations[0]
        assert r.completed
        assert r.mem_gb_min == pytest.approx(
            4000 * MB * r.end_to_end_s / 1e9 / 60, rel=0.01
        )

    def test_migration_bandwidth_override(self):
        g = self.graph()
        rep = execute_baseline(
            BaselinePolicy("migration-best", migration_gbps=10.0), {"b": g},
            [TraceRecord("b", 0.0, 1.0)], default_cluster(), debug=True,
        )
        assert rep.invocations[0].completed

    def test_allocated_ordering_dagfixed_vs_faaspeak(self):
        g = self.graph()
        trace = [TraceRecord("b", i * 10.0, 1.0) for i in range(3)]
        faas = execute_baseline(BaselinePolicy("faas-peak"), {"b": g}, trace,
                                default_cluster())
        dag = execute_baseline(BaselinePolicy("dag-fixed"), {"b": g}, trace,
                               default_cluster())
        assert (dag.aggregate()["mem_gb_min"]
                <= faas.aggregate()["mem_gb_min"] + 1e-9)
