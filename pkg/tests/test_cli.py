"""CLI behavior: run matrices, determinism, comparisons, error paths."""

import json
import os
from pathlib import Path

import pytest

from rcsim.cli import main

WORKLOAD = {
    "app": "demo",
    "app_limit": {"max_cpu": 64, "max_mem_mb": 64000},
    "computes": [
        {"id": "load", "base_work_cpu_s": 0.2, "parallelism": [[0, 1]],
         "peak_mem_local_mb": 200,
         "accesses": [{"data": "table", "volume_mb": 100}]},
        {"id": "crunch", "base_work_cpu_s": 0.4, "parallelism": [[0, 2]],
         "peak_mem_local_mb": 400,
         "accesses": [{"data": "table", "volume_mb": 200}]},
    ],
    "datas": [{"id": "table", "size_mb": [[1, 1000]]}],
    "triggers": [["load", "crunch"]],
}

CLUSTER = {
    "racks": [{"servers": [{"cpu": 32, "mem_mb": 65536}] * 4}],
    "link_gbps": 100,
}


@pytest.fixture
def inputs(tmp_path):
    wl = tmp_path / "demo.json"
    wl.write_text(json.dumps(WORKLOAD))
    cl = tmp_path / "cluster.json"
    cl.write_text(json.dumps(CLUSTER))
    return wl, cl, tmp_path


def run_cli(*argv):
    return main(list(argv))


class TestRun:
    def test_matrix_outputs(self, inputs):
        wl, cl, tmp = inputs
        out = tmp / "out"
        code = run_cli(
            "run", "--cluster", str(cl), "--workload", str(wl),
            "--policy", "adaptive", "faas-peak", "--seeds", "0",
            "--invocations", "2", "--gap", "5", "--out", str(out),
        )
        assert code == 0
        files = sorted(p.name for p in out.iterdir())
        assert "summary.csv" in files
        assert "demo__adaptive__s0.json" in files
        assert "demo__adaptive__s0.events.jsonl" in files
        assert "demo__faas-peak__s0.json" in files
        lines = (out / "summary.csv").read_text().splitlines()
        assert lines[0].startswith("workload,policy,seed,mem_gb_min")
        assert len(lines) == 3
        report = json.loads((out / "demo__adaptive__s0.json").read_text())
        assert report["aggregate"]["completed"] == 2

    def test_invalid_spec_exits_nonzero_without_outputs(self, inputs, capsys):
        wl, cl, tmp = inputs
        bad = tmp / "bad.json"
        bad.write_text(json.dumps({"app": "x", "computes": [], "triggers": []}))
        out = tmp / "out2"
        code = run_cli("run", "--cluster", str(cl), "--workload", str(bad),
                       "--out", str(out))
        assert code != 0
        assert not out.exists()
        assert "error" in capsys.readouterr().err

    def test_missing_file_exits_nonzero(self, inputs, capsys):
        _, cl, tmp = inputs
        code = run_cli("run", "--cluster", str(cl), "--workload",
                       str(tmp / "nope.json"), "--out", str(tmp / "o"))
        assert code != 0
        assert not (tmp / "o").exists()

    def test_rerun_is_byte_identical(self, inputs):
        wl, cl, tmp = inputs
        outs = []
        for name in ("a", "b"):
            out = tmp / name
            assert run_cli(
                "run", "--cluster", str(cl), "--workload", str(wl),
                "--policy", "adaptive", "--seeds", "1..2",
                "--invocations", "2", "--out", str(out),
            ) == 0
            outs.append(out)
        for fname in ("summary.csv", "demo__adaptive__s1.json",
                      "demo__adaptive__s1.events.jsonl"):
            assert (outs[0] / fname).read_bytes() == (outs[1] / fname).read_bytes()

    def test_parallel_jobs_match_serial(self, inputs):
        wl, cl, tmp = inputs
        serial, parallel = tmp / "ser", tmp / "par"
        for out, jobs in ((serial, "1"), (parallel, "2")):
            assert run_cli(
                "run", "--cluster", str(cl), "--workload", str(wl),
                "--policy", "adaptive", "faas-peak", "--seeds", "0",
                "--invocations", "2", "--jobs", jobs, "--out", str(out),
            ) == 0
        assert (serial / "summary.csv").read_bytes() == (
            parallel / "summary.csv"
        ).read_bytes()

    def test_trace_file_input(self, inputs):
        wl, cl, tmp = inputs
        trace = tmp / "trace.csv"
        trace.write_text("app,arrival_s,scale\ndemo,0.0,1.0\ndemo,3.0,2.0\n")
        out = tmp / "outt"
        assert run_cli(
            "run", "--cluster", str(cl), "--workload", str(wl),
            "--trace", str(trace), "--out", str(out),
        ) == 0
        report = json.loads((out / "demo__adaptive__s0.json").read_text())
        assert report["aggregate"]["invocations"] == 2

    def test_fail_inject_records_recovery(self, inputs):
        wl, cl, tmp = inputs
        out = tmp / "outf"
        assert run_cli(
            "run", "--cluster", str(cl), "--workload", str(wl),
            "--invocations", "1", "--fail-inject", "crunch@1.5",
            "--out", str(out),
        ) == 0
        report = json.loads((out / "demo__adaptive__s0.json").read_text())
        assert report["aggregate"]["recoveries"] == 1
        assert report["aggregate"]["completed"] == 1


class TestCompare:
    def make_summary(self, inputs):
        wl, cl, tmp = inputs
        out = tmp / "cmp"
        assert run_cli(
            "run", "--cluster", str(cl), "--workload", str(wl),
            "--policy", "adaptive", "faas-peak", "always-remote",
            "--seeds", "0", "--invocations", "2", "--out", str(out),
        ) == 0
        return out / "summary.csv"

    def test_reduction_math(self, inputs, tmp_path, capsys):
        summary = self.make_summary(inputs)
        code = run_cli("compare", str(summary))
        assert code == 0
        captured = capsys.readouterr().out
        assert "mem_reduction_%" in captured
        savings = summary.parent / "savings.csv"
        rows = {tuple(l.split(",")[:2]): l.split(",")
                for l in savings.read_text().splitlines()[1:]}
        base = rows[("demo", "faas-peak")]
        assert float(base[2]) == pytest.approx(0.0, abs=1e-9)
        assert float(base[3]) == pytest.approx(1.0, abs=1e-9)
        adaptive = rows[("demo", "adaptive")]
        assert float(adaptive[2]) > 0.0  # saves memory vs the peak baseline

    def test_hand_computed_table(self, tmp_path, capsys):
        header = ("workload,policy,seed,mem_gb_min,used_gb_min,cpu_core_s,"
                  "e2e_p50,e2e_p99,local_frac,recoveries\n")
        s = tmp_path / "summary.csv"
        s.write_text(header
                     + "w,faas-peak,0,40.0,10.0,1.0,2.0,2.0,1.0,0\n"
                     + "w,adaptive,0,10.0,10.0,1.0,1.0,1.0,1.0,0\n")
        assert run_cli("compare", str(s)) == 0
        table = capsys.readouterr().out
        line = [l for l in table.splitlines() if l.startswith("w ") and "adaptive" in l]
        assert "75.0" in line[0]  # (40 - 10) / 40
        assert "2.00" in line[0]  # 2.0 / 1.0 speedup

    def test_key_mismatch(self, tmp_path, capsys):
        header = ("workload,policy,seed,mem_gb_min,used_gb_min,cpu_core_s,"
                  "e2e_p50,e2e_p99,local_frac,recoveries\n")
        a = tmp_path / "a.csv"
        a.write_text(header + "w1,faas-peak,0,1,1,1,1,1,1,0\n")
        b = tmp_path / "b.csv"
        b.write_text(header + "w2,faas-peak,0,1,1,1,1,1,1,0\n")
        assert run_cli("compare", str(a), str(b)) != 0
        assert "error" in capsys.readouterr().err

    def test_missing_baseline_is_error(self, tmp_path, capsys):
        header = ("workload,policy,seed,mem_gb_min,used_gb_min,cpu_core_s,"
                  "e2e_p50,e2e_p99,local_frac,recoveries\n")
        a = tmp_path / "a.csv"
        a.write_text(header + "w1,adaptive,0,1,1,1,1,1,1,0\n")
        assert run_cli("compare", str(a)) != 0


class TestEnvLogging:
    def test_bad_level_rejected(self, monkeypatch, capsys):
        monkeypatch.setenv("RCSIM_LOG", "loud")
        assert main(["compare", "nothing.csv"]) == 2
        assert "RCSIM_LOG" in capsys.readouterr().err

    def test_levels_accepted(self, monkeypatch, inputs):
        wl, cl, tmp = inputs
        monkeypatch.setenv("RCSIM_LOG", "info")
        out = tmp / "lvl"
        assert run_cli("run", "--cluster", str(cl), "--workload", str(wl),
                       "--invocations", "1", "--out", str(out)) == 0
