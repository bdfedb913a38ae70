"""Server accounting, soft marks, and conservation under fuzzing."""

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rcsim.cluster import (
    CONTAINER,
    MEMORY_CHUNK,
    ClusterState,
    DoubleRelease,
    Insufficient,
    Server,
    UnknownServer,
    build_cluster,
    default_cluster,
)

GB = 1e9


def one_server(cpu=32.0, mem=64 * GB) -> ClusterState:
    return ClusterState([[Server(id=0, rack_id=0, cpu_cap=cpu, mem_cap=mem)]])


class TestAlloc:
    def test_basic_alloc_reduces_free(self):
        c = one_server()
        c.try_alloc(0, 16, 32 * GB)
        assert c.free_resources(0) == (16, 32 * GB)

    def test_over_capacity_rejected_without_side_effects(self):
        c = one_server()
        before = (c.servers[0].cpu_alloc, c.servers[0].mem_alloc)
        with pytest.raises(Insufficient):
            c.try_alloc(0, 64, 1 * GB)
        assert (c.servers[0].cpu_alloc, c.servers[0].mem_alloc) == before
        c.check_conservation()

    def test_marks_are_not_capacity(self):
        # 24 vCPU allocated leaves 8 free; another app's 8-vCPU mark does not
        # change physical capacity, so a 16-vCPU request fails even when the
        # mark may be preempted.
        c = one_server()
        c.try_alloc(0, 24, 1 * GB, app="a")
        c.mark_soft(0, "b", 8, 0)
        with pytest.raises(Insufficient):
            c.try_alloc(0, 16, 1 * GB, preempt_soft=True, app="c")
        assert c.free_resources(0)[0] == 8

    def test_alloc_release_is_identity(self):
        c = one_server()
        snapshot = (c.servers[0].cpu_alloc, c.servers[0].mem_alloc)
        pc = c.try_alloc(0, 4, 2 * GB)
        c.release(pc)
        assert (c.servers[0].cpu_alloc, c.servers[0].mem_alloc) == snapshot
        assert not c.servers[0].hosted
        assert pc.id not in c.components

    def test_double_release(self):
        c = one_server()
        pc = c.try_alloc(0, 1, GB)
        c.release(pc)
        with pytest.raises(DoubleRelease):
            c.release(pc)

    def test_unknown_server(self):
        c = one_server()
        with pytest.raises(UnknownServer):
            c.free_resources(99)

    def test_adjust_resizes_in_place(self):
        c = one_server()
        pc = c.try_alloc(0, 2, GB)
        c.adjust(pc, dcpu=1, dmem=GB)
        assert pc.cpu == 3 and pc.mem == 2 * GB
        assert c.servers[0].cpu_alloc == 3
        c.adjust(pc, dcpu=-2)
        assert pc.cpu == 1
        with pytest.raises(Insufficient):
            c.adjust(pc, dcpu=1000)
        c.check_conservation()


class TestLedgerReplay:
    """Random alloc/release interleavings checked against a shadow ledger."""

    @pytest.mark.parametrize("seed", range(5))
    def test_thousand_ops_conserve(self, seed):
        rng = random.Random(seed)
        c = default_cluster(servers=4, cpu=16, mem_gb=32)
        live = []
        ledger = {sid: [0.0, 0.0] for sid in c.servers}
        for _ in range(1000):
            if live and rng.random() < 0.45:
                pc = live.pop(rng.randrange(len(live)))
                c.release(pc)
                ledger[pc.server_id][0] -= pc.cpu
                ledger[pc.server_id][1] -= pc.mem
            else:
                sid = rng.choice(list(c.servers))
                cpu = rng.choice([0, 1, 2, 4])
                mem = rng.choice([64e6, 256e6, 1e9, 4e9])
                kind = CONTAINER if cpu else MEMORY_CHUNK
                try:
                    pc = c.try_alloc(sid, cpu, mem, kind=kind)
                except Insufficient:
                    srv = c.servers[sid]
                    assert srv.free_cpu < cpu or srv.free_mem < mem
                    continue
                live.append(pc)
                ledger[sid][0] += cpu
                ledger[sid][1] += mem
            c.check_conservation()
            for sid, (cpu_sum, mem_sum) in ledger.items():
                assert c.servers[sid].cpu_alloc == pytest.approx(cpu_sum)
                assert c.servers[sid].mem_alloc == pytest.approx(mem_sum)
                free = c.free_resources(sid)
                assert free[0] == pytest.approx(c.servers[sid].cpu_cap - cpu_sum)
                assert free[1] == pytest.approx(c.servers[sid].mem_cap - mem_sum)


class TestSoftMarks:
    def test_marks_accumulate_and_consume(self):
        c = one_server()
        c.mark_soft(0, "a", 4, GB)
        c.mark_soft(0, "a", 2, GB)
        assert c.servers[0].marked() == (6, 2 * GB)
        c.consume_mark(0, "a", 5, 1.5 * GB)
        assert c.servers[0].marked() == (1, 0.5 * GB)
        c.clear_mark(0, "a")
        assert c.servers[0].marked() == (0, 0)

    def test_effective_free_discounts_foreign_marks_only(self):
        c = one_server()
        c.mark_soft(0, "other", 8, 8 * GB)
        assert c.servers[0].effective_free("me") == (24, 56 * GB)
        assert c.servers[0].effective_free("other") == (32, 64 * GB)

    def test_preempting_alloc_trims_foreign_marks(self):
        c = one_server(cpu=8, mem=8 * GB)
        c.mark_soft(0, "victim", 8, 8 * GB)
        c.try_alloc(0, 6, 6 * GB, preempt_soft=True, app="claimer")
        # Marks must fit in the remaining free space after the claim.
        mc, mm = c.servers[0].marked()
        assert mc <= c.servers[0].free_cpu
        assert mm <= c.servers[0].free_mem

    def test_marks_never_permit_overcommit(self):
        c = one_server(cpu=4, mem=4 * GB)
        c.mark_soft(0, "a", 100, 100 * GB)
        with pytest.raises(Insufficient):
            c.try_alloc(0, 5, GB, preempt_soft=True, app="b")
        c.check_conservation()


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 4),
                          st.sampled_from([64e6, 512e6, 2e9])), max_size=60))
def test_no_overcommit_property(ops):
    c = default_cluster(servers=4, cpu=8, mem_gb=8)
    live = []
    for sid, cpu, mem in ops:
        try:
            live.append(c.try_alloc(sid, float(cpu), mem, kind=CONTAINER if cpu else MEMORY_CHUNK))
        except Insufficient:
            pass
        if len(live) > 10:
            c.release(live.pop(0))
        for srv in c.iter_servers():
            assert srv.cpu_alloc <= srv.cpu_cap
            assert srv.mem_alloc <= srv.mem_cap
            assert srv.cpu_alloc >= 0 and srv.mem_alloc >= 0
    c.check_conservation()


class TestConfig:
    def test_build_cluster_from_document(self):
        c = build_cluster(
            {
                "racks": [
                    {"servers": [{"cpu": 16, "mem_mb": 32768}] * 2},
                    {"servers": [{"cpu": 8, "mem_mb": 16384}]},
                ],
                "link_gbps": 40,
                "granule_mb": 128,
                "chunk_cap_mb": 512,
            }
        )
        assert len(c.racks) == 2
        assert len(c.servers) == 3
        assert c.link_gbps == 40
        assert c.granule == 128e6
        assert c.chunk_cap == 512e6
        assert c.servers[2].cpu_cap == 8

    def test_default_cluster_matches_testbed_shape(self):
        c = default_cluster()
        assert len(c.servers) == 8
        assert all(s.cpu_cap == 32 for s in c.iter_servers())
        assert all(s.mem_cap == 64 * 1024 * 1e6 for s in c.iter_servers())
        assert c.link_gbps == 100.0

    def test_empty_config_rejected(self):
        with pytest.raises(ValueError):
            build_cluster({"racks": []})
