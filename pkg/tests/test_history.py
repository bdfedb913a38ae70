"""Profile recording, EMA behavior, and weighted history views."""

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rcsim.history import EmptyHistory, ResourceProfile, UsageSample


def sample(inv=0, cpu=1.0, mem=100.0, exec_time=1.0, util=0.5):
    return UsageSample(inv, cpu, mem, exec_time, util)


class TestRecord:
    def test_first_sample_sets_ema(self):
        p = ResourceProfile()
        p.record(sample(mem=100.0))
        assert p.ema_mem == 100.0
        assert p.ema_cpu == 1.0

    def test_ema_update_rule(self):
        p = ResourceProfile(alpha=0.5)
        p.record(sample(mem=100.0))
        p.record(sample(inv=1, mem=200.0))
        assert p.ema_mem == 150.0

    def test_ema_matches_unrolled_recurrence(self):
        rng = random.Random(42)
        mems = [rng.uniform(10, 500) for _ in range(10)]
        p = ResourceProfile(alpha=0.5)
        for i, m in enumerate(mems):
            p.record(sample(inv=i, mem=m))
        # Independent unroll of ema_t = a*x_t + (1-a)*ema_{t-1}.
        expect = mems[0]
        for m in mems[1:]:
            expect = 0.5 * m + 0.5 * expect
        assert p.ema_mem == pytest.approx(expect, abs=0.0)

    def test_window_eviction(self):
        p = ResourceProfile(window=5)
        for i in range(9):
            p.record(sample(inv=i))
        assert len(p) == 5
        assert p.samples[0].invocation_id == 4

    def test_replay_is_bit_identical(self):
        seq = [sample(inv=i, mem=float(i * 31 % 97), util=(i % 10) / 10)
               for i in range(50)]
        a, b = ResourceProfile(), ResourceProfile()
        for s in seq:
            a.record(s)
        for s in seq:
            b.record(s)
        assert a.ema_mem == b.ema_mem
        assert a.ema_cpu == b.ema_cpu
        assert a.samples == b.samples

    def test_invalid_samples_rejected(self):
        with pytest.raises(ValueError):
            UsageSample(0, -1.0, 0.0, 1.0, 0.5)
        with pytest.raises(ValueError):
            UsageSample(0, 1.0, 0.0, 0.0, 0.5)
        with pytest.raises(ValueError):
            UsageSample(0, 1.0, 0.0, 1.0, 1.5)


class TestWeightedPeaks:
    def test_single_sample_weight_one(self):
        p = ResourceProfile()
        p.record(sample(mem=123.0, exec_time=2.0))
        assert p.weighted_peaks() == [(123.0, 2.0, 1.0)]

    def test_two_samples_geometric(self):
        p = ResourceProfile(beta=0.5)
        p.record(sample(inv=0, mem=1.0))
        p.record(sample(inv=1, mem=2.0))
        weights = [w for _, _, w in p.weighted_peaks()]
        assert weights == pytest.approx([1 / 3, 2 / 3])

    def test_hundred_samples_match_closed_form(self):
        beta = 0.98
        p = ResourceProfile(beta=beta)
        for i in range(100):
            p.record(sample(inv=i, mem=float(i)))
        weights = [w for _, _, w in p.weighted_peaks()]
        total = (1 - beta ** 100) / (1 - beta)  # geometric series
        expect = [beta ** (99 - i) / total for i in range(100)]
        assert weights == pytest.approx(expect, abs=1e-12)

    def test_empty_history_raises(self):
        with pytest.raises(EmptyHistory):
            ResourceProfile().weighted_peaks()

    def test_weights_sum_to_one_and_increase_with_recency(self):
        p = ResourceProfile()
        for i in range(37):
            p.record(sample(inv=i))
        weights = [w for _, _, w in p.weighted_peaks()]
        assert sum(weights) == pytest.approx(1.0, abs=1e-12)
        assert all(b >= a for a, b in zip(weights, weights[1:]))


@settings(max_examples=50, deadline=None)
@given(st.floats(0.1, 0.9), st.floats(1.0, 1e6), st.integers(1, 60))
def test_ema_converges_to_constant_input(alpha, c, n):
    p = ResourceProfile(alpha=alpha)
    p.record(sample(inv=0, mem=2 * c))
    start_err = abs(p.ema_mem - c)
    for i in range(n):
        p.record(sample(inv=i + 1, mem=c))
    assert abs(p.ema_mem - c) <= (1 - alpha) ** n * start_err + 1e-9


class TestSerialization:
    def test_round_trip(self):
        p = ResourceProfile(alpha=0.5, beta=0.9, window=100)
        for i in range(10):
            p.record(sample(inv=i, mem=float(i), util=0.3))
        q = ResourceProfile.from_json(p.to_json())
        assert q.samples == p.samples
        assert q.ema_mem == p.ema_mem
        assert q.beta == p.beta
