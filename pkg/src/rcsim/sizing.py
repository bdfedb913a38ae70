"""Allocation sizing policies.

Three policy kernels live here:

* ``solve_sizing`` picks the (initial, incremental) allocation sizes for a
  component from its weighted usage history, minimizing initial footprint
  plus weighted scale-up cost subject to a bound on the wasted
  (over-provisioned) byte-time ratio.
* ``select_parallel_vcpus`` shrinks the vCPU grant for a parallel compute
  component according to its historical mean CPU utilization.
* ``solve_aggregation`` chooses which communicating component pairs to merge
  into (or evict from) a shared pool, as a zero-one program over candidate
  pairs.

Each optimizer ships with an independent brute-force oracle
(``sizing_oracle``, ``aggregation_oracle``) used by the test suite; the
production solvers must agree with the oracles exactly on small instances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .history import ResourceProfile

DEFAULT_GRANULE = 64_000_000.0  # 64 MB physical-chunk granule
CHUNK_CAP = 1_000_000_000.0  # 1 GB largest physical memory chunk


class Infeasible(ValueError):
    """No lattice point within the search caps satisfies the constraints."""


@dataclass(frozen=True)
class SizingParams:
    """Chosen initial and incremental allocation sizes for one dimension."""

    init: float
    step: float
    dimension: str = "memory"  # "memory" | "cpu"

    def __post_init__(self) -> None:
        if self.init < 0 or self.step <= 0:
            raise ValueError("init must be >= 0 and step > 0")


@dataclass(frozen=True)
class SizingProblem:
    """History and knobs for one (init, step) optimization.

    history entries are (peak demand, exec time, weight) with weights summing
    to 1; cost_factor scales the per-increment cost in the objective; thres
    bounds the tolerated waste ratio; granule is the allocation lattice unit;
    search_caps bounds (max init, max step) in the same unit as the demands.
    """

    history: tuple[tuple[float, float, float], ...]
    cost_factor: float = 1.0
    thres: float = 0.2
    granule: float = DEFAULT_GRANULE
    search_caps: Optional[tuple[float, float]] = None

    def __post_init__(self) -> None:
        if not self.history:
            raise ValueError("history must be nonempty")
        if self.cost_factor <= 0 or self.granule <= 0:
            raise ValueError("cost_factor and granule must be positive")
        if not 0.0 < self.thres <= 1.0:
            raise ValueError("thres must be in (0, 1]")

    def caps(self) -> tuple[float, float]:
        if self.search_caps is not None:
            return self.search_caps
        top = max(h for h, _, _ in self.history)
        cap = (math.floor(top / self.granule) + 1) * self.granule
        return (cap, cap)


def increments_to_cover(demand: float, init: float, step: float) -> int:
    """Number of step increments so that init + k*step strictly exceeds demand."""
    if init > demand:
        return 0
    return int(math.floor((demand - init) / step)) + 1


def _waste_ratio(init: float, hs: Sequence[float], ets: Sequence[float]) -> float:
    num = sum(max(init - h, 0.0) * et for h, et in zip(hs, ets))
    den = sum(h * et for h, et in zip(hs, ets))
    if den == 0.0:
        return 0.0 if num == 0.0 else math.inf
    return num / den


def sizing_oracle(p: SizingProblem) -> tuple[SizingParams, float]:
    """Exhaustive scan of the granule lattice; returns (params, objective).

    Reference implementation for tests: plain loops over every (init, step)
    candidate, ties broken by smaller init then smaller step.
    """
    g = p.granule
    max_init, max_step = p.caps()
    inits = [i * g for i in range(int(max_init // g) + 1)]
    steps = [i * g for i in range(1, int(max_step // g) + 1)]
    if not steps:
        raise Infeasible("no step candidate within caps")

    hs = [h for h, _, _ in p.history]
    ets = [et for _, et, _ in p.history]
    ws = [w for _, _, w in p.history]

    best: tuple[float, float, float] | None = None  # (objective, init, step)
    for init in inits:
        if _waste_ratio(init, hs, ets) >= p.thres:
            continue
        for step in steps:
            cost = 0.0
            for h, w in zip(hs, ws):
                cost += w * step * increments_to_cover(h, init, step)
            obj = init + p.cost_factor * cost
            if best is None or (obj, init, step) < best:
                best = (obj, init, step)
    if best is None:
        raise Infeasible("no feasible (init, step) within caps")
    obj, init, step = best
    return SizingParams(init=init, step=step), obj


def solve_sizing(p: SizingProblem) -> SizingParams:
    """Optimal (init, step) on the granule lattice within the search caps.

    Minimizes ``init + cost_factor * sum_h weight_h * step * k_h`` where
    ``k_h`` is the increment count needed to strictly cover demand ``h``,
    subject to the waste-ratio bound
    ``sum_h max(init - h, 0) * exec_h / sum_h h * exec_h < thres``.
    Ties resolve to the smaller init, then the smaller step.

    Lattices larger than 64x64 are coarsened to a multiple of the granule
    before solving; exactness versus the oracle is guaranteed up to 64x64.

    Raises Infeasible when no lattice point satisfies the constraints; the
    caller is expected to fall back to peak provisioning
    (init = max demand rounded up, step = granule).
    """
    g = p.granule
    max_init, max_step = p.caps()
    n_init = int(max_init // g) + 1
    n_step = int(max_step // g)
    if n_step < 1:
        raise Infeasible("no step candidate within caps")

    # Coarsen lattices beyond 64x64 granules; results stay granule multiples.
    factor = max(1, math.ceil(max(n_init - 1, n_step) / 64))
    g = g * factor
    n_init = int(max_init // g) + 1
    n_step = int(max_step // g)
    if n_step < 1:
        n_step = 1

    inits = np.arange(n_init, dtype=np.float64) * g  # (I,)
    steps = np.arange(1, n_step + 1, dtype=np.float64) * g  # (S,)
    h = np.array([x for x, _, _ in p.history], dtype=np.float64)
    et = np.array([x for _, x, _ in p.history], dtype=np.float64)
    w = np.array([x for _, _, x in p.history], dtype=np.float64)

    den = float(np.dot(h, et))
    waste_num = np.maximum(inits[:, None] - h[None, :], 0.0) @ et  # (I,)
    if den == 0.0:
        feasible_init = waste_num == 0.0
    else:
        feasible_init = waste_num / den < p.thres

    if not feasible_init.any():
        raise Infeasible("no feasible (init, step) within caps")

    # k[i, s, j]: increments for history point j under candidate (i, s).
    deficit = h[None, None, :] - inits[:, None, None]  # (I, 1, H)
    k = np.floor(deficit / steps[None, :, None]) + 1.0
    k = np.where(deficit < 0.0, 0.0, k)
    cost = (k * w[None, None, :]).sum(axis=2) * steps[None, :]  # (I, S)
    obj = inits[:, None] + p.cost_factor * cost
    obj = np.where(feasible_init[:, None], obj, np.inf)

    # Vectorized sums carry rounding noise that can misorder exact ties;
    # re-rank the near-minimal candidates with the scalar evaluation so the
    # smaller-init-then-smaller-step tie-break holds exactly.
    lo = float(obj.min())
    near = obj <= lo + max(abs(lo) * 1e-12, 1e-9)
    hist = list(p.history)
    best: tuple[float, float, float] | None = None
    for i, s in np.argwhere(near):
        init, step = float(inits[i]), float(steps[s])
        acc = 0.0
        for hv, _, wv in hist:
            acc += wv * step * increments_to_cover(hv, init, step)
        cand = (init + p.cost_factor * acc, init, step)
        if best is None or cand < best:
            best = cand
    assert best is not None
    return SizingParams(init=best[1], step=best[2])


def peak_provisioning(p: SizingProblem) -> SizingParams:
    """Fallback plan: cover the historical peak upfront, grow by one granule."""
    top = max(h for h, _, _ in p.history)
    init = math.ceil(top / p.granule) * p.granule
    return SizingParams(init=float(init), step=float(p.granule))


def select_parallel_vcpus(profile: ResourceProfile, requested_parallelism: int) -> int:
    """vCPUs to grant a compute component with the requested parallelism.

    Scales the request by the historical mean CPU utilization (a component
    that kept 10 vCPUs half busy gets 5 next time), clamped to [1, request].
    With no history the full request is granted.
    """
    if requested_parallelism < 1:
        raise ValueError("requested_parallelism must be >= 1")
    if profile is None or profile.ema_util is None:
        return requested_parallelism
    vcpus = math.ceil(requested_parallelism * profile.ema_util)
    return max(1, min(requested_parallelism, vcpus))


@dataclass(frozen=True)
class AggregationCandidate:
    pair_id: str
    bandwidth: float  # bytes/s of communication kept local if aggregated
    cpu_need: float
    mem_need: float


@dataclass(frozen=True)
class AggregationProblem:
    """Zero-one selection over communicating component pairs.

    Without min_reclaim: pick pairs to aggregate, maximizing the bandwidth
    kept local within the pool capacities. With min_reclaim = (cpu, mem):
    pick pairs to disaggregate, minimizing evicted bandwidth while freeing at
    least the requested amounts and still fitting the destination pools.
    """

    candidates: tuple[AggregationCandidate, ...]
    pool_cpu: float
    pool_mem: float
    min_reclaim: Optional[tuple[float, float]] = None

    def __post_init__(self) -> None:
        if self.pool_cpu < 0 or self.pool_mem < 0:
            raise ValueError("pool capacities must be nonnegative")
        if any(c.bandwidth < 0 for c in self.candidates):
            raise ValueError("bandwidths must be nonnegative")


RELAX_FACTOR = 0.8
RELAX_ROUNDS = 10

_EXACT_LIMIT = 18  # exhaustive enumeration cutoff; greedy beyond


def _reclaim_score(cpu: float, mem: float, target: tuple[float, float]) -> float:
    rc, rm = target
    score = 0.0
    if rc > 0:
        score += cpu / rc
    if rm > 0:
        score += mem / rm
    return score


def aggregation_oracle(p: AggregationProblem) -> tuple[frozenset[str], float]:
    """Enumerate all 2^n subsets; returns (selected pair ids, objective).

    Objective is the total bandwidth of the selection (maximized when
    aggregating, minimized when disaggregating). Intended for tests with
    small candidate counts.
    """
    n = len(p.candidates)
    bw = [c.bandwidth for c in p.candidates]
    cpu = [c.cpu_need for c in p.candidates]
    mem = [c.mem_need for c in p.candidates]

    def scan(feasible) -> tuple[int, float] | None:
        # Gray-code walk keeps per-subset updates O(1).
        best_mask, best_val = None, None
        mask = 0
        cur_bw = cur_cpu = cur_mem = 0.0
        minimize = p.min_reclaim is not None
        for i in range(1 << n):
            if i > 0:
                bit = (i & -i).bit_length() - 1
                if mask & (1 << bit):
                    mask &= ~(1 << bit)
                    cur_bw -= bw[bit]
                    cur_cpu -= cpu[bit]
                    cur_mem -= mem[bit]
                else:
                    mask |= 1 << bit
                    cur_bw += bw[bit]
                    cur_cpu += cpu[bit]
                    cur_mem += mem[bit]
            if not feasible(cur_cpu, cur_mem):
                continue
            if (
                best_val is None
                or (minimize and cur_bw < best_val)
                or (not minimize and cur_bw > best_val)
            ):
                best_mask, best_val = mask, cur_bw
        if best_val is None:
            return None
        return best_mask, best_val

    if p.min_reclaim is None:
        found = scan(lambda c, m: c <= p.pool_cpu and m <= p.pool_mem)
        assert found is not None  # empty set always feasible
        mask, val = found
    else:
        rc, rm = p.min_reclaim
        found = None
        for _ in range(RELAX_ROUNDS + 1):
            found = scan(
                lambda c, m: c <= p.pool_cpu
                and m <= p.pool_mem
                and c >= rc
                and m >= rm
            )
            if found is not None:
                break
            rc *= RELAX_FACTOR
            rm *= RELAX_FACTOR
        if found is None:
            # Best effort: maximize reclaim within the pools, cheapest first.
            best = None
            mask = 0
            cur_bw = cur_cpu = cur_mem = 0.0
            for i in range(1 << n):
                if i > 0:
                    bit = (i & -i).bit_length() - 1
                    if mask & (1 << bit):
                        mask &= ~(1 << bit)
                        cur_bw -= bw[bit]
                        cur_cpu -= cpu[bit]
                        cur_mem -= mem[bit]
                    else:
                        mask |= 1 << bit
                        cur_bw += bw[bit]
                        cur_cpu += cpu[bit]
                        cur_mem += mem[bit]
                if cur_cpu > p.pool_cpu or cur_mem > p.pool_mem:
                    continue
                key = (-_reclaim_score(cur_cpu, cur_mem, (rc, rm)), cur_bw)
                if best is None or key < best[0]:
                    best = (key, mask, cur_bw)
            assert best is not None
            _, mask, val = best
        else:
            mask, val = found

    ids = frozenset(
        p.candidates[i].pair_id for i in range(n) if mask & (1 << i)
    )
    # The gray-code walk accumulates rounding drift; re-evaluate the chosen
    # subset freshly in ascending index order.
    fresh = sum(bw[i] for i in range(n) if mask & (1 << i))
    return ids, fresh


def solve_aggregation(p: AggregationProblem) -> frozenset[str]:
    """Select the pair ids to aggregate (or disaggregate; see the problem doc).

    Exact (vectorized subset enumeration) up to a bounded candidate count,
    greedy by bandwidth density beyond it. Disaggregation targets that cannot
    be met are relaxed by 20% per round up to 10 rounds; if still infeasible
    the maximal-reclaim selection within the pool capacities is returned.
    """
    n = len(p.candidates)
    if n == 0:
        return frozenset()
    if n <= _EXACT_LIMIT:
        return _solve_exact(p)
    return _solve_greedy(p)


def _subset_table(p: AggregationProblem) -> tuple[np.ndarray, ...]:
    n = len(p.candidates)
    masks = np.arange(1 << n, dtype=np.uint32)
    bits = ((masks[:, None] >> np.arange(n)[None, :]) & 1).astype(np.float64)
    bw = bits @ np.array([c.bandwidth for c in p.candidates])
    cpu = bits @ np.array([c.cpu_need for c in p.candidates])
    mem = bits @ np.array([c.mem_need for c in p.candidates])
    return masks, bw, cpu, mem


def _ids_for(p: AggregationProblem, mask: int) -> frozenset[str]:
    return frozenset(
        c.pair_id for i, c in enumerate(p.candidates) if mask & (1 << i)
    )


def _solve_exact(p: AggregationProblem) -> frozenset[str]:
    masks, bw, cpu, mem = _subset_table(p)
    fits_pool = (cpu <= p.pool_cpu) & (mem <= p.pool_mem)

    if p.min_reclaim is None:
        score = np.where(fits_pool, bw, -np.inf)
        return _ids_for(p, int(masks[int(np.argmax(score))]))

    rc, rm = p.min_reclaim
    for _ in range(RELAX_ROUNDS + 1):
        ok = fits_pool & (cpu >= rc) & (mem >= rm)
        if ok.any():
            score = np.where(ok, bw, np.inf)
            return _ids_for(p, int(masks[int(np.argmin(score))]))
        rc *= RELAX_FACTOR
        rm *= RELAX_FACTOR

    reclaim = np.zeros(len(masks))
    if rc > 0:
        reclaim += cpu / rc
    if rm > 0:
        reclaim += mem / rm
    order = np.where(fits_pool, reclaim, -np.inf)
    best = order.max()
    tied = fits_pool & (order == best)
    score = np.where(tied, bw, np.inf)
    return _ids_for(p, int(masks[int(np.argmin(score))]))


def _solve_greedy(p: AggregationProblem) -> frozenset[str]:
    idx = range(len(p.candidates))
    if p.min_reclaim is None:
        # Densest bandwidth per normalized footprint first.
        def density(i: int) -> float:
            c = p.candidates[i]
            foot = 0.0
            if p.pool_cpu > 0:
                foot += c.cpu_need / p.pool_cpu
            if p.pool_mem > 0:
                foot += c.mem_need / p.pool_mem
            return c.bandwidth / foot if foot > 0 else math.inf

        chosen: list[int] = []
        cpu = mem = 0.0
        for i in sorted(idx, key=lambda i: (-density(i), i)):
            c = p.candidates[i]
            if cpu + c.cpu_need <= p.pool_cpu and mem + c.mem_need <= p.pool_mem:
                chosen.append(i)
                cpu += c.cpu_need
                mem += c.mem_need
        return frozenset(p.candidates[i].pair_id for i in chosen)

    rc, rm = p.min_reclaim
    for _ in range(RELAX_ROUNDS + 1):
        chosen = []
        cpu = mem = 0.0
        for i in sorted(idx, key=lambda i: (p.candidates[i].bandwidth, i)):
            if cpu >= rc and mem >= rm:
                break
            c = p.candidates[i]
            if cpu + c.cpu_need <= p.pool_cpu and mem + c.mem_need <= p.pool_mem:
                chosen.append(i)
                cpu += c.cpu_need
                mem += c.mem_need
        if cpu >= rc and mem >= rm:
            return frozenset(p.candidates[i].pair_id for i in chosen)
        rc *= RELAX_FACTOR
        rm *= RELAX_FACTOR

    chosen = []
    cpu = mem = 0.0
    for i in sorted(idx, key=lambda i: (-_reclaim_score(
            p.candidates[i].cpu_need, p.candidates[i].mem_need, (rc, rm)), i)):
        c = p.candidates[i]
        if cpu + c.cpu_need <= p.pool_cpu and mem + c.mem_need <= p.pool_mem:
            chosen.append(i)
            cpu += c.cpu_need
            mem += c.mem_need
    return frozenset(p.candidates[i].pair_id for i in chosen)
