"""Per-component execution history with decaying weights and EMA summaries.

Each component accumulates one UsageSample per finished invocation. Profiles
keep a bounded ring of recent samples (geometrically decaying weights, newest
heaviest) plus exponential moving averages of the peak demands, mean CPU
utilization, and execution time. The sizing policy consumes the weighted
sample set; the scheduler consumes the EMAs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field


DEFAULT_ALPHA = 0.5
DEFAULT_BETA = 0.98
DEFAULT_WINDOW = 1000


class EmptyHistory(ValueError):
    """Raised when a weighted view is requested from a profile with no samples."""


@dataclass(frozen=True)
class UsageSample:
    """Observed resource usage of one component execution."""

    invocation_id: int
    peak_cpu: float  # vCPUs
    peak_mem: float  # bytes
    exec_time: float  # seconds
    mean_cpu_util: float  # fraction of allocated vCPU-time actually used

    def __post_init__(self) -> None:
        if self.peak_cpu < 0 or self.peak_mem < 0:
            raise ValueError("peaks must be nonnegative")
        if self.exec_time <= 0:
            raise ValueError("exec_time must be positive")
        if not 0.0 <= self.mean_cpu_util <= 1.0:
            raise ValueError("mean_cpu_util must be in [0, 1]")


@dataclass
class ResourceProfile:
    """Decaying history of a single component's executions."""

    alpha: float = DEFAULT_ALPHA
    beta: float = DEFAULT_BETA
    window: int = DEFAULT_WINDOW
    samples: list[UsageSample] = field(default_factory=list)
    ema_cpu: float | None = None
    ema_mem: float | None = None
    ema_util: float | None = None
    ema_exec: float | None = None

    def __len__(self) -> int:
        return len(self.samples)

    def record(self, s: UsageSample) -> None:
        """Append a sample, evicting beyond the window, and fold it into the EMAs.

        The first sample sets each EMA directly; afterwards
        ``ema' = alpha * sample + (1 - alpha) * ema``.
        """
        self.samples.append(s)
        if len(self.samples) > self.window:
            del self.samples[0]
        if self.ema_mem is None:
            self.ema_cpu = s.peak_cpu
            self.ema_mem = s.peak_mem
            self.ema_util = s.mean_cpu_util
            self.ema_exec = s.exec_time
        else:
            a = self.alpha
            self.ema_cpu = a * s.peak_cpu + (1 - a) * self.ema_cpu
            self.ema_mem = a * s.peak_mem + (1 - a) * self.ema_mem
            self.ema_util = a * s.mean_cpu_util + (1 - a) * self.ema_util
            self.ema_exec = a * s.exec_time + (1 - a) * self.ema_exec

    def weighted_peaks(self) -> list[tuple[float, float, float]]:
        """(peak_mem, exec_time, weight) per retained sample, in insertion order.

        Weights decay geometrically with age (newest heaviest) and are
        normalized to sum to 1.
        """
        if not self.samples:
            raise EmptyHistory("profile has no samples")
        n = len(self.samples)
        raw = [self.beta ** (n - 1 - i) for i in range(n)]
        total = sum(raw)
        return [
            (s.peak_mem, s.exec_time, w / total) for s, w in zip(self.samples, raw)
        ]

    def max_peak_mem(self) -> float:
        if not self.samples:
            raise EmptyHistory("profile has no samples")
        return max(s.peak_mem for s in self.samples)

    def to_json(self) -> str:
        return json.dumps(
            {
                "alpha": self.alpha,
                "beta": self.beta,
                "window": self.window,
                "samples": [
                    [s.invocation_id, s.peak_cpu, s.peak_mem, s.exec_time, s.mean_cpu_util]
                    for s in self.samples
                ],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "ResourceProfile":
        doc = json.loads(text)
        profile = cls(alpha=doc["alpha"], beta=doc["beta"], window=doc["window"])
        for inv, cpu, mem, exec_time, util in doc["samples"]:
            profile.record(UsageSample(inv, cpu, mem, exec_time, util))
        return profile
