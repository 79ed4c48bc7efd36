"""Abrupt and cyclic arrival-rate schedules, sampled once per virtual second."""

import bisect
from dataclasses import dataclass

import numpy as np

ABRUPT = "abrupt"
CYCLIC = "cyclic"

POINT_B_FACTOR = 1.2

# (time as a fraction of the run, rate as a fraction of point A).
# A repeated time is a jump. Gradual rise, gradual fall, step up, step down.
ABRUPT_KNOTS = (
    (0.00, 0.30),
    (0.20, 1.00),
    (0.30, 1.00),
    (0.50, 0.30),
    (0.60, 0.30),
    (0.60, 1.00),
    (0.75, 1.00),
    (0.75, 0.30),
    (1.00, 0.30),
)

# One cycle (time as a fraction of the cycle): climb to point A, a short
# excursion to point B, back down to the base level.
CYCLIC_KNOTS = (
    (0.00, 0.30),
    (0.40, 1.00),
    (0.45, 1.00),
    (0.50, POINT_B_FACTOR),
    (0.55, 1.00),
    (0.60, 1.00),
    (1.00, 0.30),
)


@dataclass
class WorkloadPattern:
    kind: str = ABRUPT
    point_a: float = 100.0
    duration: int = 3600
    cycles: int = 3
    knots: tuple = None
    jitter: float = 0.0

    def __post_init__(self):
        if self.kind not in (ABRUPT, CYCLIC):
            raise ValueError("unknown workload kind %r" % self.kind)
        if self.knots is None:
            self.knots = ABRUPT_KNOTS if self.kind == ABRUPT else CYCLIC_KNOTS
        if self.point_a < 0 or self.duration < 0:
            raise ValueError("point_a and duration must be non-negative")
        if self.kind == CYCLIC and self.cycles < 1:
            raise ValueError("cycles must be >= 1")

    @property
    def point_b(self):
        return POINT_B_FACTOR * self.point_a

    @property
    def peak(self):
        return max(level for _, level in self.knots) * self.point_a

    @property
    def period(self):
        return self.duration / self.cycles if self.kind == CYCLIC else self.duration

    def peak_times(self):
        """Virtual times at which the schedule reaches its peak rate."""
        top = max(level for _, level in self.knots)
        fracs = [f for f, level in self.knots if level == top]
        starts = range(self.cycles) if self.kind == CYCLIC else [0]
        return [c * self.period + f * self.period for c in starts for f in fracs]


def _level(knots, x):
    times = [t for t, _ in knots]
    i = bisect.bisect_right(times, x) - 1
    if i < 0:
        return knots[0][1]
    if i >= len(knots) - 1:
        return knots[-1][1]
    t0, v0 = knots[i]
    t1, v1 = knots[i + 1]
    if t1 == t0:
        return v1
    return v0 + (v1 - v0) * (x - t0) / (t1 - t0)


def generate_workload(pattern, seed=0):
    """Rate (requests/second) at each integer virtual second of the run.

    ``jitter`` adds seeded multiplicative noise, clipped so the series never
    exceeds the schedule's peak.
    """
    n = int(pattern.duration)
    if n <= 0:
        return np.zeros(0)
    period = pattern.period
    t = np.arange(n, dtype=float)
    phase = (t % period) / period if pattern.kind == CYCLIC else t / period
    levels = np.array([_level(pattern.knots, x) for x in phase])
    rates = levels * pattern.point_a
    if pattern.jitter:
        rng = np.random.default_rng(seed)
        noise = rng.normal(1.0, pattern.jitter, size=n)
        rates = np.clip(rates * noise, 0.0, pattern.peak)
    return rates


def arrivals_per_second(rates):
    """Open-loop arrivals with deterministic spacing (cumulative rounding)."""
    cum = np.floor(np.cumsum(np.asarray(rates, dtype=float)) + 1e-9).astype(np.int64)
    return np.diff(np.concatenate(([0], cum)))
