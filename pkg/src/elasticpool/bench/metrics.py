"""
Elasticity metrics: minimum required capacity, agility, provisioning interval.

Agility over N sub-intervals is ``(1/N) * (sum(excess) + sum(shortage))`` where
excess and shortage are the positive parts of ``cap_prov - req_min`` and
``req_min - cap_prov``. It is computed with exact rationals so results can be
compared without tolerances.
"""

import math
from dataclasses import dataclass
from fractions import Fraction


@dataclass(frozen=True)
class QoSModel:
    per_worker_capacity: float

    def __post_init__(self):
        if not self.per_worker_capacity > 0:
            raise ValueError("per_worker_capacity must be positive")


def req_min(rate, qos, floor=0):
    """Workers needed to serve ``rate`` at QoS: ``ceil(rate / c)``, at least ``floor``."""
    if rate < 0:
        raise ValueError("rate must be non-negative")
    q = rate / qos.per_worker_capacity
    r = round(q)
    n = r if abs(q - r) < 1e-9 else math.ceil(q)
    return max(int(n), floor)


@dataclass(frozen=True)
class AgilitySample:
    index: int
    req_min: int
    cap_prov: int

    @property
    def excess(self):
        return max(0, self.cap_prov - self.req_min)

    @property
    def shortage(self):
        return max(0, self.req_min - self.cap_prov)


@dataclass(frozen=True)
class AgilityReport:
    samples: tuple
    agility: Fraction
    values: tuple  # weighted excess + shortage per sample
    excess_weight: Fraction = Fraction(1)
    shortage_weight: Fraction = Fraction(1)

    @property
    def n(self):
        return len(self.samples)

    @property
    def mean(self):
        return self.agility

    @property
    def zero_count(self):
        return sum(1 for v in self.values if v == 0)

    @property
    def zero_fraction(self):
        return Fraction(self.zero_count, self.n)

    @property
    def total_excess(self):
        return sum(s.excess for s in self.samples)

    @property
    def total_shortage(self):
        return sum(s.shortage for s in self.samples)


def make_samples(req_mins, cap_provs):
    if len(req_mins) != len(cap_provs):
        raise ValueError("req_min and cap_prov series differ in length")
    return [AgilitySample(i, int(r), int(c))
            for i, (r, c) in enumerate(zip(req_mins, cap_provs))]


def agility(samples, excess_weight=1, shortage_weight=1):
    samples = tuple(samples)
    if not samples:
        raise ValueError("agility needs at least one sample")
    we = Fraction(excess_weight)
    ws = Fraction(shortage_weight)
    values = tuple(we * s.excess + ws * s.shortage for s in samples)
    return AgilityReport(samples, sum(values, Fraction(0)) / len(samples),
                         values, we, ws)


@dataclass(frozen=True)
class ProvisioningRecord:
    uid: int
    request_initiated_at: float
    serving_at: float = None
    first_request_served_at: float = None

    @property
    def open(self):
        return self.first_request_served_at is None

    @property
    def interval(self):
        if self.open:
            return None
        return self.first_request_served_at - self.request_initiated_at


@dataclass(frozen=True)
class ProvisioningSummary:
    records: tuple

    @property
    def closed(self):
        return [r for r in self.records if not r.open]

    @property
    def open_records(self):
        return [r for r in self.records if r.open]

    @property
    def max(self):
        c = self.closed
        return max(r.interval for r in c) if c else None

    @property
    def mean(self):
        c = self.closed
        return sum(r.interval for r in c) / len(c) if c else None


def measure_provisioning(events, pool=None):
    """One record per worker added by scaling (initial members are excluded).

    ``events`` is a sequence of event records (dicts with ``event``, ``uid``,
    ``t`` and optionally ``pool``); ``pool`` filters by pool name.
    """
    started = {}
    order = []
    serving = {}
    first = {}
    for rec in events:
        if pool is not None and rec.get("pool") != pool:
            continue
        ev = rec["event"]
        uid = rec.get("uid")
        if ev == "spawn" and rec.get("kind", "scale") == "scale":
            started[uid] = rec["t"]
            order.append(uid)
        elif ev == "serving" and uid in started:
            serving.setdefault(uid, rec["t"])
        elif ev == "first_service" and uid in started:
            first.setdefault(uid, rec["t"])
    return ProvisioningSummary(tuple(
        ProvisioningRecord(uid, started[uid], serving.get(uid), first.get(uid))
        for uid in order))
