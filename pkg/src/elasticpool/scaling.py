"""
Scaling policies, evaluated once per burst interval.

Four policy kinds are supported:

* :class:`ImplicitCpu` - average CPU above 0.90 adds one worker, below 0.60
  removes one.
* :class:`CoarseThreshold` - CPU and/or memory thresholds, OR-combined.
* :class:`FineGrained` - every serving worker is polled for a signed
  recommendation; the pool delta is the mean rounded half away from zero.
  Installing it disables the utilization thresholds for that pool.
* :class:`ExternalDecider` - an application-level callback returns the
  desired size of each pool it watches.
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction

from .pool import NO_CAPACITY, SERVING

logger = logging.getLogger(__name__)

REASON_CPU = "cpu"
REASON_MEM = "mem"
REASON_ADVISOR = "advisor"
REASON_DECIDER = "decider"
REASON_NONE = "none"
REASON_REPAIR = "repair"


@dataclass
class ImplicitCpu:
    incr_threshold: float = 0.90
    decr_threshold: float = 0.60
    step: int = 1
    burst_interval: float = None


@dataclass
class CoarseThreshold:
    cpu_incr: float = None
    cpu_decr: float = None
    mem_incr: float = None
    mem_decr: float = None
    step: int = 1
    burst_interval: float = None

    def __post_init__(self):
        if all(v is None for v in (self.cpu_incr, self.cpu_decr,
                                   self.mem_incr, self.mem_decr)):
            raise ValueError("CoarseThreshold needs at least one threshold")

    # mirrors of the setter-style API
    def set_cpu_incr_threshold(self, value):
        self.cpu_incr = value

    def set_cpu_decr_threshold(self, value):
        self.cpu_decr = value

    def set_mem_incr_threshold(self, value):
        self.mem_incr = value

    def set_mem_decr_threshold(self, value):
        self.mem_decr = value


def _default_advisor(worker):
    return worker.app.change_pool_size()


@dataclass
class FineGrained:
    advisor: object = _default_advisor
    burst_interval: float = None


@dataclass
class ExternalDecider:
    decide: object
    pools: tuple = ()


@dataclass
class PoolMetrics:
    live_size: int
    cpu: dict = field(default_factory=dict)
    mem: dict = field(default_factory=dict)
    advisor_values: dict = None

    @property
    def avg_cpu(self):
        return sum(self.cpu.values()) / len(self.cpu) if self.cpu else 0.0

    @property
    def avg_mem(self):
        return sum(self.mem.values()) / len(self.mem) if self.mem else 0.0


@dataclass(frozen=True)
class PoolDelta:
    delta: int
    reason: str = REASON_NONE


def uniform_metrics(live_size, cpu, mem=0.0):
    """Metrics where every serving worker reports the same gauges."""
    uids = range(1, live_size + 1)
    return PoolMetrics(live_size, {u: cpu for u in uids}, {u: mem for u in uids})


def collect_metrics(pool):
    pool.refresh_gauges()
    serving = pool.serving()
    return PoolMetrics(
        live_size=pool.live_size(),
        cpu={w.uid: w.cpu_util for w in serving},
        mem={w.uid: w.mem_util for w in serving},
    )


def evaluate_implicit(metrics, policy=None):
    policy = policy or ImplicitCpu()
    avg = metrics.avg_cpu
    if avg > policy.incr_threshold:
        return PoolDelta(policy.step, REASON_CPU)
    if avg < policy.decr_threshold:
        return PoolDelta(-policy.step, REASON_CPU)
    return PoolDelta(0, REASON_NONE)


def evaluate_coarse(metrics, policy):
    cpu, mem = metrics.avg_cpu, metrics.avg_mem
    if policy.cpu_incr is not None and cpu > policy.cpu_incr:
        return PoolDelta(policy.step, REASON_CPU)
    if policy.mem_incr is not None and mem > policy.mem_incr:
        return PoolDelta(policy.step, REASON_MEM)
    if policy.cpu_decr is not None and cpu < policy.cpu_decr:
        return PoolDelta(-policy.step, REASON_CPU)
    if policy.mem_decr is not None and mem < policy.mem_decr:
        return PoolDelta(-policy.step, REASON_MEM)
    return PoolDelta(0, REASON_NONE)


def rounded_mean(values):
    """Mean of integers rounded half away from zero (exact arithmetic)."""
    values = list(values)
    if not values:
        return 0
    q = Fraction(sum(values), len(values))
    mag = abs(q) + Fraction(1, 2)
    r = mag.numerator // mag.denominator
    return r if q >= 0 else -r


def poll_advisors(pool, policy):
    values = {}
    for w in pool.serving():
        try:
            values[w.uid] = int(policy.advisor(w))
        except Exception:
            logger.warning("advisor of %s uid=%d failed; counting 0",
                           pool.name, w.uid, exc_info=True)
            values[w.uid] = 0
    return values


def evaluate_fine_grained(pool, policy=None):
    policy = policy or pool.config.policy
    values = poll_advisors(pool, policy)
    d = rounded_mean(values.values())
    return PoolDelta(d, REASON_ADVISOR if d else REASON_NONE)


def evaluate(pool, policy=None, metrics=None):
    """Dispatch on the policy kind. Fine-grained pools never look at gauges.

    A pool that declares no policy gets the implicit CPU policy.
    """
    policy = policy if policy is not None else pool.config.policy
    if policy is None:
        policy = ImplicitCpu()
    if isinstance(policy, FineGrained):
        return evaluate_fine_grained(pool, policy)
    metrics = metrics if metrics is not None else collect_metrics(pool)
    if isinstance(policy, ImplicitCpu):
        return evaluate_implicit(metrics, policy)
    if isinstance(policy, CoarseThreshold):
        return evaluate_coarse(metrics, policy)
    raise TypeError("unsupported policy %r" % (policy,))


def clamp_delta(pool, delta):
    cfg = pool.config
    size = pool.live_size()
    target = min(max(size + delta, cfg.min_size), cfg.max_size)
    return target - size


def evaluate_decider(decider, pools):
    """Desired-minus-current per watched pool, each clamped to the pool bounds.

    ``pools`` maps name to pool. A failing decider yields no changes.
    """
    names = list(decider.pools) if decider.pools else list(pools)
    observed = {n: collect_metrics(pools[n]) for n in names}
    try:
        desired = decider.decide(observed)
    except Exception:
        logger.warning("decider failed; no change this interval", exc_info=True)
        return {}
    out = {}
    for name, want in desired.items():
        if name not in pools:
            continue
        pool = pools[name]
        out[name] = clamp_delta(pool, int(want) - pool.live_size())
    return out


def _victims(pool):
    serving = [w for w in pool.serving()]
    # youngest first; the sentinel only when nothing else is left
    others = [w for w in serving if w.uid != pool.sentinel]
    ordered = sorted(others, key=lambda w: -w.uid)
    ordered += [w for w in serving if w.uid == pool.sentinel]
    return ordered


def apply_delta(pool, delta):
    """Carry out a (clamped) delta; returns the size change achieved."""
    delta = clamp_delta(pool, delta)
    applied = 0
    if delta > 0:
        for _ in range(delta):
            if pool.add_worker() is NO_CAPACITY:
                break
            applied += 1
    elif delta < 0:
        for w in _victims(pool)[:-delta]:
            if pool.live_size() <= pool.config.min_size:
                break
            if w.state == SERVING:
                pool.remove_worker(w.uid)
                applied -= 1
    return applied


class Autoscaler:
    """Runs one evaluation per pool per burst boundary on the virtual clock."""

    def __init__(self, pools, decider=None):
        if not isinstance(pools, dict):
            pools = {p.name: p for p in pools}
        self.pools = pools
        self.decider = decider
        self.decisions = []
        self._intervals = {}
        self._pending_interval = {}
        self._timers = {}

    def burst_interval(self, name):
        return self._intervals[name]

    def start(self):
        for name, pool in self.pools.items():
            policy = pool.config.policy
            interval = getattr(policy, "burst_interval", None) or pool.config.burst_interval
            self._intervals[name] = interval
            self._schedule(name)
        return self

    def stop(self):
        for t in self._timers.values():
            t.cancel()
        self._timers.clear()

    def set_burst_interval(self, name, value):
        """Takes effect after the boundary that is already scheduled."""
        if value <= 0:
            raise ValueError("burst interval must be positive")
        self._pending_interval[name] = value

    def _schedule(self, name):
        pool = self.pools[name]
        self._timers[name] = pool.clock.call_later(
            self._intervals[name], lambda: self._boundary(name))

    def _boundary(self, name):
        self.evaluate_pool(name)
        if name in self._pending_interval:
            self._intervals[name] = self._pending_interval.pop(name)
        self._schedule(name)

    def _watched_by_decider(self, name):
        if self.decider is None:
            return False
        return not self.decider.pools or name in self.decider.pools

    def evaluate_pool(self, name):
        pool = self.pools[name]
        if self._watched_by_decider(name):
            deltas = evaluate_decider(self.decider, {name: pool, **self.pools})
            decision = PoolDelta(deltas.get(name, 0), REASON_DECIDER)
        else:
            decision = evaluate(pool)
        delta = decision.delta
        reason = decision.reason
        if pool.live_size() < pool.config.min_size and delta <= 0:
            delta, reason = 0, REASON_REPAIR
        applied = apply_delta(pool, delta)
        now = pool.clock.now()
        pool.events.emit("scale", pool=name, delta=decision.delta,
                         applied=applied, reason=reason, t=now)
        self.decisions.append((now, name, decision.delta, applied, reason))
        pool.reset_windows()
        for w in pool.workers.values():
            reset = getattr(w.app, "reset_window", None)
            if reset is not None:
                reset()
        return applied
