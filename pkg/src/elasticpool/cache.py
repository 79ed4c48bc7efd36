"""
Example elastic application: a distributed cache over the shared store.

Entries live in the state store under ``<namespace>$<key>``. Puts take the
entry's write lock (bounded wait), write, and release; gets never lock. Each
worker keeps lock-acquisition statistics that feed its pool-size advisor.
"""

import math
from dataclasses import dataclass

from .reply import Reply
from .store import ACQUIRED, LockTimeout, StoreKey

CONTENTION_FAILURE_RATE = 0.5
LATENCY_PREDOMINANCE = 0.5
SCALE_UP_STEP = 2
DEMAND_TOLERANCE = 0.05


@dataclass
class CacheMetrics:
    attempts: int = 0
    failures: int = 0
    completed: int = 0
    lock_latency_sum: float = 0.0
    put_latency_sum: float = 0.0

    @property
    def avg_lock_acq_failure(self):
        return self.failures / self.attempts if self.attempts else 0.0

    @property
    def avg_lock_acq_latency(self):
        return self.lock_latency_sum / self.completed if self.completed else 0.0

    @property
    def put_latency(self):
        return self.put_latency_sum / self.completed if self.completed else 0.0


@dataclass(frozen=True)
class MetricsView:
    """Plain numbers, for calling :func:`cache_advisor` without a cache."""

    avg_lock_acq_failure: float = 0.0
    avg_lock_acq_latency: float = 0.0
    put_latency: float = 0.0


def under_contention(metrics):
    if metrics.avg_lock_acq_failure > CONTENTION_FAILURE_RATE:
        return True
    return (metrics.put_latency > 0
            and metrics.avg_lock_acq_latency > LATENCY_PREDOMINANCE * metrics.put_latency)


def cache_advisor(metrics):
    """No growth while writers fight over locks; otherwise grow by two."""
    return 0 if under_contention(metrics) else SCALE_UP_STEP


class ElasticCache:
    """Per-worker cache object.

    ``write_time`` is the virtual time a put spends holding the entry lock;
    with the default 0 an uncontended put completes synchronously.

    When ``qos_capacity`` is set the advisor sizes the pool from the recent
    arrival rate seen by this worker (scaled by the member count read from
    shared state), and the contention guard caps the result at 0.
    """

    def __init__(self, worker, pool, namespace="Cache", write_time=0.0,
                 lock_timeout=1.0, qos_capacity=None, rate_horizon=10.0):
        self.worker = worker
        self.pool = pool
        self.store = pool.store
        self.clock = pool.clock
        self.namespace = namespace
        self.write_time = write_time
        self.lock_timeout = lock_timeout
        self.qos_capacity = qos_capacity
        self.rate_horizon = rate_horizon
        self.metrics = CacheMetrics()
        self._ops = 0

    @classmethod
    def factory(cls, **kwargs):
        return lambda worker, pool: cls(worker, pool, **kwargs)

    def key(self, k):
        return StoreKey(self.namespace, str(k))

    def handle(self, method, args):
        if method == "get":
            return self.cache_get(*args)
        if method == "put":
            return self.cache_put(*args)
        raise AttributeError("cache has no remote method %r" % method)

    def cache_get(self, k):
        return self.store.get_value(self.key(k))

    def cache_put(self, k, value):
        """Returns True, or a Reply when the put has to wait on the lock."""
        key = self.key(k)
        name = key.render()
        self._ops += 1
        holder = (self.worker.uid, self._ops)
        started = self.clock.now()
        req = self.store.acquire_lock(name, holder, self.lock_timeout)
        if req.status == ACQUIRED and self.write_time <= 0:
            self._write(key, name, holder, value, started, started)
            return True
        done = Reply()

        def on_lock(_):
            if req.status != ACQUIRED:
                self.metrics.attempts += 1
                self.metrics.failures += 1
                done.set_exception(LockTimeout("put %s timed out" % name))
                return
            granted = req.resolved_at

            def finish():
                self._write(key, name, holder, value, started, granted)
                done.set_result(True)

            if self.write_time <= 0:
                finish()
            else:
                self.clock.call_later(self.write_time, finish)

        req.future.add_done_callback(on_lock)
        return done

    def _write(self, key, name, holder, value, started, granted):
        self.store.put(key, value)
        self.store.release_lock(name, holder)
        now = self.clock.now()
        m = self.metrics
        m.attempts += 1
        m.completed += 1
        m.lock_latency_sum += granted - started
        m.put_latency_sum += now - started

    def reset_window(self):
        self.metrics = CacheMetrics()

    def demand_delta(self):
        members = self.store.get_value(StoreKey(self.pool.name, "members")) or []
        live = len(members)
        snap = self.worker.last_snapshot
        serving = snap.size if snap is not None else len(self.pool.serving())
        serving = max(serving, 1)
        rate = self.worker.recent_arrival_rate(self.clock.now(), self.rate_horizon)
        # the per-member rate times the member count overshoots slightly under
        # round-robin quantization, so a small share of a worker is forgiven
        needed = math.ceil(rate * serving / self.qos_capacity - DEMAND_TOLERANCE)
        return needed - live

    def change_pool_size(self):
        if self.qos_capacity is None:
            return cache_advisor(self.metrics)
        d = self.demand_delta()
        if under_contention(self.metrics):
            d = min(d, 0)
        return d
