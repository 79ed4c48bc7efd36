"""
Elastic object pool runtime.

A pool is a set of workers that together look like one remote object. Each
worker sits on its own slice, owns a FIFO of pending invocations and serves
``service_rate`` invocations per virtual second. Membership changes, sentinel
election and lifecycle transitions are serialized by the pool's coordinator
lock.
"""

import math
import threading
from collections import deque
from dataclasses import dataclass, field

from .events import EventLog
from .reply import Reply
from .store import StateStore, StoreKey

STARTING = "starting"
SERVING = "serving"
DRAINING = "draining"
STOPPED = "stopped"
CRASHED = "crashed"

LIVE_STATES = (STARTING, SERVING)


class PoolError(RuntimeError):
    pass


class ConfigError(ValueError):
    pass


class PoolDead(PoolError):
    """No live member is left to act as sentinel."""


class DispatchError(PoolError):
    """The invocation could not be handed to the target (send failed)."""

    def __init__(self, message, uid=None):
        super().__init__(message)
        self.uid = uid


class Redirect(DispatchError):
    """Target is draining or not yet serving; ``hint`` names another member."""

    def __init__(self, message, uid=None, hint=None):
        super().__init__(message, uid)
        self.hint = hint


class WorkerCrashed(PoolError):
    """An accepted invocation was lost because its worker crashed."""


class NoCapacity:
    def __repr__(self):
        return "NO_CAPACITY"

    def __bool__(self):
        return False


NO_CAPACITY = NoCapacity()


@dataclass
class PoolConfig:
    min_size: int = 2
    max_size: int = 8
    burst_interval: float = 60.0
    policy: object = None
    broadcast_period: float = None
    service_rate: float = 10.0

    def __post_init__(self):
        if self.broadcast_period is None:
            self.broadcast_period = self.burst_interval / 6.0

    def validate(self):
        if self.min_size < 2:
            raise ConfigError("min_size must be >= 2 (got %d)" % self.min_size)
        if self.max_size < self.min_size:
            raise ConfigError("max_size (%d) must be >= min_size (%d)"
                              % (self.max_size, self.min_size))
        if self.burst_interval <= 0:
            raise ConfigError("burst_interval must be positive")
        if self.broadcast_period <= 0:
            raise ConfigError("broadcast_period must be positive")
        if self.service_rate <= 0:
            raise ConfigError("service_rate must be positive")
        return self


@dataclass(eq=False)
class Invocation:
    request_id: object
    method: str
    args: tuple = ()
    reply: Reply = field(default_factory=Reply)
    enqueue_time: float = None
    hops: list = field(default_factory=list)


class Worker:
    def __init__(self, uid, slice_id, requested_at):
        self.uid = uid
        self.slice_id = slice_id
        self.state = STARTING
        self.pending = deque()
        self.cpu_util = 0.0
        self.mem_util = 0.0
        self.served_count = 0
        self.app = None
        self.requested_at = requested_at
        self.serving_at = None
        self.first_served_at = None
        self.stopped_at = None
        self._credit = 0.0
        # per-window counters, reset at each burst boundary
        self.window_start = requested_at
        self.window_arrivals = 0
        self.window_served = 0
        self.window_peak_pending = 0
        self.arrival_log = deque()
        self.last_snapshot = None

    def __repr__(self):
        return "Worker(uid=%d, state=%s, pending=%d)" % (
            self.uid, self.state, len(self.pending))

    @property
    def accepting(self):
        return self.state == SERVING

    def record_arrival(self, now, count=1):
        self.window_arrivals += count
        self.arrival_log.append((now, count))
        if len(self.pending) > self.window_peak_pending:
            self.window_peak_pending = len(self.pending)

    def recent_arrival_rate(self, now, horizon):
        """Invocations per virtual second routed here over the last ``horizon``."""
        cutoff = now - horizon
        log = self.arrival_log
        while log and log[0][0] < cutoff:
            log.popleft()
        start = cutoff
        if self.serving_at is not None and self.serving_at > start:
            start = self.serving_at
        span = now - start
        if span <= 0:
            return 0.0
        return sum(c for _, c in log) / span

    def refresh_gauges(self, now, service_rate):
        start = self.window_start
        if self.serving_at is not None and self.serving_at > start:
            start = self.serving_at
        span = now - start
        if span <= 0:
            self.cpu_util = 0.0
            self.mem_util = 0.0
            return
        cap = service_rate * span
        self.cpu_util = min(1.0, self.window_served / cap)
        self.mem_util = min(1.0, len(self.pending) / cap)

    def reset_window(self, now):
        self.window_start = now
        self.window_arrivals = 0
        self.window_served = 0
        self.window_peak_pending = len(self.pending)


class Pool:
    """One elastic object pool.

    ``app_factory(worker, pool)`` builds the per-worker application object;
    it must provide ``handle(method, args)`` returning a result or a
    :class:`~elasticpool.reply.Reply`.
    """

    def __init__(self, name, config, cluster, store=None, clock=None,
                 events=None, app_factory=None):
        self.name = name
        self.config = config.validate()
        self.cluster = cluster
        self.clock = clock if clock is not None else (
            store.clock if store is not None else None)
        if self.clock is None:
            from .clock import VirtualClock
            self.clock = VirtualClock()
        self.store = store if store is not None else StateStore(self.clock)
        self.events = events if events is not None else EventLog(self.clock)
        self.app_factory = app_factory
        self.workers = {}
        self.sentinel = None
        self.shortfall = False
        self.membership_version = 0
        self.trace = []
        self._next_uid = 1
        self._lock = threading.RLock()

    # -- membership -------------------------------------------------------

    def live(self):
        """Members counted toward the pool size: starting or serving."""
        return [w for w in self._ordered() if w.state in LIVE_STATES]

    def serving(self):
        return [w for w in self._ordered() if w.state == SERVING]

    def draining(self):
        return [w for w in self._ordered() if w.state == DRAINING]

    def live_size(self):
        return len(self.live())

    def _ordered(self):
        return [self.workers[u] for u in sorted(self.workers)]

    def member(self, uid):
        return self.workers.get(uid)

    def _spawn(self, slice_, warm, kind):
        uid = self._next_uid
        self._next_uid += 1
        now = self.clock.now()
        w = Worker(uid, slice_.slice_id, now)
        slice_.holder = (self.name, uid)
        if self.app_factory is not None:
            w.app = self.app_factory(w, self)
        self.workers[uid] = w
        self.events.emit("spawn", pool=self.name, uid=uid, kind=kind, t=now)
        if warm:
            self._become_serving(w)
        else:
            self.clock.call_later(self.cluster.spawn_delay,
                                  lambda: self._become_serving(w))
        return w

    def _become_serving(self, w):
        with self._lock:
            if w.state != STARTING:
                return
            now = self.clock.now()
            w.state = SERVING
            w.serving_at = now
            w.window_start = now
            self.membership_version += 1
            self.events.emit("serving", pool=self.name, uid=w.uid, t=now)
            if self.sentinel is None:
                self.elect_sentinel()

    def start(self, warm=True):
        """Request ``min_size`` slices and spawn one worker on each grant."""
        with self._lock:
            grants = self.cluster.request_slices(self.config.min_size,
                                                 holder=self.name)
            for s in grants:
                self._spawn(s, warm, "initial")
            self.shortfall = len(grants) < self.config.min_size
            if self.shortfall:
                self.events.emit("shortfall", pool=self.name,
                                 granted=len(grants), wanted=self.config.min_size)
            self._publish_members()
            if grants:
                self.elect_sentinel()
            return self

    def elect_sentinel(self):
        """Make the lowest live uid the sentinel and record it in the store."""
        with self._lock:
            uids = [w.uid for w in self.live()]
            if not uids:
                self.sentinel = None
                raise PoolDead("pool %s has no live member" % self.name)
            uid = elect_sentinel(uids)
            if uid != self.sentinel:
                self.sentinel = uid
                self.events.emit("elect", pool=self.name, uid=uid,
                                 t=self.clock.now())
            self.store.put(StoreKey(self.name, "sentinel"), uid)
            return uid

    def sentinel_alive(self):
        w = self.workers.get(self.sentinel)
        return w is not None and w.state in LIVE_STATES

    def _publish_members(self):
        self.store.put(StoreKey(self.name, "members"),
                       [w.uid for w in self.live()])

    def add_worker(self):
        """Grow by one worker. Returns the new uid or ``NO_CAPACITY``."""
        with self._lock:
            if self.live_size() >= self.config.max_size:
                raise PoolError("pool %s is at max_size" % self.name)
            grants = self.cluster.request_slices(1, holder=self.name)
            if not grants:
                self.events.emit("no_capacity", pool=self.name,
                                 t=self.clock.now())
                return NO_CAPACITY
            w = self._spawn(grants[0], False, "scale")
            self.membership_version += 1
            self._publish_members()
            if len(self.live()) >= self.config.min_size:
                self.shortfall = False
            return w.uid

    def remove_worker(self, uid):
        """Gracefully retire ``uid``: redirect, drain, stop, release its slice."""
        with self._lock:
            w = self.workers.get(uid)
            if w is None or w.state != SERVING:
                raise PoolError("worker %r is not serving" % (uid,))
            if self.live_size() <= self.config.min_size:
                raise PoolError("pool %s is at min_size" % self.name)
            # redirection starts before the shutdown message
            w.state = DRAINING
            self.membership_version += 1
            if uid == self.sentinel:
                self.elect_sentinel()
            self._publish_members()
            self.events.emit("drain", pool=self.name, uid=uid,
                             pending=len(w.pending), t=self.clock.now())
            if not w.pending:
                self._stop(w)

    def _stop(self, w, at=None):
        w.state = STOPPED
        w.stopped_at = self.clock.now() if at is None else at
        self.cluster.release_slice(w.slice_id)
        self.events.emit("stop", pool=self.name, uid=w.uid, t=w.stopped_at)

    def crash_worker(self, uid):
        """Fail-stop ``uid``; its pending invocations get error outcomes.

        Sentinel loss is not repaired here: it is noticed on the next
        broadcast round (see :meth:`detect_sentinel_failure`).
        """
        with self._lock:
            w = self.workers.get(uid)
            if w is None or w.state in (STOPPED, CRASHED):
                raise PoolError("worker %r is not running" % (uid,))
            w.state = CRASHED
            w.stopped_at = self.clock.now()
            self.membership_version += 1
            lost = list(w.pending)
            w.pending.clear()
            self.cluster.release_slice(w.slice_id)
            self._publish_members()
            self.events.emit("crash", pool=self.name, uid=uid, lost=len(lost),
                             t=w.stopped_at)
        for inv in lost:
            self._fail(w, inv)

    def detect_sentinel_failure(self):
        """Re-elect if the sentinel is gone. Returns True when an election ran."""
        with self._lock:
            if self.sentinel_alive():
                return False
            self.elect_sentinel()
            return True

    # -- invocation path --------------------------------------------------

    def _redirect_hint(self, exclude):
        for w in self.serving():
            if w.uid != exclude:
                return w.uid
        return None

    def execute(self, invocation, target_uid):
        """Hand ``invocation`` to ``target_uid``; returns its reply future.

        Raises :class:`DispatchError` when the target cannot accept it (gone,
        crashed) and :class:`Redirect` when it is draining or still starting.
        """
        with self._lock:
            w = self.workers.get(target_uid)
            if w is None or w.state in (STOPPED, CRASHED):
                raise DispatchError("member %r of %s is unreachable"
                                    % (target_uid, self.name), target_uid)
            if w.state != SERVING:
                raise Redirect("member %r of %s is %s" % (target_uid, self.name, w.state),
                               target_uid, self._redirect_hint(target_uid))
            now = self.clock.now()
            if invocation.enqueue_time is None:
                invocation.enqueue_time = now
            invocation.hops.append(target_uid)
            w.pending.append(invocation)
            w.record_arrival(now)
            return invocation.reply

    def pending_counts(self):
        return {w.uid: len(w.pending) for w in self._ordered()
                if w.state in (SERVING, DRAINING)}

    def total_pending(self):
        return sum(len(w.pending) for w in self.workers.values())

    def process(self, dt=1.0):
        """Let every serving or draining worker run for ``dt`` virtual seconds."""
        rate = self.config.service_rate
        now = self.clock.now()
        for w in self._ordered():
            if w.state not in (SERVING, DRAINING):
                continue
            budget = w._credit + rate * dt
            n = min(len(w.pending), int(math.floor(budget + 1e-9)))
            for k in range(n):
                if w.state not in (SERVING, DRAINING) or not w.pending:
                    break
                inv = w.pending.popleft()
                self._run(w, inv, min(now + (k + 1) / rate, now + dt))
            w._credit = budget - n if w.pending else 0.0
            if w.state == DRAINING and not w.pending:
                with self._lock:
                    # the worker stops once its last queued call is done
                    self._stop(w, at=min(now + n / rate, now + dt) if n else now)

    def drain_all(self, dt=1.0, max_steps=100000):
        """Process until no queue holds work (test helper; no clock movement)."""
        steps = 0
        while any(w.pending for w in self.workers.values()
                  if w.state in (SERVING, DRAINING)):
            self.process(dt)
            steps += 1
            if steps > max_steps:
                raise PoolError("queues did not drain")

    def _run(self, w, inv, done_at):
        try:
            if w.app is None:
                result = None
            else:
                result = w.app.handle(inv.method, inv.args)
        except Exception as exc:  # application error travels to the caller
            if w.state == CRASHED:
                self._fail(w, inv)
                return
            self.trace.append((inv.request_id, w.uid, "error"))
            inv.reply.set_exception(exc)
            return
        if w.state == CRASHED:
            self._fail(w, inv)
            return
        w.served_count += 1
        w.window_served += 1
        if w.first_served_at is None:
            w.first_served_at = done_at
            self.events.emit("first_service", pool=self.name, uid=w.uid,
                             t=done_at)
        self.trace.append((inv.request_id, w.uid, "ok"))
        if isinstance(result, Reply):
            result.add_done_callback(lambda f, inv=inv: _chain(f, inv.reply))
        else:
            inv.reply.set_result(result)

    def _fail(self, w, inv):
        self.trace.append((inv.request_id, w.uid, "crashed"))
        if not inv.reply.done():
            inv.reply.set_exception(
                WorkerCrashed("member %d of %s crashed" % (w.uid, self.name)))

    # -- load signals -----------------------------------------------------

    def refresh_gauges(self):
        now = self.clock.now()
        for w in self.serving():
            w.refresh_gauges(now, self.config.service_rate)

    def reset_windows(self):
        now = self.clock.now()
        for w in self.workers.values():
            w.reset_window(now)


def _chain(src, dst):
    if dst.done():
        return
    exc = src.exception()
    if exc is not None:
        dst.set_exception(exc)
    else:
        dst.set_result(src.result())


def elect_sentinel(members):
    """Lowest uid wins. ``members`` is an iterable of uids."""
    uids = list(members)
    if not uids:
        raise PoolDead("cannot elect a sentinel from an empty membership")
    return min(uids)


def instantiate_pool(name, config, cluster, store=None, clock=None,
                     events=None, app_factory=None, warm=True):
    """Validate ``config`` and bring up a pool of up to ``min_size`` workers.

    With fewer free slices than ``min_size`` the pool starts smaller and
    ``pool.shortfall`` is set. ``warm=True`` puts the initial members straight
    into service (bring-up before a measured run).
    """
    pool = Pool(name, config, cluster, store=store, clock=clock, events=events,
                app_factory=app_factory)
    return pool.start(warm=warm)
