"""
Hybrid load balancing.

Client side: :class:`ClientStub` learns the membership from the sentinel,
spreads calls round-robin or randomly, and retries other members when a send
fails. Server side: the sentinel periodically broadcasts a
:class:`PoolSnapshot`; :func:`rebalance_plan` turns it into redirect
instructions with a first-fit placement of excess queue entries.
"""

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction

from .pool import SERVING, DispatchError, Invocation, PoolError, Redirect

ROUND_ROBIN = "round_robin"
RANDOM = "random"


class PoolUnreachable(PoolError):
    """Every known member refused the invocation."""


class SentinelDown(PoolError):
    pass


@dataclass(frozen=True)
class PoolSnapshot:
    time: float
    sentinel: int
    pending: tuple  # ((uid, pending_count), ...) in uid order

    @property
    def members(self):
        return [uid for uid, _ in self.pending]

    @property
    def size(self):
        return len(self.pending)

    def counts(self):
        return dict(self.pending)


@dataclass
class RedirectPlan:
    moves: list = field(default_factory=list)  # [(from_uid, to_uid, count)]

    def __iter__(self):
        return iter(self.moves)

    def __len__(self):
        return len(self.moves)

    def __eq__(self, other):
        if isinstance(other, RedirectPlan):
            return self.moves == other.moves
        return self.moves == list(other)

    @property
    def total_moved(self):
        return sum(c for _, _, c in self.moves)


def snapshot_from_counts(counts, time=0.0, sentinel=None):
    """Build a snapshot from ``{uid: pending}`` (handy for tests and demos)."""
    pending = tuple(sorted(counts.items()))
    if sentinel is None and pending:
        sentinel = pending[0][0]
    return PoolSnapshot(time, sentinel, pending)


# -- client side -------------------------------------------------------------

class ClientStub:
    """Client-side proxy: callers see one logical object.

    Membership is fetched from the sentinel on first use, after any failed
    send, and when the pool's membership version (piggybacked on every reply
    path) has moved on.
    """

    def __init__(self, pool, strategy=ROUND_ROBIN, seed=None, name="stub"):
        if strategy not in (ROUND_ROBIN, RANDOM):
            raise ValueError("unknown strategy %r" % strategy)
        self.pool = pool
        self.strategy = strategy
        self.name = name
        self.known_members = []
        self.cursor = 0
        self.rng = random.Random(seed)
        self._seen_version = None
        self._stale = True
        self._seq = 0
        self.refreshes = 0

    @property
    def endpoint(self):
        return self.pool.name

    def refresh(self):
        pool = self.pool
        if not pool.sentinel_alive():
            raise PoolUnreachable("sentinel of %s is unreachable" % pool.name)
        self.known_members = [w.uid for w in pool.serving()]
        if not self.known_members:
            raise PoolUnreachable("pool %s has no serving member" % pool.name)
        self._seen_version = pool.membership_version
        self._stale = False
        self.refreshes += 1

    def _pick(self):
        n = len(self.known_members)
        if self.strategy == ROUND_ROBIN:
            i = self.cursor % n
            self.cursor += 1
        else:
            i = self.rng.randrange(n)
        return i

    def next_request_id(self):
        self._seq += 1
        return "%s-%d" % (self.name, self._seq)

    def invoke(self, method, *args):
        return self.stub_invoke(Invocation(self.next_request_id(), method, args))

    def stub_invoke(self, invocation):
        """Send ``invocation`` to one member; returns the reply future.

        Each member is tried at most once; the first refusal also triggers a
        membership refresh. Raises :class:`PoolUnreachable` when every member
        refused.
        """
        if self._stale or self._seen_version != self.pool.membership_version:
            try:
                self.refresh()
            except PoolUnreachable:
                if not self.known_members:
                    raise
        start = self._pick()
        members = self.known_members
        if members:
            # common case: the picked member accepts
            try:
                return self.pool.execute(invocation, members[start])
            except (Redirect, DispatchError) as e:
                self._stale = True
                first_error = e
        order = members[start:] + members[:start]
        tried = set()
        queue = list(order)
        last_error = None
        if members:
            tried.add(order[0])
            queue.pop(0)
            last_error = first_error
            if isinstance(first_error, Redirect) and first_error.hint is not None \
                    and first_error.hint not in tried:
                queue.insert(0, first_error.hint)
        while queue:
            uid = queue.pop(0)
            if uid in tried:
                continue
            tried.add(uid)
            try:
                return self.pool.execute(invocation, uid)
            except Redirect as r:
                last_error = r
                self._stale = True
                if r.hint is not None and r.hint not in tried:
                    queue.insert(0, r.hint)
            except DispatchError as e:
                last_error = e
                self._stale = True
        raise PoolUnreachable("all members of %s refused %s: %s"
                              % (self.pool.name, invocation.request_id, last_error))


def stub_invoke(stub, invocation):
    return stub.stub_invoke(invocation)


# -- server side -------------------------------------------------------------

def sentinel_broadcast(pool):
    """Sentinel collects pending counts and hands the snapshot to every member."""
    if not pool.sentinel_alive():
        raise SentinelDown("sentinel %r of %s is down" % (pool.sentinel, pool.name))
    now = pool.clock.now()
    last = getattr(pool, "last_snapshot", None)
    if last is not None and now < last.time:
        raise PoolError("snapshot time went backwards")
    snap = PoolSnapshot(now, pool.sentinel,
                        tuple((w.uid, len(w.pending)) for w in pool.serving()))
    pool.last_snapshot = snap
    for w in pool.live():
        w.last_snapshot = snap
    return snap


def rebalance_plan(snapshot, delta=0.25):
    """First-fit redirect plan for a snapshot.

    Members above ``(1 + delta) * mean`` shed ``pending - ceil(mean)``;
    members below the mean accept up to ``ceil(mean) - pending``. Items are
    placed largest first into the first bin that fits; an item larger than
    every remaining bin is split across bins in order. Whatever cannot be
    placed stays where it is.
    """
    counts = list(snapshot.pending)
    if len(counts) < 2:
        return RedirectPlan()
    total = sum(p for _, p in counts)
    mean = Fraction(total, len(counts))
    limit = (1 + Fraction(str(delta))) * mean
    level = math.ceil(mean)

    items = [(p - level, uid) for uid, p in counts if p > limit and p - level > 0]
    items.sort(key=lambda it: (-it[0], it[1]))
    bins = [[uid, level - p] for uid, p in counts if p < mean]

    moved = {}
    order = []
    for size, src in items:
        remaining = size
        while remaining > 0:
            target = next((b for b in bins if b[1] >= remaining), None)
            if target is None:
                target = next((b for b in bins if b[1] > 0), None)
                if target is None:
                    break
            amount = min(remaining, target[1])
            target[1] -= amount
            remaining -= amount
            key = (src, target[0])
            if key not in moved:
                moved[key] = 0
                order.append(key)
            moved[key] += amount
    return RedirectPlan([(s, d, moved[(s, d)]) for s, d in order])


def apply_plan_to_counts(counts, plan):
    """Pending counts after ``plan`` (pure; used by tests and logging)."""
    out = dict(counts)
    for src, dst, n in plan:
        n = min(n, out[src])
        out[src] -= n
        out[dst] += n
    return out


def apply_redirects(pool, plan):
    """Move queued invocations per ``plan``; returns how many moved.

    Entries are taken from the source's tail and appended to the target's
    tail in their original order. A move whose target is no longer serving
    is skipped, so those invocations stay at the source.
    """
    moved = 0
    with pool._lock:
        for src, dst, count in plan:
            s = pool.member(src)
            d = pool.member(dst)
            if s is None or d is None or d.state != SERVING:
                continue
            n = min(count, len(s.pending))
            if n <= 0:
                continue
            batch = [s.pending.pop() for _ in range(n)]
            batch.reverse()
            for inv in batch:
                inv.hops.append(dst)
                d.pending.append(inv)
            moved += n
    return moved


class Balancer:
    """Periodic sentinel round: failure detection, broadcast, rebalance."""

    def __init__(self, pool, delta=0.25, period=None):
        self.pool = pool
        self.delta = delta
        self.period = period if period is not None else pool.config.broadcast_period
        self.snapshots = []
        self._timer = None

    def start(self):
        clock = self.pool.clock
        self._timer = clock.call_later(self.period, self._fire)
        return self

    def stop(self):
        if self._timer is not None:
            self._timer.cancel()
            self._timer = None

    def _fire(self):
        self.tick()
        self._timer = self.pool.clock.call_later(self.period, self._fire)

    def tick(self):
        pool = self.pool
        pool.detect_sentinel_failure()
        snap = sentinel_broadcast(pool)
        self.snapshots.append(snap)
        plan = rebalance_plan(snap, self.delta)
        moved = apply_redirects(pool, plan) if plan.moves else 0
        if plan.moves:
            counts = snap.counts()
            after = apply_plan_to_counts(counts, plan)
            pool.events.emit("rebalance", pool=pool.name, moves=moved,
                             max_before=max(counts.values()),
                             max_after=max(after.values()), t=snap.time)
        return plan
