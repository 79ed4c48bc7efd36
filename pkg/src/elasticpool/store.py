"""
Shared state for pool members: a single authoritative key-value map with
named FIFO locks, plus the dispatch rule for method calls on shared fields.

Lock waits are parked requests. A waiter is granted the lock when the holder
releases it, or times out when the virtual clock passes its deadline. Threads
may block on :meth:`LockRequest.wait`; single-threaded simulations instead
attach callbacks to ``LockRequest.future``.
"""

import csv
import threading
from collections import deque
from dataclasses import dataclass

from . import codec
from .clock import VirtualClock
from .reply import Reply

ACQUIRED = "acquired"
TIMED_OUT = "timed_out"
WAITING = "waiting"

ELASTIC_REF = "elastic_ref"
SYNCHRONIZED = "plain_synchronized"
UNSYNCHRONIZED = "plain_unsynchronized"


class _Absent:
    def __repr__(self):
        return "ABSENT"

    def __bool__(self):
        return False


ABSENT = _Absent()


class LockError(RuntimeError):
    pass


class LockTimeout(LockError):
    pass


@dataclass(frozen=True, order=True)
class StoreKey:
    namespace: str
    field: str

    def render(self):
        return "%s$%s" % (self.namespace, self.field)

    def __str__(self):
        return self.render()

    @classmethod
    def parse(cls, text):
        namespace, sep, field = text.partition("$")
        if not sep:
            raise ValueError("store key needs a '$' separator: %r" % text)
        return cls(namespace, field)


@dataclass(frozen=True)
class StoredValue:
    data: bytes
    version: int

    @property
    def value(self):
        return codec.decode(self.data)


class LockRequest:
    def __init__(self, name, holder, requested_at):
        self.name = name
        self.holder = holder
        self.requested_at = requested_at
        self.resolved_at = None
        self.status = WAITING
        self.future = Reply()
        self._timer = None

    def _resolve(self, status, now):
        self.status = status
        self.resolved_at = now
        if self._timer is not None:
            self._timer.cancel()
        self.future.set_result(status)

    @property
    def wait_time(self):
        if self.resolved_at is None:
            return None
        return self.resolved_at - self.requested_at

    def wait(self, timeout=None):
        """Block the calling thread until granted or timed out (virtual time)."""
        return self.future.result(timeout)


class NamedLock:
    def __init__(self, name):
        self.name = name
        self.holder = None
        self.waiters = deque()


@dataclass(frozen=True)
class FieldDescriptor:
    """A shared instance/static field of an elastic class.

    ``target`` is required for ``elastic_ref`` fields and must expose
    ``invoke(method, *args)`` (a client stub or anything shaped like one).
    """

    namespace: str
    field: str
    kind: str = UNSYNCHRONIZED
    target: object = None

    @property
    def key(self):
        return StoreKey(self.namespace, self.field)


def _as_key(key):
    if isinstance(key, StoreKey):
        return key
    if isinstance(key, tuple):
        return StoreKey(*key)
    return StoreKey.parse(key)


class StateStore:
    def __init__(self, clock=None):
        self.clock = clock if clock is not None else VirtualClock()
        self._data = {}
        self._locks = {}
        self._mutex = threading.RLock()

    # -- values -----------------------------------------------------------

    def get(self, key):
        key = _as_key(key)
        with self._mutex:
            return self._data.get(key, ABSENT)

    def get_value(self, key, default=None):
        sv = self.get(key)
        return default if sv is ABSENT else sv.value

    def put(self, key, value):
        key = _as_key(key)
        data = codec.encode(value)
        with self._mutex:
            old = self._data.get(key)
            version = 1 if old is None else old.version + 1
            self._data[key] = StoredValue(data, version)
            return version

    def keys(self):
        with self._mutex:
            return sorted(self._data)

    def dump_csv(self, fh):
        """Write a ``key,version`` listing, one row per key, sorted by key."""
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["key", "version"])
        with self._mutex:
            rows = sorted((k.render(), v.version) for k, v in self._data.items())
        writer.writerows(rows)

    # -- locks ------------------------------------------------------------

    def acquire_lock(self, name, holder, timeout=None):
        """Request lock ``name`` for ``holder``.

        Returns a :class:`LockRequest` whose ``status`` is ``acquired``
        immediately when the lock is free. Otherwise the request queues FIFO;
        ``timeout`` (virtual seconds, ``None`` = forever) bounds the wait.
        """
        with self._mutex:
            lock = self._locks.setdefault(name, NamedLock(name))
            now = self.clock.now()
            req = LockRequest(name, holder, now)
            if lock.holder is None and not lock.waiters:
                lock.holder = holder
                req._resolve(ACQUIRED, now)
                return req
            if timeout is not None and timeout <= 0:
                req._resolve(TIMED_OUT, now)
                return req
            lock.waiters.append(req)
            if timeout is not None:
                req._timer = self.clock.call_later(
                    timeout, lambda: self._expire(lock, req))
            return req

    def _expire(self, lock, req):
        with self._mutex:
            if req.status != WAITING:
                return
            lock.waiters.remove(req)
            req._resolve(TIMED_OUT, self.clock.now())

    def release_lock(self, name, holder):
        with self._mutex:
            lock = self._locks.get(name)
            if lock is None or lock.holder is None:
                raise LockError("lock %r is not held" % name)
            if lock.holder != holder:
                raise LockError("lock %r is held by %r, not %r"
                                % (name, lock.holder, holder))
            lock.holder = None
            if lock.waiters:
                nxt = lock.waiters.popleft()
                lock.holder = nxt.holder
                nxt._resolve(ACQUIRED, self.clock.now())

    def lock_holder(self, name):
        with self._mutex:
            lock = self._locks.get(name)
            return None if lock is None else lock.holder

    def lock_queue(self, name):
        with self._mutex:
            lock = self._locks.get(name)
            return [] if lock is None else [r.holder for r in lock.waiters]

    def synchronized(self, name, holder, timeout=None):
        """Context manager for blocking mutual exclusion on ``name``."""
        return _Held(self, name, holder, timeout)

    # -- shared-field dispatch ----------------------------------------------

    def invoke_on_shared_field(self, field, method, args=(), holder=None,
                               timeout=None):
        """Run ``method`` on shared field ``field`` and return its result.

        For plain fields ``method(value, *args)`` returns ``(new_value,
        result)``; ``value`` is ``None`` when the field was never written.
        For elastic references ``method`` is the remote method name.
        """
        if field.kind == ELASTIC_REF:
            if field.target is None:
                raise ValueError("elastic_ref field %s has no target" % field.key)
            return field.target.invoke(method, *args)
        if field.kind == SYNCHRONIZED:
            name = field.key.render()
            status = self.acquire_lock(name, holder, timeout).wait()
            if status != ACQUIRED:
                raise LockTimeout("timed out waiting for %s" % name)
            try:
                return self._read_modify_write(field.key, method, args)
            finally:
                self.release_lock(name, holder)
        if field.kind == UNSYNCHRONIZED:
            return self._read_modify_write(field.key, method, args)
        raise ValueError("unknown field kind %r" % (field.kind,))

    def _read_modify_write(self, key, method, args):
        current = self.get_value(key)
        new_value, result = method(current, *args)
        self.put(key, new_value)
        return result


class _Held:
    def __init__(self, store, name, holder, timeout):
        self.store = store
        self.name = name
        self.holder = holder
        self.timeout = timeout

    def __enter__(self):
        status = self.store.acquire_lock(self.name, self.holder, self.timeout).wait()
        if status != ACQUIRED:
            raise LockTimeout("timed out waiting for %s" % self.name)
        return self

    def __exit__(self, *exc):
        self.store.release_lock(self.name, self.holder)
        return False
