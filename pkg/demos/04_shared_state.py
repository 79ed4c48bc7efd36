# The shared store: named FIFO locks, and what happens without them.

from elasticpool.clock import VirtualClock
from elasticpool.store import (SYNCHRONIZED, UNSYNCHRONIZED, FieldDescriptor,
                               LockTimeout, StateStore)

clock = VirtualClock()
store = StateStore(clock)

# locks are granted in arrival order; waits expire in virtual time
a = store.acquire_lock("Cache$k", "a")
b = store.acquire_lock("Cache$k", "b", timeout=2.0)
c = store.acquire_lock("Cache$k", "c", timeout=10.0)
clock.advance_to(2.0)
print("a", a.status, "b", b.status, "c", c.status)
store.release_lock("Cache$k", "a")
print("after release: c", c.status, "waited", c.wait_time)
store.release_lock("Cache$k", "c")


def incr(value):
    value = (value or 0) + 1
    return value, value


# a lost update: another member increments between our read and our write
plain = FieldDescriptor("Counter", "hits", UNSYNCHRONIZED)


def racing(value):
    store.invoke_on_shared_field(plain, incr)
    return incr(value)


store.invoke_on_shared_field(plain, racing)
print("two increments without a lock ->", store.get_value(plain.key),
      "version", store.get(plain.key).version)

# the synchronized field refuses the interloper instead
guarded = FieldDescriptor("Counter", "safe", SYNCHRONIZED)


def contended(value):
    try:
        store.invoke_on_shared_field(guarded, incr, holder="b", timeout=0)
    except LockTimeout as exc:
        print("interloper:", exc)
    return incr(value)


store.invoke_on_shared_field(guarded, contended, holder="a")
print("synchronized ->", store.get_value(guarded.key))
