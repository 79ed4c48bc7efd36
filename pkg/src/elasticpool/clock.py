"""
Deterministic virtual clock with a timer queue.

Time only moves when the driver calls :meth:`VirtualClock.advance_to` (or
:meth:`advance`). Callbacks scheduled for the same instant fire in the order
they were scheduled, so identical driver sequences replay identically.
"""

import heapq
import itertools
import threading


class Timer:
    """Handle for a scheduled callback; ``cancel()`` makes it a no-op."""

    __slots__ = ("at", "callback", "cancelled")

    def __init__(self, at, callback):
        self.at = at
        self.callback = callback
        self.cancelled = False

    def cancel(self):
        self.cancelled = True


class VirtualClock:
    def __init__(self, start=0.0):
        self._now = float(start)
        self._queue = []
        self._seq = itertools.count()
        self._lock = threading.RLock()

    def now(self):
        return self._now

    def schedule(self, at, callback):
        """Run ``callback()`` once virtual time reaches ``at``."""
        with self._lock:
            if at < self._now:
                at = self._now
            timer = Timer(at, callback)
            heapq.heappush(self._queue, (at, next(self._seq), timer))
            return timer

    def call_later(self, delay, callback):
        return self.schedule(self._now + delay, callback)

    def advance_to(self, t):
        """Move to time ``t``, firing every due timer in (time, FIFO) order.

        Timers scheduled by callbacks for an instant <= ``t`` also fire during
        this call.
        """
        if t < self._now:
            raise ValueError("virtual time is monotone: %r < %r" % (t, self._now))
        while True:
            with self._lock:
                if not self._queue or self._queue[0][0] > t:
                    self._now = float(t)
                    return
                at, _, timer = heapq.heappop(self._queue)
                self._now = at
            if not timer.cancelled:
                timer.callback()

    def advance(self, dt):
        self.advance_to(self._now + dt)

    def pending_timers(self):
        with self._lock:
            return sum(1 for _, _, tm in self._queue if not tm.cancelled)
