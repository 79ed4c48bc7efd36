"""Simulated resource manager handing out homogeneous slices."""

import bisect
import threading
from dataclasses import dataclass

from .events import EventLog

FREE = "free"
GRANTED = "granted"


class MisuseError(RuntimeError):
    """Raised when a caller violates the slice protocol (e.g. double release)."""


@dataclass
class Slice:
    slice_id: int
    cpu_capacity: float = 1.0
    mem_capacity: float = 1.0
    state: str = FREE
    holder: object = None


@dataclass
class ClusterConfig:
    total_slices: int = 32
    spawn_delay: float = 5.0
    admin_high_watermark: float = 0.9
    admin_low_watermark: float = 0.1
    cpu_capacity: float = 1.0
    mem_capacity: float = 1.0

    def validate(self):
        if self.total_slices < 1:
            raise ValueError("total_slices must be >= 1")
        if self.spawn_delay < 0:
            raise ValueError("spawn_delay must be >= 0")
        for name in ("admin_low_watermark", "admin_high_watermark"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError("%s must lie in [0, 1]" % name)
        if self.admin_low_watermark > self.admin_high_watermark:
            raise ValueError("admin_low_watermark must not exceed admin_high_watermark")
        return self


class Cluster:
    """Grants slices lowest-id first; all mutations go through one lock.

    Watermark notifications are edge-triggered: one ``cluster_watermark``
    record when utilization moves above the high mark (or below the low mark),
    none while it stays there.
    """

    def __init__(self, config=None, events=None):
        self.config = (config or ClusterConfig()).validate()
        self.events = events if events is not None else EventLog()
        self._lock = threading.RLock()
        self.slices = {
            i: Slice(i, self.config.cpu_capacity, self.config.mem_capacity)
            for i in range(self.config.total_slices)
        }
        self._free = list(range(self.config.total_slices))
        self._zone = self._zone_for(0.0)

    @property
    def total_slices(self):
        return self.config.total_slices

    @property
    def spawn_delay(self):
        return self.config.spawn_delay

    def free_count(self):
        with self._lock:
            return len(self._free)

    def granted_count(self):
        with self._lock:
            return self.total_slices - len(self._free)

    def request_slices(self, n, holder=None):
        if n < 1:
            raise ValueError("request_slices needs n >= 1")
        with self._lock:
            take, self._free = self._free[:n], self._free[n:]
            granted = []
            for sid in take:
                s = self.slices[sid]
                s.state = GRANTED
                s.holder = holder
                granted.append(s)
            if granted:
                self._check_watermarks()
            return granted

    def release_slice(self, slice_id):
        with self._lock:
            s = self.slices.get(slice_id)
            if s is None:
                raise MisuseError("unknown slice %r" % (slice_id,))
            if s.state != GRANTED:
                raise MisuseError("slice %d is not granted" % slice_id)
            s.state = FREE
            s.holder = None
            bisect.insort(self._free, slice_id)
            self._check_watermarks()

    def utilization(self):
        with self._lock:
            return (self.total_slices - len(self._free)) / self.total_slices

    def _zone_for(self, u):
        if u > self.config.admin_high_watermark:
            return "above"
        if u < self.config.admin_low_watermark:
            return "below"
        return "normal"

    def _check_watermarks(self):
        u = self.utilization()
        zone = self._zone_for(u)
        if zone != self._zone:
            self._zone = zone
            if zone != "normal":
                self.events.emit("cluster_watermark", direction=zone, utilization=u)
