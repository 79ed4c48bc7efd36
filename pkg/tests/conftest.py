import pytest

from elasticpool.clock import VirtualClock
from elasticpool.cluster import Cluster, ClusterConfig
from elasticpool.events import EventLog
from elasticpool.pool import PoolConfig, instantiate_pool


def make_pool(min_size=2, max_size=8, total_slices=16, spawn_delay=5.0,
              app_factory=None, policy=None, service_rate=10.0,
              burst_interval=60.0, broadcast_period=None, name="p", warm=True):
    clock = VirtualClock()
    events = EventLog(clock)
    cluster = Cluster(ClusterConfig(total_slices=total_slices,
                                    spawn_delay=spawn_delay), events)
    config = PoolConfig(min_size=min_size, max_size=max_size,
                        burst_interval=burst_interval, policy=policy,
                        broadcast_period=broadcast_period,
                        service_rate=service_rate)
    return instantiate_pool(name, config, cluster, clock=clock, events=events,
                            app_factory=app_factory, warm=warm)


class Recorder:
    """App that remembers every call it executed."""

    def __init__(self, worker, pool):
        self.worker = worker
        self.calls = []

    def handle(self, method, args):
        if method == "boom":
            raise RuntimeError("application error")
        self.calls.append((method, args))
        return (self.worker.uid, method, args)


@pytest.fixture
def pool_factory():
    return make_pool
