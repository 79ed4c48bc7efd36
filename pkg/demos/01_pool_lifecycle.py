# Life of one elastic pool: bring-up, a cold spawn, a graceful drain and a crash.
# Everything runs on a virtual clock, so the printed times are exact.

from elasticpool.balancer import Balancer, ClientStub
from elasticpool.cache import ElasticCache
from elasticpool.clock import VirtualClock
from elasticpool.cluster import Cluster, ClusterConfig
from elasticpool.events import EventLog
from elasticpool.pool import Invocation, PoolConfig, instantiate_pool

clock = VirtualClock()
events = EventLog(clock)
cluster = Cluster(ClusterConfig(total_slices=6, spawn_delay=5.0), events)
pool = instantiate_pool("cache", PoolConfig(min_size=2, max_size=4), cluster,
                        clock=clock, events=events,
                        app_factory=ElasticCache.factory())
Balancer(pool).start()
print("members", [w.uid for w in pool.live()], "sentinel", pool.sentinel)

# the stub hides the pool; callers see one cache
stub = ClientStub(pool, name="client")
stub.invoke("put", "colour", "blue")
pool.process(1.0)
reply = stub.invoke("get", "colour")
pool.process(1.0)
print("get colour ->", reply.result())

# a new worker needs spawn_delay seconds; calls sent to it meanwhile are redirected
uid = pool.add_worker()
print("spawned", uid, "state", pool.member(uid).state)
clock.advance_to(5.0)
print("t=5 state", pool.member(uid).state)

# graceful removal: no new calls, finish the queue, then give the slice back
queued = [pool.execute(Invocation("manual-%d" % i, "get", ("colour",)), uid)
          for i in range(4)]
pool.remove_worker(uid)
print("draining", [w.uid for w in pool.draining()], "pending", pool.pending_counts())
pool.process(1.0)
print("after a second:", pool.member(uid).state,
      "answers", [r.result() for r in queued],
      "slices in use", cluster.granted_count())

# crash the sentinel; the next broadcast round notices and re-elects
pool.crash_worker(pool.sentinel)
print("sentinel alive?", pool.sentinel_alive())
clock.advance_to(20.0)
print("sentinel after broadcast", pool.sentinel)

print()
print("\n".join(events.lines()))
