# How each scaling policy reads the same situation.

from elasticpool.cache import MetricsView, cache_advisor
from elasticpool.clock import VirtualClock
from elasticpool.cluster import Cluster, ClusterConfig
from elasticpool.pool import PoolConfig, instantiate_pool
from elasticpool.scaling import (Autoscaler, CoarseThreshold, FineGrained,
                                 ImplicitCpu, evaluate_coarse, evaluate_implicit,
                                 rounded_mean, uniform_metrics)

# Implicit policy: only average CPU matters, with a dead zone between 0.60 and 0.90.
for cpu in (0.95, 0.75, 0.40):
    print("implicit cpu=%.2f -> %+d" % (cpu, evaluate_implicit(uniform_metrics(3, cpu)).delta))

# Coarse thresholds are OR-ed: memory pressure alone is enough to grow.
policy = CoarseThreshold(cpu_incr=0.85, mem_incr=0.70, cpu_decr=0.60, mem_decr=0.50)
for cpu, mem in ((0.80, 0.75), (0.86, 0.50), (0.50, 0.40), (0.70, 0.60)):
    d = evaluate_coarse(uniform_metrics(3, cpu, mem), policy)
    print("coarse cpu=%.2f mem=%.2f -> %+d (%s)" % (cpu, mem, d.delta, d.reason))

# Fine-grained: every worker votes, the mean is rounded half away from zero.
for votes in ([2, -1, 2], [1, 2], [-1, -2], [1, 1, -1]):
    print("votes", votes, "->", rounded_mean(votes))

# The cache's own advisor refuses to grow while writers fight over locks.
print("cache advisor, 60% lock failures ->", cache_advisor(MetricsView(0.6)))
print("cache advisor, calm ->", cache_advisor(MetricsView(0.2, 0.001, 1.0)))

# An autoscaler run: one evaluation per burst interval on the virtual clock.
clock = VirtualClock()
cluster = Cluster(ClusterConfig(total_slices=8, spawn_delay=5.0))
pool = instantiate_pool("demo", PoolConfig(min_size=2, max_size=5, burst_interval=30.0,
                                           policy=FineGrained(lambda w: 2)),
                        cluster, clock=clock)
scaler = Autoscaler([pool]).start()
clock.advance_to(150)
for t, name, delta, applied, reason in scaler.decisions:
    print("t=%3.0f wanted %+d got %+d (%s)" % (t, delta, applied, reason))
print("final size", pool.live_size(), "(max_size 5)")

# a pool that declares no policy is scaled by average CPU
print("default policy", ImplicitCpu())
