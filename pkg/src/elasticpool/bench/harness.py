"""
Deterministic benchmark driver.

One tick is one virtual second. Per tick the harness, in this order:
advances the clock to the tick (firing spawns, burst evaluations and sentinel
rounds due at that instant), injects the tick's arrivals through the client
stubs, and lets every worker serve for one second. A sample is taken at the
end of each sub-interval; its rate is the mean scheduled rate over the
sub-interval.
"""

import csv
import io
import random
from dataclasses import dataclass

from ..balancer import Balancer, ClientStub, PoolUnreachable
from ..cache import ElasticCache
from ..clock import VirtualClock
from ..cluster import Cluster, ClusterConfig
from ..events import EventLog
from ..pool import PoolConfig, instantiate_pool
from ..scaling import Autoscaler, CoarseThreshold, FineGrained, ImplicitCpu
from .metrics import QoSModel, agility, make_samples, measure_provisioning, req_min
from .workload import WorkloadPattern, arrivals_per_second, generate_workload

CSV_COLUMNS = ("t", "rate", "req_min", "cap_prov", "excess", "shortage", "pool_size")


class InvariantViolation(AssertionError):
    pass


@dataclass(frozen=True)
class SampleRow:
    t: float
    rate: float
    req_min: int
    cap_prov: int
    pool_size: int

    @property
    def excess(self):
        return max(0, self.cap_prov - self.req_min)

    @property
    def shortage(self):
        return max(0, self.req_min - self.cap_prov)


@dataclass
class RunResult:
    scenario: object
    rows: list
    report: object
    provisioning: object
    events: object
    pool: object
    cluster: object
    dropped: int
    completed: int
    failed: int

    @property
    def agility_mean(self):
        return self.report.agility

    @property
    def zero_fraction(self):
        return self.report.zero_fraction


def pattern_for(scenario):
    return WorkloadPattern(kind=scenario.workload, point_a=scenario.point_a,
                           duration=scenario.duration, cycles=scenario.cycles,
                           jitter=scenario.jitter)


def build_policy(scenario):
    if scenario.policy == "implicit_cpu":
        return ImplicitCpu()
    if scenario.policy == "cpu_only":
        return CoarseThreshold(cpu_incr=scenario.cpu_incr_threshold,
                               cpu_decr=scenario.cpu_decr_threshold,
                               mem_incr=scenario.mem_incr_threshold,
                               mem_decr=scenario.mem_decr_threshold)
    if scenario.policy == "fine_grained":
        return FineGrained()
    return None


def run_scenario(scenario):
    scenario.validate()
    qos = QoSModel(scenario.qos_capacity)
    pattern = pattern_for(scenario)
    rates = generate_workload(pattern, scenario.seed)
    arrivals = arrivals_per_second(rates)

    clock = VirtualClock()
    events = EventLog(clock)
    cluster = Cluster(ClusterConfig(
        total_slices=scenario.total_slices, spawn_delay=scenario.spawn_delay,
        admin_high_watermark=scenario.admin_high_watermark,
        admin_low_watermark=scenario.admin_low_watermark), events)

    overprovision = scenario.policy == "overprovision"
    min_size, max_size = scenario.min_size, scenario.max_size
    if overprovision:
        # the oracle knows the peak in advance and provisions for it once
        min_size = max_size = req_min(pattern.peak, qos, floor=scenario.min_size)
    config = PoolConfig(min_size=min_size, max_size=max_size,
                        burst_interval=scenario.burst_interval,
                        broadcast_period=scenario.broadcast_period,
                        policy=build_policy(scenario),
                        service_rate=scenario.effective_service_rate)
    advisor_capacity = scenario.qos_capacity if scenario.policy == "fine_grained" else None
    app_factory = ElasticCache.factory(write_time=scenario.write_time,
                                       lock_timeout=scenario.lock_timeout,
                                       qos_capacity=advisor_capacity,
                                       rate_horizon=scenario.rate_horizon)
    pool = instantiate_pool(scenario.pool_name, config, cluster, clock=clock,
                            events=events, app_factory=app_factory)

    if not overprovision:
        Autoscaler({pool.name: pool}).start()
    Balancer(pool, delta=scenario.delta).start()

    stubs = [ClientStub(pool, scenario.strategy, seed=scenario.seed + i, name="c%d" % i)
             for i in range(scenario.clients)]
    rng = random.Random(scenario.seed)
    sub = scenario.effective_sub_interval
    n_clients = len(stubs)
    write_fraction = scenario.write_fraction
    key_space = scenario.key_space

    rows = []
    replies = []
    dropped = 0
    sent = 0
    window_start = 0
    next_sample = sub
    duration = len(rates)
    for t in range(duration):
        clock.advance_to(t)
        for _ in range(int(arrivals[t])):
            stub = stubs[sent % n_clients]
            sent += 1
            key = rng.randrange(key_space)
            if rng.random() < write_fraction:
                args = ("put", key, sent)
            else:
                args = ("get", key)
            try:
                replies.append(stub.invoke(*args))
            except PoolUnreachable:
                dropped += 1
        pool.process(1.0)
        if t + 1 >= next_sample - 1e-9 or t + 1 == duration:
            hi = int(round(min(next_sample, duration)))
            level = float(rates[window_start:hi].mean()) if hi > window_start else 0.0
            rows.append(SampleRow(
                t=float(window_start), rate=level,
                req_min=req_min(level, qos, floor=scenario.min_size),
                cap_prov=len(pool.serving()), pool_size=pool.live_size()))
            window_start = hi
            next_sample += sub
    clock.advance_to(float(duration))

    completed = sum(1 for f in replies if f.done() and f.exception() is None)
    failed = sum(1 for f in replies if f.done() and f.exception() is not None)
    report = agility(make_samples([r.req_min for r in rows], [r.cap_prov for r in rows]))
    result = RunResult(scenario, rows, report, measure_provisioning(events.records, pool.name),
                       events, pool, cluster, dropped, completed, failed)
    check_invariants(result)
    return result


def check_invariants(result):
    pool = result.pool
    cluster = result.cluster
    if cluster.granted_count() + cluster.free_count() != cluster.total_slices:
        raise InvariantViolation("slice conservation broken")
    cfg = pool.config
    for row in result.rows:
        if row.excess and row.shortage:
            raise InvariantViolation("excess and shortage both positive at t=%s" % row.t)
        if not cfg.min_size <= row.pool_size <= cfg.max_size:
            raise InvariantViolation("pool size %d outside [%d, %d] at t=%s"
                                     % (row.pool_size, cfg.min_size, cfg.max_size, row.t))
    oks = {}
    for rid, _, outcome in pool.trace:
        if outcome == "ok":
            oks[rid] = oks.get(rid, 0) + 1
    if any(n != 1 for n in oks.values()):
        raise InvariantViolation("an invocation executed more than once")


def run_baseline(scenario, baseline):
    if baseline not in ("overprovision", "cpu_only", "fine_grained", "implicit_cpu"):
        raise ValueError("unknown baseline %r" % baseline)
    return run_scenario(scenario.replace(policy=baseline))


def comparison_row(baseline, result):
    prov = result.provisioning
    return {
        "baseline": baseline,
        "agility_mean": float(result.agility_mean),
        "zero_fraction": float(result.zero_fraction),
        "provisioning_max_s": prov.max,
        "provisioning_mean_s": prov.mean,
    }


def compare(scenario, baselines, on_result=None):
    """Run each baseline with the scenario's seed; rows ordered by mean agility.

    ``on_result(baseline, result)`` is called after each run, e.g. to write
    per-baseline outputs.
    """
    baselines = list(baselines)
    if len(baselines) < 2:
        raise ValueError("compare needs at least two baselines")
    table = []
    for b in baselines:
        res = run_baseline(scenario, b)
        if on_result is not None:
            on_result(b, res)
        table.append(comparison_row(b, res))
    table.sort(key=lambda r: (r["agility_mean"], r["baseline"]))
    return table


def _fmt(v):
    if v is None:
        return "N/A"
    return "%.6f" % v


def samples_csv(result):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in result.rows:
        writer.writerow(["%g" % r.t, "%.3f" % r.rate, r.req_min, r.cap_prov,
                         r.excess, r.shortage, r.pool_size])
    return buf.getvalue()


def summary_text(result):
    prov = result.provisioning
    lines = [
        "agility_mean %s" % _fmt(float(result.agility_mean)),
        "zero_fraction %s" % _fmt(float(result.zero_fraction)),
        "provisioning_max_s %s" % _fmt(prov.max),
        "provisioning_mean_s %s" % _fmt(prov.mean),
    ]
    return "\n".join(lines) + "\n"


def comparison_text(table):
    cols = ("baseline", "agility_mean", "zero_fraction",
            "provisioning_max_s", "provisioning_mean_s")
    out = ["\t".join(cols)]
    for row in table:
        out.append("\t".join(row[c] if c == "baseline" else _fmt(row[c]) for c in cols))
    return "\n".join(out) + "\n"
