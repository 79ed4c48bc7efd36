"""
Scenario files: one flat YAML mapping of ``key: value`` pairs.

Unknown keys, wrong types and constraint violations raise
:class:`ScenarioError` carrying the line of the offending key, so the CLI can
point at it.
"""

import dataclasses
import typing
from dataclasses import dataclass, fields

import yaml

POLICIES = ("implicit_cpu", "cpu_only", "fine_grained", "overprovision")
BASELINES = ("overprovision", "cpu_only", "fine_grained")
DEFAULT_DURATION = {"abrupt": 3600, "cyclic": 3780}


class ScenarioError(ValueError):
    def __init__(self, message, key=None, line=None):
        super().__init__(message)
        self.key = key
        self.line = line

    def located(self, path):
        if self.line is None:
            return "%s: %s" % (path, self)
        return "%s:%d: %s" % (path, self.line, self)


@dataclass
class Scenario:
    seed: int
    name: str = "scenario"
    # cluster
    total_slices: int = 24
    spawn_delay: float = 5.0
    admin_high_watermark: float = 0.9
    admin_low_watermark: float = 0.1
    # pool
    pool_name: str = "cache"
    min_size: int = 2
    max_size: int = 16
    burst_interval: float = 60.0
    broadcast_period: typing.Optional[float] = None
    # policy
    policy: str = "fine_grained"
    cpu_incr_threshold: float = 0.85
    cpu_decr_threshold: float = 0.60
    mem_incr_threshold: typing.Optional[float] = 0.70
    mem_decr_threshold: typing.Optional[float] = None
    # workload and QoS
    workload: str = "abrupt"
    point_a: float = 100.0
    duration: typing.Optional[int] = None
    cycles: int = 3
    jitter: float = 0.0
    qos_capacity: float = 10.0
    service_rate: typing.Optional[float] = None
    sub_interval: typing.Optional[float] = None
    # clients and balancing
    strategy: str = "round_robin"
    clients: int = 4
    delta: float = 0.25
    # example application
    key_space: int = 1000
    write_fraction: float = 0.2
    write_time: float = 0.0
    lock_timeout: float = 1.0
    rate_horizon: float = 10.0
    out: str = "out"

    def __post_init__(self):
        if self.duration is None:
            self.duration = DEFAULT_DURATION.get(self.workload, 3600)

    @property
    def effective_sub_interval(self):
        return self.sub_interval or self.burst_interval

    @property
    def effective_service_rate(self):
        return self.service_rate or self.qos_capacity

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def validate(self):
        def bad(key, msg):
            raise ScenarioError(msg, key)

        if self.min_size < 2:
            bad("min_size", "min_size must be >= 2 (a pool needs at least two objects), got %d"
                % self.min_size)
        if self.max_size < self.min_size:
            bad("max_size", "max_size must be >= min_size")
        if self.total_slices < 1:
            bad("total_slices", "total_slices must be >= 1")
        if self.spawn_delay < 0:
            bad("spawn_delay", "spawn_delay must be >= 0")
        if not 0 <= self.admin_low_watermark <= self.admin_high_watermark <= 1:
            bad("admin_low_watermark", "watermarks must satisfy 0 <= low <= high <= 1")
        if self.burst_interval <= 0:
            bad("burst_interval", "burst_interval must be positive")
        if self.policy not in POLICIES:
            bad("policy", "policy must be one of %s" % ", ".join(POLICIES))
        if self.workload not in DEFAULT_DURATION:
            bad("workload", "workload must be abrupt or cyclic")
        if self.point_a < 0:
            bad("point_a", "point_a must be >= 0")
        if self.duration < 0:
            bad("duration", "duration must be >= 0")
        if self.cycles < 1:
            bad("cycles", "cycles must be >= 1")
        if self.qos_capacity <= 0:
            bad("qos_capacity", "qos_capacity must be positive")
        if self.strategy not in ("round_robin", "random"):
            bad("strategy", "strategy must be round_robin or random")
        if self.clients < 1:
            bad("clients", "clients must be >= 1")
        if self.delta < 0:
            bad("delta", "delta must be >= 0")
        if self.key_space < 1:
            bad("key_space", "key_space must be >= 1")
        if not 0 <= self.write_fraction <= 1:
            bad("write_fraction", "write_fraction must lie in [0, 1]")
        return self

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _field_types():
    hints = typing.get_type_hints(Scenario)
    out = {}
    for name, tp in hints.items():
        optional = False
        if typing.get_origin(tp) is typing.Union:
            args = [a for a in typing.get_args(tp) if a is not type(None)]
            tp, optional = args[0], True
        out[name] = (tp, optional)
    return out


def _coerce(key, value, line):
    types = _field_types()
    tp, optional = types[key]
    if value is None:
        if optional:
            return None
        raise ScenarioError("%s may not be empty" % key, key, line)
    if tp is float and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if tp is int and isinstance(value, int) and not isinstance(value, bool):
        return value
    if tp is str and isinstance(value, str):
        return value
    raise ScenarioError("%s must be %s, got %r" % (key, tp.__name__, value), key, line)


def _key_lines(text):
    node = yaml.compose(text)
    if node is None:
        return {}
    if not isinstance(node, yaml.MappingNode):
        raise ScenarioError("scenario must be a mapping of key: value", None,
                            node.start_mark.line + 1)
    return {k.value: k.start_mark.line + 1 for k, _ in node.value}


def parse_scenario(text):
    try:
        lines = _key_lines(text)
        raw = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ScenarioError("invalid YAML: %s" % getattr(exc, "problem", exc), None,
                            mark.line + 1 if mark is not None else None)
    known = {f.name for f in fields(Scenario)}
    kwargs = {}
    for key, value in raw.items():
        line = lines.get(key)
        if key not in known:
            raise ScenarioError("unknown key %r" % key, key, line)
        kwargs[key] = _coerce(key, value, line)
    if "seed" not in kwargs:
        raise ScenarioError("seed is mandatory", "seed", None)
    scenario = Scenario(**kwargs)
    try:
        scenario.validate()
    except ScenarioError as exc:
        exc.line = lines.get(exc.key)
        raise
    return scenario


def load_scenario(path):
    with open(path, encoding="utf-8") as fh:
        return parse_scenario(fh.read())


def dump_scenario(scenario):
    return yaml.safe_dump(scenario.to_dict(), sort_keys=False, default_flow_style=False)
