"""Structured ``key=value`` event records.

Every lifecycle or decision event is kept in memory (benchmarks read it back)
and mirrored to :mod:`logging` as a single ``event=<name> k=v ...`` line.
"""

import logging

logger = logging.getLogger("elasticpool.events")


def format_record(record):
    parts = ["event=%s" % record["event"]]
    for key, value in record.items():
        if key == "event":
            continue
        if isinstance(value, float):
            value = "%g" % value
        parts.append("%s=%s" % (key, value))
    return " ".join(parts)


class EventLog:
    def __init__(self, clock=None, sink=None):
        self.clock = clock
        self.records = []
        self.sink = sink if sink is not None else logger

    def emit(self, event, **fields):
        record = {"event": event}
        record.update(fields)
        if "t" not in record and self.clock is not None:
            record["t"] = self.clock.now()
        self.records.append(record)
        if self.sink.isEnabledFor(logging.INFO):
            self.sink.info(format_record(record))
        return record

    def select(self, event=None, **match):
        out = []
        for rec in self.records:
            if event is not None and rec["event"] != event:
                continue
            if all(rec.get(k) == v for k, v in match.items()):
                out.append(rec)
        return out

    def lines(self):
        return [format_record(r) for r in self.records]
