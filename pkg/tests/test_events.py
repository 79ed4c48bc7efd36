import logging

from elasticpool.clock import VirtualClock
from elasticpool.events import EventLog, format_record


def test_format_record_is_key_value():
    line = format_record({"event": "spawn", "pool": "p", "uid": 3, "t": 5.0})
    assert line == "event=spawn pool=p uid=3 t=5"


def test_emit_stamps_time_and_selects():
    clock = VirtualClock(start=2.5)
    log = EventLog(clock)
    log.emit("elect", pool="p", uid=1)
    log.emit("spawn", pool="q", uid=2)
    assert log.records[0]["t"] == 2.5
    assert [r["uid"] for r in log.select("elect")] == [1]
    assert [r["uid"] for r in log.select(pool="q")] == [2]
    assert log.lines()[0] == "event=elect pool=p uid=1 t=2.5"


def test_emit_mirrors_to_logging(caplog):
    log = EventLog(VirtualClock())
    with caplog.at_level(logging.INFO, logger="elasticpool.events"):
        log.emit("stop", pool="p", uid=4)
    assert "event=stop pool=p uid=4 t=0" in caplog.text
