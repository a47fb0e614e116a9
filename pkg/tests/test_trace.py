import io
import json

import pytest

from dmcis.core import Severity
from dmcis.trace import TraceEvent, TraceOrderError, TraceWriter, dumps_trace, emit_trace, read_trace


def test_zero_events_empty_file():
    sink = io.StringIO()
    assert emit_trace([], sink) == 0
    assert sink.getvalue() == ""


def test_stable_field_order_and_sorted_detail():
    ev = TraceEvent(1.5, "report_emitted", "sdcc:1", "sdcc1-1", {"z": 1, "a": {3, 1}, "sev": Severity.URGENT})
    line = ev.to_json()
    assert line == ('{"t":1.5,"kind":"report_emitted","actor":"sdcc:1","report":"sdcc1-1",'
                    '"detail":{"a":[1,3],"sev":"urgent","z":1}}')
    assert list(json.loads(line)) == ["t", "kind", "actor", "report", "detail"]


def test_out_of_order_rejected():
    w = TraceWriter(io.StringIO())
    w(2.0, "detection", "sensor:1")
    w(2.0, "detection", "sensor:2")
    with pytest.raises(TraceOrderError):
        w(1.0, "detection", "sensor:3")


def test_detail_may_use_reserved_names():
    w = TraceWriter()
    w(0.0, "report_emitted", "sdcc:1", "r", kind="partially_processed", actor="x")
    assert w.events[0].detail == {"kind": "partially_processed", "actor": "x"}


def test_read_back():
    events = [TraceEvent(0.0, "detection", "sensor:1", None, {"value": 2.0}),
              TraceEvent(1.0, "report_emitted", "sdcc:1", "r1", {"k": 3})]
    text = dumps_trace(events)
    back = list(read_trace(io.StringIO(text)))
    assert dumps_trace(back) == text
