"""Append-only simulation trace written as JSON Lines."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Dict, IO, Iterable, Iterator, List, Optional

from dmcis.core import DmcisError

TRACE_KINDS = (
    "detection",
    "report_emitted",
    "contact_open",
    "contact_close",
    "transfer_complete",
    "report_dropped",
    "dpc_disposition",
    "cdc_decision",
    "warning_issued",
    "dissemination_complete",
    "emergency_call",
    "sensor_failure",
)


class TraceOrderError(DmcisError):
    pass


@dataclass
class TraceEvent:
    t: float
    kind: str
    actor: str
    report: Optional[str] = None
    detail: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in TRACE_KINDS:
            raise ValueError(f"unknown trace kind {self.kind!r}")

    def to_json(self) -> str:
        # fixed top-level order, sorted detail keys: identical runs give identical bytes
        head = json.dumps(
            {"t": self.t, "kind": self.kind, "actor": self.actor, "report": self.report},
            separators=(",", ":"),
            allow_nan=False,
        )
        detail = json.dumps(self.detail, separators=(",", ":"), sort_keys=True, default=_jsonable, allow_nan=False)
        return head[:-1] + ',"detail":' + detail + "}"

    @classmethod
    def from_dict(cls, rec: Dict[str, Any]) -> "TraceEvent":
        return cls(rec["t"], rec["kind"], rec["actor"], rec.get("report"), rec.get("detail") or {})


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, (set, frozenset)):
        return sorted(obj)
    if hasattr(obj, "value"):
        return obj.value
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


class TraceWriter:
    """Single-writer trace sink that refuses out-of-order appends."""

    def __init__(self, sink: Optional[IO[str]] = None, keep: bool = True):
        self.sink = sink
        self.events: List[TraceEvent] = [] if keep else None  # type: ignore[assignment]
        self.last_t = float("-inf")
        self.count = 0

    def emit(self, event: TraceEvent) -> None:
        if event.t < self.last_t:
            raise TraceOrderError(f"trace event at t={event.t} after t={self.last_t}")
        self.last_t = event.t
        self.count += 1
        if self.events is not None:
            self.events.append(event)
        if self.sink is not None:
            self.sink.write(event.to_json())
            self.sink.write("\n")

    def __call__(self, t: float, kind: str, actor: str, report: Optional[str] = None, /, **detail: Any) -> None:
        self.emit(TraceEvent(t, kind, actor, report, detail))


def emit_trace(events: Iterable[TraceEvent], sink: IO[str]) -> int:
    writer = TraceWriter(sink, keep=False)
    for ev in events:
        writer.emit(ev)
    return writer.count


def dumps_trace(events: Iterable[TraceEvent]) -> str:
    return "".join(ev.to_json() + "\n" for ev in events)


def read_trace(lines: Iterable[str]) -> Iterator[TraceEvent]:
    for line in lines:
        line = line.strip()
        if line:
            yield TraceEvent.from_dict(json.loads(line))


def load_trace(path) -> List[TraceEvent]:
    with open(path, encoding="utf-8") as fh:
        return list(read_trace(fh))
