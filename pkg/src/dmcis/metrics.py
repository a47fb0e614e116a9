"""Run metrics computed from a trace and its scenario, with JSON and CSV writers."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Sequence

from dmcis.scenario import Scenario
from dmcis.trace import TraceEvent


def mean(xs: Sequence[float]) -> Optional[float]:
    return sum(xs) / len(xs) if xs else None


def p95(xs: Sequence[float]) -> Optional[float]:
    """Nearest-rank 95th percentile."""
    if not xs:
        return None
    s = sorted(xs)
    return s[max(0, math.ceil(0.95 * len(s)) - 1)]


@dataclass
class EventMetrics:
    event: str
    kind: str
    warnable: bool
    onset: float
    detection_latency: Optional[float] = None
    bypass_latency: Optional[float] = None
    reports_emitted: int = 0
    reports_delivered: int = 0
    warnings: int = 0
    false_warnings: int = 0
    missed: bool = False


@dataclass
class MetricsReport:
    events: List[EventMetrics] = field(default_factory=list)
    summary: Dict[str, Any] = field(default_factory=dict)
    # raw samples behind the summary statistics; not serialized
    detection_latencies: List[float] = field(default_factory=list, repr=False)
    delivery_latencies: List[float] = field(default_factory=list, repr=False)

    def to_dict(self) -> Dict[str, Any]:
        return {"events": [asdict(e) for e in self.events], "summary": dict(self.summary)}


def _as_event(e: Any) -> TraceEvent:
    return e if isinstance(e, TraceEvent) else TraceEvent.from_dict(e)


def compute_metrics(trace: Iterable[Any], scenario: Scenario) -> MetricsReport:
    """Pure function of the trace and the scenario's hazard ground truth.

    A warning is false when none of the hazard events behind its detections
    is warnable (this includes warnings built on noise alone).
    """
    events = [_as_event(e) for e in trace]
    hazards = scenario.hazard_field().events
    warnable = {h.id: h.ground_truth_warnable for h in hazards}
    per = {
        h.id: EventMetrics(event=h.id, kind=h.kind.value, warnable=h.ground_truth_warnable, onset=h.onset)
        for h in hazards
    }

    emitted_at: Dict[str, float] = {}
    sources: Dict[str, List[str]] = {}
    delivered_at: Dict[str, float] = {}
    dropped = set()
    occupancy: Dict[str, int] = {}
    peaks: Dict[str, int] = {}
    warnings = 0
    false_warnings = 0
    false_events = set()
    bypass_lat: List[float] = []

    def occupy(actor: str, delta: int) -> None:
        occupancy[actor] = occupancy.get(actor, 0) + delta
        peaks[actor] = max(peaks.get(actor, 0), occupancy[actor])

    for e in events:
        d = e.detail
        if e.kind == "report_emitted":
            emitted_at[e.report] = e.t
            sources[e.report] = list(d.get("sources", []))
            occupy(e.actor, d["size_bytes"])
            for src in sources[e.report]:
                if src in per:
                    per[src].reports_emitted += 1
        elif e.kind == "report_dropped":
            dropped.add(e.report)
            occupy(e.actor, -d["size_bytes"])
        elif e.kind == "transfer_complete":
            occupy(e.actor, -d["bytes"])
            to = d["to"]
            if to.startswith("map:"):
                occupy(to, d["bytes"])
            elif to.startswith("dpc:") and e.report not in delivered_at:
                delivered_at[e.report] = e.t
                for src in sources.get(e.report, []):
                    if src in per:
                        per[src].reports_delivered += 1
        elif e.kind == "warning_issued":
            warnings += 1
            srcs = [s for s in d.get("sources", []) if s in per]
            if not any(warnable[s] for s in srcs):
                false_warnings += 1
                for s in srcs:
                    per[s].false_warnings += 1
                    false_events.add(s)
            for s in srcs:
                m = per[s]
                m.warnings += 1
                if m.detection_latency is None:
                    m.detection_latency = e.t - m.onset
        elif e.kind == "emergency_call":
            for s in d.get("sources", []):
                if s in per and per[s].bypass_latency is None:
                    per[s].bypass_latency = e.t - per[s].onset
                    bypass_lat.append(per[s].bypass_latency)

    for m in per.values():
        m.missed = m.warnable and m.detection_latency is None

    emitted = len(emitted_at)
    delivered = len(delivered_at)
    det_lat = [m.detection_latency for m in per.values() if m.warnable and m.detection_latency is not None]
    del_lat = [delivered_at[r] - emitted_at[r] for r in sorted(delivered_at) if r in emitted_at]
    non_warnable = [h for h in per.values() if not h.warnable]
    maps = {a: v for a, v in peaks.items() if a.startswith("map:")}
    sdccs = {a: v for a, v in peaks.items() if a.startswith("sdcc:")}

    summary = {
        "emitted": emitted,
        "delivered": delivered,
        "dropped": len(dropped),
        "buffered": emitted - delivered - len(dropped),
        "delivery_ratio": delivered / emitted if emitted else None,
        "warnings": warnings,
        "false_warnings": false_warnings,
        "false_warning_rate": len(false_events) / len(non_warnable) if non_warnable else None,
        "missed": sum(1 for m in per.values() if m.missed),
        "detection_latency_mean": mean(det_lat),
        "detection_latency_p95": p95(det_lat),
        "delivery_latency_mean": mean(del_lat),
        "delivery_latency_p95": p95(del_lat),
        "bypass_latency_mean": mean(bypass_lat),
        "max_map_buffer_bytes": max(maps.values(), default=0),
        "max_sdcc_buffer_bytes": max(sdccs.values(), default=0),
        "buffer_peaks": {a: peaks[a] for a in sorted(peaks) if a.startswith(("map:", "sdcc:"))},
    }
    return MetricsReport(
        events=[per[k] for k in sorted(per)],
        summary=summary,
        detection_latencies=det_lat,
        delivery_latencies=del_lat,
    )


def metrics_json(report: MetricsReport) -> str:
    return json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"


EVENT_COLUMNS = [f for f in EventMetrics.__dataclass_fields__]
SUMMARY_COLUMNS = [
    "emitted", "delivered", "dropped", "buffered", "delivery_ratio", "warnings", "false_warnings",
    "false_warning_rate", "missed", "detection_latency_mean", "detection_latency_p95",
    "delivery_latency_mean", "delivery_latency_p95", "bypass_latency_mean",
    "max_map_buffer_bytes", "max_sdcc_buffer_bytes",
]
CSV_COLUMNS = ["row"] + EVENT_COLUMNS + [c for c in SUMMARY_COLUMNS if c not in EVENT_COLUMNS]


def _cell(v: Any) -> Any:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    return v


def metrics_csv(report: MetricsReport) -> str:
    """One row per hazard event plus a final summary row; blanks mean undefined."""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for e in report.events:
        row = {k: _cell(v) for k, v in asdict(e).items()}
        row["row"] = "event"
        w.writerow(row)
    row = {k: _cell(report.summary.get(k)) for k in SUMMARY_COLUMNS}
    row["row"] = "summary"
    w.writerow(row)
    return buf.getvalue()


def write_metrics(report: MetricsReport, path: str) -> None:
    """Write ``path`` as JSON, or as CSV when it ends in ``.csv``.

    For a JSON path the CSV lands next to it with the suffix swapped.
    """
    if path.endswith(".csv"):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(metrics_csv(report))
        return
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(metrics_json(report))
    stem = path[:-5] if path.endswith(".json") else path
    with open(stem + ".csv", "w", encoding="utf-8", newline="") as fh:
        fh.write(metrics_csv(report))
