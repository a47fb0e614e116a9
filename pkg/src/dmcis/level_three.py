"""Level three: DPC confidence check, reprocess-by-merge loop, peer exchange."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Deque, Dict, List, Optional, Set, Tuple

from dmcis.core import (
    HazardKind,
    KindMismatch,
    Payload,
    Position,
    Report,
    ReportKind,
    max_severity,
)

NO_HISTORY_FACTOR = 0.8
HISTORY_TOLERANCE = 0.25


class Outcome(str, Enum):
    DISASTER_CONFIRMED = "disaster_confirmed"
    FALSE_ALARM = "false_alarm"


class Disposition(str, Enum):
    FORWARD = "forward"
    REPROCESS = "reprocess"
    FORWARD_FLAGGED = "forward_flagged"


@dataclass(frozen=True)
class HistoryRecord:
    area: str
    kind: HazardKind
    intensity: float
    year_tag: int = 0
    outcome: Outcome = Outcome.DISASTER_CONFIRMED

    def __post_init__(self):
        if self.intensity < 0:
            raise ValueError("history intensity must be >= 0")


@dataclass
class Dpc:
    id: int
    area: str
    position: Position
    confidence_threshold: float = 0.7
    max_reprocess: int = 2
    reprocess_wait: float = 30.0
    processing_time: float = 0.5
    history: List[HistoryRecord] = field(default_factory=list)
    peers: Set[int] = field(default_factory=set)
    cdc: Optional[str] = None
    inbox: Deque[Report] = field(default_factory=deque)
    outbox: List[Report] = field(default_factory=list)
    held: Dict[str, Report] = field(default_factory=dict)
    retries: Dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if not 0 < self.confidence_threshold <= 1:
            raise ValueError(f"dpc {self.id}: confidence_threshold must be in (0, 1]")
        if self.max_reprocess < 0:
            raise ValueError(f"dpc {self.id}: max_reprocess must be >= 0")
        if self.reprocess_wait <= 0:
            raise ValueError(f"dpc {self.id}: reprocess_wait must be > 0")

    @property
    def actor(self) -> str:
        return f"dpc:{self.id}"


def history_supports(history: List[HistoryRecord], area: str, kind: Optional[HazardKind], intensity: float) -> bool:
    for rec in history:
        if (
            rec.area == area
            and rec.kind == kind
            and rec.outcome is Outcome.DISASTER_CONFIRMED
            and abs(intensity - rec.intensity) <= HISTORY_TOLERANCE * rec.intensity
        ):
            return True
    return False


def confidence(
    report: Report,
    dpc: Dpc,
    alive_in_area: int,
    modalities_deployed: int,
    tau: int,
) -> float:
    """Coverage x modality agreement x history factor, normalized by tau.

    A report carrying exactly tau sensors of a single deployed modality with no
    supporting history scores 0.8.
    """
    k = report.payload.k
    if modalities_deployed < 1:
        raise ValueError("modalities_deployed must be >= 1")
    if k < 1 or alive_in_area < 1:
        raise ValueError("need k >= 1 and alive_in_area >= 1")
    coverage = k / alive_in_area
    agreement = len(report.payload.modalities) / modalities_deployed
    supported = history_supports(dpc.history, report.origin_area, report.payload.hypothesis, report.payload.intensity)
    history_factor = 1.0 if supported else NO_HISTORY_FACTOR
    normalizer = tau / alive_in_area
    return min(1.0, coverage * agreement * history_factor / normalizer)


def merge_payload(into: Payload, other: Payload) -> Payload:
    sensors = into.sensors | other.sensors
    return replace(
        into,
        sensors=sensors,
        k=len(sensors),
        modalities=into.modalities | other.modalities,
        intensity=max(into.intensity, other.intensity),
        sources=into.sources | other.sources,
    )


def merge_reports(held: Report, incoming: Report) -> None:
    """Fold ``incoming`` evidence into the held report, in place."""
    held.payload = merge_payload(held.payload, incoming.payload)
    held.severity = max_severity(held.severity, incoming.severity)


def find_held(dpc: Dpc, area: str, kind: Optional[HazardKind]) -> Optional[Report]:
    for rid in sorted(dpc.held):
        r = dpc.held[rid]
        if r.origin_area == area and r.payload.hypothesis == kind:
            return r
    return None


def dpc_process(
    dpc: Dpc,
    report: Report,
    now: float,
    alive_in_area: int = 1,
    modalities_deployed: int = 1,
    tau: int = 1,
) -> Disposition:
    """Confidence gate for one (possibly held) report.

    Below the threshold the report is held for another round while retries
    remain; the caller schedules the retry after ``reprocess_wait`` and merges
    corroborating evidence into ``dpc.held`` meanwhile.
    """
    if report.kind is ReportKind.MANUAL_RECORD:
        return Disposition.FORWARD
    if report.kind is not ReportKind.PARTIALLY_PROCESSED:
        raise KindMismatch(f"dpc cannot process {report.kind.value} report {report.id}")
    retries = dpc.retries.get(report.id, 0)
    c = confidence(report, dpc, max(alive_in_area, report.payload.k), modalities_deployed, tau)
    report.confidence = c
    if c >= dpc.confidence_threshold:
        report.promote(ReportKind.PROCESSED)
        dpc.held.pop(report.id, None)
        return Disposition.FORWARD
    if retries < dpc.max_reprocess:
        dpc.held[report.id] = report
        dpc.retries[report.id] = retries + 1
        return Disposition.REPROCESS
    report.promote(ReportKind.PROCESSED)
    report.low_confidence = True
    dpc.held.pop(report.id, None)
    return Disposition.FORWARD_FLAGGED


def peer_sync(dpc: Dpc, report: Report, now: float, latency: float = 1.0) -> List[Tuple[int, float, Report]]:
    """Summaries of a held report for every peer: ``(peer id, arrival, copy)``."""
    if report.id not in dpc.held:
        raise ValueError(f"report {report.id} is not held at dpc {dpc.id}")
    return [(peer, now + latency, report.copy()) for peer in sorted(dpc.peers)]


def peer_receive(dpc: Dpc, summary: Report) -> Optional[Report]:
    """Merge a peer summary into a matching held report, if there is one."""
    held = find_held(dpc, summary.origin_area, summary.payload.hypothesis)
    if held is not None:
        merge_reports(held, summary)
    return held


def dpc_forward(dpc: Dpc, processed: Report, now: float, latency: float = 2.0) -> float:
    """Queue a processed report for the CDC; returns its arrival time."""
    if processed.kind is not ReportKind.PROCESSED:
        raise KindMismatch(f"only processed reports go to the CDC, got {processed.kind.value}")
    processed.hop(dpc.actor, now)
    dpc.outbox.append(processed)
    return now + latency
