"""Domain types shared by every level, planar geometry and the hazard field."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Deque, Dict, FrozenSet, List, Optional, Tuple


class DmcisError(Exception):
    """Base class for all domain errors raised by the simulator."""


class KindMismatch(DmcisError):
    pass


class DestinationFull(DmcisError):
    pass


class HazardKind(str, Enum):
    FLOOD = "flood"
    TSUNAMI = "tsunami"
    EARTHQUAKE = "earthquake"
    CYCLONE = "cyclone"
    LANDSLIDE = "landslide"
    FALSE_SPIKE = "false_spike"


class Severity(str, Enum):
    ROUTINE = "routine"
    URGENT = "urgent"
    EMERGENCY = "emergency"

    @property
    def rank(self) -> int:
        return _SEVERITY_RANK[self]


_SEVERITY_RANK = {Severity.ROUTINE: 0, Severity.URGENT: 1, Severity.EMERGENCY: 2}


def max_severity(a: Severity, b: Severity) -> Severity:
    return a if a.rank >= b.rank else b


class ReportKind(str, Enum):
    RAW = "raw"
    PARTIALLY_PROCESSED = "partially_processed"
    PROCESSED = "processed"
    MANUAL_RECORD = "manual_record"
    WARNING_REQUEST = "warning_request"
    EMERGENCY_CALL = "emergency_call"


# forward-only processing chain
_KIND_STAGE = {
    ReportKind.RAW: 0,
    ReportKind.PARTIALLY_PROCESSED: 1,
    ReportKind.PROCESSED: 2,
}


@dataclass(frozen=True)
class Position:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite position ({self.x}, {self.y})")

    def as_list(self) -> List[float]:
        return [self.x, self.y]


def distance(p: Position, q: Position) -> float:
    """Euclidean distance in meters.

    Computed as ``sqrt(dx*dx + dy*dy)`` so the compiled kernels, which use the
    same expression, agree bit for bit.
    """
    dx = p.x - q.x
    dy = p.y - q.y
    return math.sqrt(dx * dx + dy * dy)


@dataclass(frozen=True)
class HazardEvent:
    id: str
    kind: HazardKind
    epicenter: Position
    radius: float
    onset: float
    duration: float
    peak_intensity: float
    severity: Severity = Severity.URGENT
    ground_truth_warnable: bool = True

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError(f"hazard {self.id}: radius must be > 0")
        if self.duration <= 0:
            raise ValueError(f"hazard {self.id}: duration must be > 0")
        if self.peak_intensity < 0:
            raise ValueError(f"hazard {self.id}: peak_intensity must be >= 0")
        if self.onset < 0:
            raise ValueError(f"hazard {self.id}: onset must be >= 0")
        if self.kind is HazardKind.FALSE_SPIKE and self.ground_truth_warnable:
            raise ValueError(f"hazard {self.id}: false_spike cannot be warnable")

    @property
    def end(self) -> float:
        return self.onset + self.duration

    def active_at(self, t: float) -> bool:
        return self.onset <= t < self.end

    def contribution(self, p: Position) -> float:
        return self.peak_intensity * max(0.0, 1.0 - distance(p, self.epicenter) / self.radius)


@dataclass
class HazardField:
    events: List[HazardEvent] = field(default_factory=list)
    background_noise_sigma: float = 0.0

    def __post_init__(self):
        if self.background_noise_sigma < 0:
            raise ValueError("background_noise_sigma must be >= 0")
        ids = [e.id for e in self.events]
        if len(set(ids)) != len(ids):
            raise ValueError("hazard event ids must be unique")

    def active(self, t: float) -> List[HazardEvent]:
        return [e for e in self.events if e.active_at(t)]


def hazard_value(field: HazardField, p: Position, t: float, rng_draw: float = 0.0) -> float:
    """Intensity at ``p`` and time ``t``.

    ``rng_draw`` is a standard-normal draw; the noise term is
    ``background_noise_sigma * rng_draw``. The result is clamped at zero.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    total = 0.0
    for event in field.events:
        if event.active_at(t):
            total += event.contribution(p)
    total += field.background_noise_sigma * rng_draw
    return max(0.0, total)


# (urgent cut, emergency cut); None means emergency at any detected intensity
DEFAULT_SEVERITY_CUTS: Dict[HazardKind, Optional[Tuple[float, float]]] = {
    HazardKind.FLOOD: (5.0, 15.0),
    HazardKind.TSUNAMI: (3.0, 8.0),
    HazardKind.CYCLONE: (5.0, 15.0),
    HazardKind.FALSE_SPIKE: (5.0, 15.0),
    HazardKind.EARTHQUAKE: None,
    HazardKind.LANDSLIDE: None,
}


def severity_of(
    kind: HazardKind,
    intensity: float,
    cuts: Optional[Dict[HazardKind, Optional[Tuple[float, float]]]] = None,
) -> Severity:
    if intensity < 0:
        raise ValueError("intensity must be >= 0")
    table = DEFAULT_SEVERITY_CUTS if cuts is None else {**DEFAULT_SEVERITY_CUTS, **cuts}
    kind_cuts = table[HazardKind(kind)]
    if kind_cuts is None:
        return Severity.EMERGENCY
    urgent, emergency = kind_cuts
    if intensity >= emergency:
        return Severity.EMERGENCY
    if intensity >= urgent:
        return Severity.URGENT
    return Severity.ROUTINE


@dataclass
class Payload:
    """Summary carried by a report.

    ``sensors`` keeps the distinct reporting sensor ids so summaries from
    different collection centers can be merged as a set union. ``sources``
    holds the hazard event ids behind the detections (ground truth, used only
    for metrics).
    """

    k: int = 0
    modalities: FrozenSet[str] = frozenset()
    intensity: float = 0.0
    epicenter: Optional[Position] = None
    hypothesis: Optional[HazardKind] = None
    sensors: FrozenSet[int] = frozenset()
    sources: FrozenSet[str] = frozenset()
    note: str = ""


@dataclass
class Report:
    id: str
    kind: ReportKind
    origin_area: str
    created_at: float
    size_bytes: int
    severity: Severity = Severity.ROUTINE
    payload: Payload = field(default_factory=Payload)
    provenance: List[Tuple[str, float]] = field(default_factory=list)
    confidence: Optional[float] = None
    origin: str = ""
    low_confidence: bool = False

    def __post_init__(self):
        if self.size_bytes <= 0:
            raise ValueError(f"report {self.id}: size_bytes must be > 0")

    def hop(self, actor: str, t: float) -> None:
        if self.provenance and t < self.provenance[-1][1]:
            raise ValueError(f"report {self.id}: provenance must be time-ordered")
        self.provenance.append((actor, t))

    def promote(self, kind: ReportKind) -> None:
        cur = _KIND_STAGE.get(self.kind)
        new = _KIND_STAGE.get(kind)
        if cur is None or new is None or new < cur:
            raise KindMismatch(f"report {self.id}: cannot go {self.kind.value} -> {kind.value}")
        self.kind = kind

    def copy(self) -> "Report":
        return replace(self, provenance=list(self.provenance), payload=replace(self.payload))


@dataclass(frozen=True)
class Violation:
    """A scenario condition that does not hold; ``code`` is stable for scripts."""

    code: str
    message: str
    area: Optional[str] = None

    def __str__(self) -> str:
        return f"[{self.code}] {self.message}"


class Buffer:
    """FIFO report store bounded in bytes. ``reserved`` covers in-flight inbound reports."""

    def __init__(self, capacity: float = float("inf")):
        self.capacity = capacity
        self.reports: Deque[Report] = deque()
        self.used = 0
        self.reserved = 0
        self.peak = 0
        self.bytes_in = 0
        self.bytes_out = 0

    def __len__(self) -> int:
        return len(self.reports)

    def __iter__(self):
        return iter(self.reports)

    @property
    def free(self) -> float:
        return self.capacity - self.used - self.reserved

    def fits(self, report: Report) -> bool:
        return report.size_bytes <= self.free

    def append(self, report: Report) -> None:
        if report.size_bytes > self.capacity - self.used:
            raise DestinationFull(f"{report.id} ({report.size_bytes} B) does not fit")
        self.reports.append(report)
        self.used += report.size_bytes
        self.bytes_in += report.size_bytes
        self.peak = max(self.peak, self.used)

    def remove(self, report: Report) -> None:
        self.reports.remove(report)
        self.used -= report.size_bytes
        self.bytes_out += report.size_bytes
