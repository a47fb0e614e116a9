"""Level four: CDC reference matching, DCC dissemination, emergency bypass."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Set

from dmcis.core import DmcisError, KindMismatch, Report, ReportKind, Severity, Violation
from dmcis.level_three import HistoryRecord, Outcome

DEFAULT_DOMINANCE_FACTOR = 4.0


class UnknownArea(DmcisError):
    pass


class SeverityTooLow(DmcisError):
    pass


class Decision(str, Enum):
    WARN = "warn"
    ARCHIVE_ONLY = "archive_only"


@dataclass
class Cdc:
    id: int
    reference_db: List[HistoryRecord] = field(default_factory=list)
    similarity_threshold: float = 0.6
    archive: List[Report] = field(default_factory=list)
    records: List[Report] = field(default_factory=list)

    def __post_init__(self):
        if not 0 < self.similarity_threshold <= 1:
            raise ValueError(f"cdc {self.id}: similarity_threshold must be in (0, 1]")

    @property
    def actor(self) -> str:
        return f"cdc:{self.id}"


@dataclass
class Dcc:
    id: int = 1
    subscribers_per_area: Dict[str, int] = field(default_factory=dict)
    sms_rate: float = 100.0
    sms_base_latency: float = 1.0
    channels: Set[str] = field(default_factory=lambda: {"sms"})

    def __post_init__(self):
        if self.sms_rate <= 0:
            raise ValueError("sms_rate must be > 0")
        if any(m < 0 for m in self.subscribers_per_area.values()):
            raise ValueError("subscriber counts must be >= 0")
        unknown = set(self.channels) - {"sms", "internet_messaging"}
        if unknown:
            raise ValueError(f"unknown dcc channels {sorted(unknown)}")

    @property
    def actor(self) -> str:
        return f"dcc:{self.id}"


@dataclass
class WarningDecision:
    report_id: str
    area: str
    kind: Optional[str]
    similarity: float
    decision: Decision
    decided_at: float
    emergency: bool = False


def cdc_similarity(report: Report, db: List[HistoryRecord]) -> float:
    if report.kind is not ReportKind.PROCESSED:
        raise KindMismatch(f"similarity needs a processed report, got {report.kind.value}")
    x = report.payload.intensity
    best = 0.0
    for rec in db:
        if rec.area != report.origin_area or rec.kind != report.payload.hypothesis:
            continue
        if rec.intensity > 0:
            closeness = 1.0 - min(1.0, abs(x - rec.intensity) / rec.intensity)
        else:
            closeness = 1.0 if x == 0 else 0.0
        weight = 1.0 if rec.outcome is Outcome.DISASTER_CONFIRMED else 0.5
        best = max(best, closeness * weight)
    return best


def cdc_decide(cdc: Cdc, report: Report, now: float) -> WarningDecision:
    """Archive the report and decide whether the DCC should warn.

    Emergency-severity reports warn regardless of the similarity score.
    """
    sim = cdc_similarity(report, cdc.reference_db)
    report.hop(cdc.actor, now)
    cdc.archive.append(report)
    emergency = report.severity is Severity.EMERGENCY
    warn = sim >= cdc.similarity_threshold or emergency
    kind = report.payload.hypothesis.value if report.payload.hypothesis is not None else None
    return WarningDecision(
        report_id=report.id,
        area=report.origin_area,
        kind=kind,
        similarity=sim,
        decision=Decision.WARN if warn else Decision.ARCHIVE_ONLY,
        decided_at=now,
        emergency=emergency,
    )


def dissemination_schedule(dcc: Dcc, decision: WarningDecision, now: float) -> Dict[str, float]:
    """Completion time per enabled channel (fluid SMS model)."""
    if decision.decision is not Decision.WARN:
        raise ValueError("only warn decisions are disseminated")
    if decision.area not in dcc.subscribers_per_area:
        raise UnknownArea(decision.area)
    out = {}
    if "sms" in dcc.channels:
        out["sms"] = now + dcc.sms_base_latency + dcc.subscribers_per_area[decision.area] / dcc.sms_rate
    if "internet_messaging" in dcc.channels:
        out["internet_messaging"] = now + dcc.sms_base_latency
    return out


def dcc_disseminate(dcc: Dcc, decision: WarningDecision, now: float) -> float:
    """Completion time of the warning: ``now + L0 + M / rho`` for SMS."""
    schedule = dissemination_schedule(dcc, decision, now)
    return schedule.get("sms", schedule.get("internet_messaging"))


def bypass(origin: str, report: Report, now: float, latency: float = 0.5) -> float:
    """Time of the direct emergency call from a MAP or DPC."""
    if report.severity is not Severity.EMERGENCY:
        raise SeverityTooLow(f"{report.id} is {report.severity.value}; bypass needs emergency")
    if not (origin.startswith("map:") or origin.startswith("dpc:")):
        raise ValueError(f"bypass origin must be a MAP or DPC, got {origin}")
    return now + latency


def validate_cdc_count(total_dpcs: int, c: int, factor: float = DEFAULT_DOMINANCE_FACTOR) -> List[Violation]:
    if c < 1:
        return [Violation("structure", "scenario needs at least one CDC (c = 0)")]
    if total_dpcs <= c * factor:
        return [
            Violation(
                "dominance",
                f"total DPCs {total_dpcs} <= {factor:g} x CDCs {c}; DPCs must dominate CDCs",
            )
        ]
    return []
