"""Level one: sensor sampling and tau-threshold aggregation at the SDCC."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Collection, Dict, Iterable, List, Optional

from dmcis.core import (
    Buffer,
    DmcisError,
    HazardField,
    HazardKind,
    KindMismatch,
    Payload,
    Position,
    Report,
    ReportKind,
    distance,
    hazard_value,
    severity_of,
)

MODALITIES = ("acoustic", "magnetic", "seismic", "thermal", "infrared", "visual")


class EmptyDeployment(DmcisError):
    pass


@dataclass
class SensorNode:
    id: int
    position: Position
    home_sdcc: int
    modality: str = "acoustic"
    detect_threshold: float = 1.0
    sample_period: float = 10.0
    phase: float = 0.0
    alive: bool = True
    cluster: Optional[str] = None

    def __post_init__(self):
        if self.modality not in MODALITIES:
            raise ValueError(f"sensor {self.id}: unknown modality {self.modality!r}")
        if self.detect_threshold <= 0:
            raise ValueError(f"sensor {self.id}: detect_threshold must be > 0")
        if self.sample_period <= 0:
            raise ValueError(f"sensor {self.id}: sample_period must be > 0")


@dataclass
class Cluster:
    id: str
    head: int
    members: List[int]
    hop_delay: float = 0.0
    # member id -> distance to the SDCC; drives head election
    reach: Dict[int, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.head not in self.members:
            raise ValueError(f"cluster {self.id}: head {self.head} not a member")


@dataclass
class Detection:
    sensor: int
    at: float  # arrival time at the SDCC
    value: float
    modality: str
    sampled_at: float = 0.0
    source: Optional[str] = None
    position: Optional[Position] = None


@dataclass
class Sdcc:
    id: int
    area: str
    position: Position
    tau: int
    window: float = 60.0
    refractory: float = 300.0
    window_step: Optional[float] = None
    report_size_bytes: int = 1_000_000
    hypothesis: HazardKind = HazardKind.FLOOD
    detection_buffer: List[Detection] = field(default_factory=list)
    outbox: Buffer = field(default_factory=Buffer)
    manual_records: List[Report] = field(default_factory=list)
    last_emit: Optional[float] = None
    emitted: int = 0

    def __post_init__(self):
        if self.tau < 1:
            raise ValueError(f"sdcc {self.id}: tau must be >= 1")
        if self.window <= 0:
            raise ValueError(f"sdcc {self.id}: window must be > 0")
        if self.refractory < 0:
            raise ValueError(f"sdcc {self.id}: refractory must be >= 0")
        if self.window_step is None:
            self.window_step = self.window

    @property
    def actor(self) -> str:
        return f"sdcc:{self.id}"


def _closest(candidates: Iterable[int], reach: Dict[int, float]) -> int:
    return min(candidates, key=lambda sid: (reach[sid], sid))


def form_clusters(
    sensors: List[SensorNode],
    sdccs: List[Sdcc],
    k_per_cluster: int,
    hop_delay: float = 0.0,
) -> List[Cluster]:
    """Partition each SDCC's sensors into clusters of at most ``k_per_cluster``.

    Sensors are ordered by (distance to their SDCC, id) and cut into
    consecutive chunks; each chunk's head is its member nearest the SDCC.
    """
    if k_per_cluster < 1:
        raise ValueError("k_per_cluster must be >= 1")
    by_sdcc: Dict[int, List[SensorNode]] = {s.id: [] for s in sdccs}
    for sensor in sensors:
        if sensor.home_sdcc not in by_sdcc:
            raise ValueError(f"sensor {sensor.id}: unknown home_sdcc {sensor.home_sdcc}")
        by_sdcc[sensor.home_sdcc].append(sensor)

    clusters = []
    for sdcc in sorted(sdccs, key=lambda s: s.id):
        members = by_sdcc[sdcc.id]
        if not members:
            raise EmptyDeployment(f"sdcc {sdcc.id} has no sensors")
        reach = {s.id: distance(s.position, sdcc.position) for s in members}
        ordered = sorted(members, key=lambda s: (reach[s.id], s.id))
        for n, start in enumerate(range(0, len(ordered), k_per_cluster)):
            chunk = [s.id for s in ordered[start:start + k_per_cluster]]
            cid = f"{sdcc.id}.{n + 1}"
            clusters.append(
                Cluster(
                    id=cid,
                    head=_closest(chunk, reach),
                    members=chunk,
                    hop_delay=hop_delay,
                    reach={sid: reach[sid] for sid in chunk},
                )
            )
            for s in ordered[start:start + k_per_cluster]:
                s.cluster = cid
    return clusters


def reelect_head(cluster: Cluster, failed: int) -> Optional[Cluster]:
    """Drop ``failed`` from the cluster; returns None when the cluster empties."""
    if failed not in cluster.members:
        raise ValueError(f"sensor {failed} is not in cluster {cluster.id}")
    members = [m for m in cluster.members if m != failed]
    if not members:
        return None
    head = cluster.head if cluster.head != failed else _closest(members, cluster.reach)
    reach = {m: cluster.reach[m] for m in members}
    return Cluster(id=cluster.id, head=head, members=members, hop_delay=cluster.hop_delay, reach=reach)


def sample(
    sensor: SensorNode,
    field: HazardField,
    t: float,
    rng_draw: float = 0.0,
    hop_delay: float = 0.0,
) -> Optional[Detection]:
    if not sensor.alive:
        raise ValueError(f"sensor {sensor.id} is not alive")
    v = hazard_value(field, sensor.position, t, rng_draw)
    if v < sensor.detect_threshold:
        return None
    source = None
    best = 0.0
    for event in field.events:
        if event.active_at(t):
            c = event.contribution(sensor.position)
            if c > best:
                best, source = c, event.id
    return Detection(
        sensor=sensor.id,
        at=t + 2.0 * hop_delay,
        value=v,
        modality=sensor.modality,
        sampled_at=t,
        source=source,
        position=sensor.position,
    )


def sdcc_aggregate(
    sdcc: Sdcc,
    now: float,
    alive: Optional[Callable[[int], bool] | Collection[int]] = None,
    cuts=None,
) -> Optional[Report]:
    """Apply the tau rule over the window ``(now - W, now]``.

    Each alive sensor counts once however often it detected; the intensity is
    the maximum over all of the window's detections. Detections that have not
    yet arrived (``at > now``) stay buffered.
    """
    lo = now - sdcc.window
    sdcc.detection_buffer = [d for d in sdcc.detection_buffer if d.at > lo]
    if alive is None:
        is_alive = lambda sid: True  # noqa: E731
    elif callable(alive):
        is_alive = alive
    else:
        is_alive = alive.__contains__

    current = [d for d in sdcc.detection_buffer if d.at <= now and is_alive(d.sensor)]
    latest: Dict[int, Detection] = {}
    for d in current:
        latest[d.sensor] = d
    k = len(latest)
    if k < sdcc.tau:
        return None
    if sdcc.last_emit is not None and now < sdcc.last_emit + sdcc.refractory:
        return None

    window = [latest[sid] for sid in sorted(latest)]
    intensity = max(d.value for d in current)
    pts = [d.position for d in window if d.position is not None]
    centroid = (
        Position(sum(p.x for p in pts) / len(pts), sum(p.y for p in pts) / len(pts)) if pts else sdcc.position
    )
    sdcc.emitted += 1
    sdcc.last_emit = now
    report = Report(
        id=f"sdcc{sdcc.id}-{sdcc.emitted}",
        kind=ReportKind.PARTIALLY_PROCESSED,
        origin_area=sdcc.area,
        created_at=now,
        size_bytes=sdcc.report_size_bytes,
        severity=severity_of(sdcc.hypothesis, intensity, cuts),
        payload=Payload(
            k=k,
            modalities=frozenset(d.modality for d in window),
            intensity=intensity,
            epicenter=centroid,
            hypothesis=sdcc.hypothesis,
            sensors=frozenset(latest),
            sources=frozenset(d.source for d in current if d.source is not None),
        ),
        origin=sdcc.actor,
    )
    report.hop(sdcc.actor, now)
    return report


def sdcc_insert_manual(sdcc: Sdcc, record: Report) -> None:
    if record.kind is not ReportKind.MANUAL_RECORD:
        raise KindMismatch(f"expected manual_record, got {record.kind.value}")
    sdcc.manual_records.append(record)
    sdcc.outbox.append(record)
