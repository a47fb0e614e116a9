"""Level two: MAP mobility, contact formation, channel-limited transfer."""

from __future__ import annotations

import bisect
from array import array
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from dmcis import kernels
from dmcis.core import Buffer, DestinationFull, Position, Violation, distance


# standard -> (nominal Mbps, non-overlapping channels, default range m)
RADIO_STANDARDS: Dict[str, Tuple[float, int, float]] = {
    "b": (11.0, 3, 250.0),
    "g": (54.0, 3, 250.0),
    "a": (54.0, 12, 150.0),
}
DEFAULT_EFFICIENCY = 0.5


@dataclass(frozen=True)
class RadioProfile:
    standard: str
    nominal_rate: float
    range: float
    channels: int
    efficiency: float = DEFAULT_EFFICIENCY

    def __post_init__(self):
        if self.standard not in RADIO_STANDARDS:
            raise ValueError(f"unknown radio standard {self.standard!r}")
        if self.channels < 1:
            raise ValueError("channels must be >= 1")
        if not 0 < self.efficiency <= 1:
            raise ValueError("efficiency must be in (0, 1]")
        if self.range <= 0 or self.nominal_rate <= 0:
            raise ValueError("range and nominal_rate must be > 0")

    @classmethod
    def of(cls, standard: str, range: Optional[float] = None, efficiency: float = DEFAULT_EFFICIENCY):
        rate, channels, default_range = RADIO_STANDARDS[standard]
        return cls(standard, rate, default_range if range is None else range, channels, efficiency)

    @property
    def effective_rate(self) -> float:
        """Application throughput in Mbps."""
        return self.nominal_rate * self.efficiency


def transfer_time(size_bytes: int, rate_mbps: float) -> float:
    """Seconds to push ``size_bytes`` over an effective ``rate_mbps`` link."""
    return size_bytes * 8 / (rate_mbps * 1e6)


@dataclass
class MapNode:
    id: int
    route: List[Position]
    speed: float
    radio: RadioProfile
    capacity: float = 50_000_000
    area: str = ""
    start_offset: float = 0.0  # meters along the lap at t=0
    buffer: Buffer = field(init=False)
    _cum: List[float] = field(init=False, repr=False)

    def __post_init__(self):
        if len(self.route) < 2:
            raise ValueError(f"map {self.id}: route needs >= 2 waypoints")
        if self.speed <= 0:
            raise ValueError(f"map {self.id}: speed must be > 0")
        self.buffer = Buffer(self.capacity)
        cum = [0.0]
        n = len(self.route)
        for i in range(n):
            cum.append(cum[-1] + distance(self.route[i], self.route[(i + 1) % n]))
        self._cum = cum

    @property
    def actor(self) -> str:
        return f"map:{self.id}"

    @property
    def lap_length(self) -> float:
        return self._cum[-1]

    @property
    def lap_time(self) -> float:
        return self.lap_length / self.speed


def map_position(m: MapNode, t: float) -> Position:
    """Position on the cyclic route at constant speed."""
    if t < 0:
        raise ValueError("t must be >= 0")
    lap = m.lap_length
    if lap == 0.0:
        return m.route[0]
    s = (m.start_offset + m.speed * t) % lap
    cum = m._cum
    leg = bisect.bisect_right(cum, s) - 1
    leg = min(max(leg, 0), len(m.route) - 1)
    seg = cum[leg + 1] - cum[leg]
    if seg == 0.0:
        return m.route[leg]
    a = m.route[leg]
    b = m.route[(leg + 1) % len(m.route)]
    f = (s - cum[leg]) / seg
    return Position(a.x + (b.x - a.x) * f, a.y + (b.y - a.y) * f)


def needs_ferry(sdcc_pos: Position, dpc_pos: Position, delta: float, same_center: bool = False) -> bool:
    """True when the pair is at least ``delta`` apart (strict ``<`` means direct)."""
    if delta <= 0:
        raise ValueError("delta must be > 0")
    if same_center:
        return False
    return not distance(sdcc_pos, dpc_pos) < delta


@dataclass
class Station:
    """A fixed endpoint (SDCC or DPC) as seen by the contact layer."""

    actor: str
    position: Position
    radio: RadioProfile
    order: Tuple[int, int] = (0, 0)  # (class rank, id) for arbitration


@dataclass
class Contact:
    map_id: int
    station: str
    opened_at: float
    rate: float  # effective Mbps
    active_transfer: Optional[str] = None
    progress: float = 0.0  # bytes of the active report already sent
    started_at: float = 0.0
    token: int = 0

    @property
    def endpoints(self) -> Tuple[str, str]:
        return (f"map:{self.map_id}", self.station)


class ContactTable:
    """Open contacts plus per-node channel accounting."""

    def __init__(self):
        self.open: Dict[Tuple[int, str], Contact] = {}
        self.usage: Dict[str, int] = {}

    def count(self, actor: str) -> int:
        return self.usage.get(actor, 0)

    def by_station(self, station: str) -> List[Contact]:
        return [c for key, c in sorted(self.open.items()) if key[1] == station]

    def by_map(self, map_id: int) -> List[Contact]:
        return [c for key, c in sorted(self.open.items()) if key[0] == map_id]

    def _add(self, c: Contact) -> None:
        self.open[(c.map_id, c.station)] = c
        for a in c.endpoints:
            self.usage[a] = self.usage.get(a, 0) + 1

    def close(self, c: Contact) -> None:
        del self.open[(c.map_id, c.station)]
        for a in c.endpoints:
            self.usage[a] -= 1


def check_contacts(
    maps: Sequence[MapNode],
    stations: Sequence[Station],
    table: ContactTable,
    t: float,
    positions: Optional[Sequence[Position]] = None,
) -> List[Tuple[str, Contact]]:
    """Close contacts that left range, then open new ones where channels allow.

    Candidate pairs are considered in ascending (map id, station order), so
    under channel pressure the lowest ids win and the rest wait.
    Returns ``[("close"|"open", contact), ...]`` in the order applied.
    """
    if positions is None:
        positions = [map_position(m, t) for m in maps]
    mask = kernels.in_range_mask(
        array("d", [p.x for p in positions]),
        array("d", [p.y for p in positions]),
        array("d", [m.radio.range for m in maps]),
        array("d", [s.position.x for s in stations]),
        array("d", [s.position.y for s in stations]),
        array("d", [s.radio.range for s in stations]),
    )
    ns = len(stations)
    midx = {m.id: i for i, m in enumerate(maps)}
    sidx = {s.actor: j for j, s in enumerate(stations)}
    transitions: List[Tuple[str, Contact]] = []

    for key in sorted(table.open):
        c = table.open[key]
        if not mask[midx[c.map_id] * ns + sidx[c.station]]:
            table.close(c)
            transitions.append(("close", c))

    order = sorted(range(ns), key=lambda j: stations[j].order)
    for i in sorted(range(len(maps)), key=lambda i: maps[i].id):
        m = maps[i]
        for j in order:
            if not mask[i * ns + j]:
                continue
            s = stations[j]
            if (m.id, s.actor) in table.open:
                continue
            if table.count(m.actor) >= m.radio.channels or table.count(s.actor) >= s.radio.channels:
                continue
            rate = min(m.radio.effective_rate, s.radio.effective_rate)
            c = Contact(map_id=m.id, station=s.actor, opened_at=t, rate=rate)
            table._add(c)
            transitions.append(("open", c))
    return transitions


def transfer_step(contact: Contact, source: Buffer, dest: Buffer, dt: float) -> float:
    """Advance a contact by ``dt`` seconds; returns bytes sent over the link.

    Whole reports move FIFO once their last byte is sent. Progress on a
    partly sent report lives on the contact and is lost if the contact closes.
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    if not source.reports:
        return 0.0
    smallest = min(r.size_bytes for r in source.reports)
    if dest.capacity < smallest:
        raise DestinationFull(f"destination capacity {dest.capacity} < smallest pending report {smallest}")
    budget = contact.rate * 1e6 * dt / 8
    moved = 0.0
    while source.reports and budget > 0:
        head = source.reports[0]
        if head.size_bytes > dest.free:
            break
        contact.active_transfer = head.id
        need = head.size_bytes - contact.progress
        if budget >= need:
            budget -= need
            moved += need
            source.remove(head)
            dest.append(head)
            contact.progress = 0.0
            contact.active_transfer = None
        else:
            contact.progress += budget
            moved += budget
            budget = 0.0
    return moved


def abort_transfer(contact: Contact) -> Optional[str]:
    """Drop partial progress; the report stays at the source and restarts from zero."""
    rid = contact.active_transfer
    contact.active_transfer = None
    contact.progress = 0.0
    contact.token += 1
    return rid


def validate_fleet(
    counts: Dict[str, Tuple[int, int, int]],
    ferry_needed: Optional[Dict[str, bool]] = None,
) -> List[Violation]:
    """Check J >= R and J >= T per area (MAPs, SDCCs, DPCs).

    Areas whose SDCC-DPC pairs are all within direct range need no MAPs and
    are skipped. R != T is never reported.
    """
    out: List[Violation] = []
    for area in sorted(counts):
        j, r, t = counts[area]
        if ferry_needed is not None and not ferry_needed.get(area, True):
            continue
        if j < r:
            out.append(Violation("fleet", f"area {area}: MAPs J={j} < SDCCs R={r} (J < R)", area))
        if j < t:
            out.append(Violation("fleet", f"area {area}: MAPs J={j} < DPCs T={t} (J < T)", area))
    return out
