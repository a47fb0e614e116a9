"""Deterministic discrete-event scheduler and seeded random streams."""

from __future__ import annotations

import hashlib
import heapq
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional

from dmcis.core import DmcisError

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

ACTIONS = frozenset(
    {
        "sensor_sample",
        "sdcc_window_close",
        "map_waypoint_arrival",
        "contact_check_tick",
        "transfer_complete",
        "dpc_process_complete",
        "dpc_reprocess_deadline",
        "cdc_decision",
        "dcc_dissemination_complete",
        "hazard_onset",
        "hazard_end",
        "sensor_failure",
        # message deliveries between centers
        "peer_summary",
        "dcc_receive",
        "emergency_call",
        "manual_insert",
    }
)


class SchedulingInPast(DmcisError):
    pass


def mix64(z: int) -> int:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & MASK64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & MASK64
    return z ^ (z >> 31)


class Rng:
    """SplitMix64 stream.

    ``state += 0x9E3779B97F4A7C15`` then the standard finalizer; uniform
    doubles take the top 53 bits. Pure integer arithmetic, so sequences are
    identical on every platform.
    """

    __slots__ = ("seed", "state", "_spare")

    def __init__(self, seed: int):
        self.seed = seed & MASK64
        self.state = self.seed
        self._spare: Optional[float] = None

    def next_u64(self) -> int:
        self.state = (self.state + _GOLDEN) & MASK64
        return mix64(self.state)

    def uniform(self) -> float:
        return (self.next_u64() >> 11) * (1.0 / 9007199254740992.0)

    def normal(self) -> float:
        # Box-Muller; the second variate is cached
        if self._spare is not None:
            z, self._spare = self._spare, None
            return z
        u1 = 1.0 - self.uniform()
        u2 = self.uniform()
        r = math.sqrt(-2.0 * math.log(u1))
        self._spare = r * math.sin(2.0 * math.pi * u2)
        return r * math.cos(2.0 * math.pi * u2)


def rng_uniform(state: Rng) -> float:
    return state.uniform()


def derive_seed(master: int, *parts: Any) -> int:
    """Stable 64-bit seed for a sub-stream (actor, sweep cell, ...)."""
    h = hashlib.blake2b(digest_size=8)
    h.update((master & MASK64).to_bytes(8, "little"))
    for part in parts:
        h.update(b"\x1f")
        h.update(str(part).encode("utf-8"))
    return int.from_bytes(h.digest(), "little")


@dataclass(order=True)
class ScheduledEvent:
    fire_at: float
    seq: int = field(default=-1)
    action: str = field(default="", compare=False)
    params: Dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.action and self.action not in ACTIONS:
            raise ValueError(f"unknown action {self.action!r}")


class Scheduler:
    """Continuous-time event queue ordered by ``(fire_at, seq)``.

    ``seq`` is assigned at scheduling time from a monotone counter, so events
    with equal times fire in insertion order.
    """

    def __init__(self, start: float = 0.0):
        self.clock = start
        self._queue: List[ScheduledEvent] = []
        self._seq = 0
        self.scheduled = 0
        self.fired = 0
        self.handlers: Dict[str, Callable[[ScheduledEvent], None]] = {}
        self.log: Optional[List[ScheduledEvent]] = None

    @property
    def pending(self) -> int:
        return len(self._queue)

    def peek(self) -> Optional[ScheduledEvent]:
        return self._queue[0] if self._queue else None

    def schedule(self, ev: ScheduledEvent) -> ScheduledEvent:
        if ev.fire_at < self.clock:
            raise SchedulingInPast(f"{ev.action} at {ev.fire_at} < clock {self.clock}")
        self._seq += 1
        ev.seq = self._seq
        heapq.heappush(self._queue, ev)
        self.scheduled += 1
        return ev

    def at(self, fire_at: float, action: str, **params: Any) -> ScheduledEvent:
        return self.schedule(ScheduledEvent(fire_at, action=action, params=params))

    def run_until(self, horizon: float) -> int:
        if horizon < self.clock:
            raise SchedulingInPast(f"horizon {horizon} < clock {self.clock}")
        count = 0
        q = self._queue
        while q and q[0].fire_at <= horizon:
            ev = heapq.heappop(q)
            self.clock = ev.fire_at
            self.fired += 1
            count += 1
            if self.log is not None:
                self.log.append(ev)
            handler = self.handlers.get(ev.action)
            if handler is not None:
                handler(ev)
        self.clock = horizon
        return count
