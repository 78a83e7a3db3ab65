"""Deterministic discrete-event core: integer-second clock and a single event queue.

Events fire in ``(fire_time, sequence_no)`` order. Sequence numbers are handed
out at scheduling time, so two events at the same instant run in the order
they were scheduled. Nothing here depends on wall-clock time or hash order,
which is what makes whole runs reproducible.
"""

from __future__ import annotations

import enum
import heapq
import itertools
import random
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from typing import Any, Callable, Dict, List, Optional


class EventKind(str, enum.Enum):
    TRANSACTION_ARRIVAL = "transaction-arrival"
    MAPE_TICK = "mape-tick"
    ENERGY_TICK = "energy-tick"
    MESSAGE_DELIVERY = "message-delivery"
    SIM_END = "sim-end"


class SchedulingError(ValueError):
    """Raised when an event is scheduled before the current clock."""


@dataclass(order=True)
class Event:
    fire_time: int
    sequence_no: int
    kind: EventKind = field(compare=False)
    payload: Any = field(default=None, compare=False)


def as_utc(when: datetime) -> datetime:
    """Naive datetimes are taken to be UTC."""
    if when.tzinfo is None:
        return when.replace(tzinfo=timezone.utc)
    return when.astimezone(timezone.utc)


@dataclass
class SimClock:
    """Seconds since ``epoch``; ``epoch`` anchors trace lookups."""

    epoch: datetime
    current_time: int = 0

    def __post_init__(self):
        self.epoch = as_utc(self.epoch)

    def datetime_at(self, t: float) -> datetime:
        return self.epoch + timedelta(seconds=t)

    @property
    def now(self) -> datetime:
        return self.datetime_at(self.current_time)


@dataclass
class SimulationSummary:
    end_time: int
    dispatched: Dict[str, int]
    pending: int

    @property
    def total_dispatched(self) -> int:
        return sum(self.dispatched.values())

    def as_rows(self) -> List[tuple]:
        return sorted(self.dispatched.items())


Handler = Callable[[Event], None]


class Scheduler:
    """Single global event queue driving a :class:`SimClock`.

    Handlers are registered per :class:`EventKind`; an event whose kind has no
    handler is still dispatched (and counted) but does nothing.
    """

    def __init__(self, epoch: Optional[datetime] = None, seed: int = 0):
        self.clock = SimClock(epoch or datetime(1970, 1, 1, tzinfo=timezone.utc))
        self.rng = random.Random(seed)
        self._queue: List[Event] = []
        self._seq = itertools.count()
        self._handlers: Dict[EventKind, Handler] = {}
        self._counts: Counter = Counter()
        self._last_fired = 0

    @property
    def now(self) -> int:
        return self.clock.current_time

    def on(self, kind: EventKind, handler: Handler) -> None:
        self._handlers[EventKind(kind)] = handler

    def schedule(self, fire_time: int, kind: EventKind, payload: Any = None) -> Event:
        kind = EventKind(kind)
        if int(fire_time) != fire_time:
            raise SchedulingError(f"{kind.value} event time must be whole seconds, got {fire_time!r}")
        fire_time = int(fire_time)
        if fire_time < self.clock.current_time:
            raise SchedulingError(
                f"cannot schedule {kind.value} event at t={fire_time}: "
                f"clock is already at t={self.clock.current_time}"
            )
        event = Event(fire_time, next(self._seq), kind, payload)
        heapq.heappush(self._queue, event)
        return event

    def pending(self) -> int:
        return len(self._queue)

    def peek(self) -> Optional[Event]:
        return self._queue[0] if self._queue else None

    def run_until(self, end_time: int) -> SimulationSummary:
        """Dispatch every event with ``fire_time <= end_time`` then park the clock there."""
        if end_time < self.clock.current_time:
            raise SchedulingError(f"end_time {end_time} is before the clock ({self.clock.current_time})")
        while self._queue and self._queue[0].fire_time <= end_time:
            event = heapq.heappop(self._queue)
            assert event.fire_time >= self._last_fired
            self._last_fired = event.fire_time
            self.clock.current_time = event.fire_time
            self._counts[event.kind.value] += 1
            handler = self._handlers.get(event.kind)
            if handler is not None:
                handler(event)
        self.clock.current_time = int(end_time)
        return SimulationSummary(
            end_time=self.clock.current_time,
            dispatched=dict(sorted(self._counts.items())),
            pending=len(self._queue),
        )
