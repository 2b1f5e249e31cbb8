"""Event queue with a deterministic (time, seq) total order."""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Any

__all__ = [
    "ADDR_ROUND",
    "CREATE",
    "DELIVER",
    "EPOCH",
    "Event",
    "EventQueue",
    "KIND_NAMES",
    "MSG_ADDR",
    "MSG_ANNOUNCE",
    "MSG_NAMES",
    "MSG_PROXY",
    "TIMEOUT",
    "TimeInPast",
    "format_event",
]

CREATE, DELIVER, TIMEOUT, EPOCH, ADDR_ROUND = range(5)
KIND_NAMES = ("create", "deliver", "timeout", "epoch", "addr_round")

MSG_ANNOUNCE, MSG_PROXY, MSG_ADDR = range(3)
MSG_NAMES = ("announce", "proxy", "addr")


class TimeInPast(ValueError):
    pass


@dataclass(frozen=True)
class Event:
    time: float
    kind: int
    payload: tuple[Any, ...] = ()
    seq: int = -1


class EventQueue:
    """Min-heap of ``(time, seq, kind, *payload)`` tuples.

    ``seq`` is assigned at scheduling time and is unique, so tuple comparison
    never reaches the payload.
    """

    __slots__ = ("_heap", "seq", "now")

    def __init__(self) -> None:
        self._heap: list[tuple] = []
        self.seq = 0
        self.now = 0.0

    def __len__(self) -> int:
        return len(self._heap)

    def push(self, time: float, kind: int, *payload: Any) -> int:
        if time < self.now:
            raise TimeInPast(f"cannot schedule at {time} < now={self.now}")
        seq = self.seq
        self.seq = seq + 1
        heapq.heappush(self._heap, (time, seq, kind, *payload))
        return seq

    def schedule(self, event: Event) -> Event:
        seq = self.push(event.time, event.kind, *event.payload)
        return Event(event.time, event.kind, tuple(event.payload), seq)

    def skip_seq(self) -> int:
        """Consume a sequence number without enqueuing anything."""
        seq = self.seq
        self.seq = seq + 1
        return seq

    def peek_time(self) -> float | None:
        return self._heap[0][0] if self._heap else None

    def pop(self) -> tuple:
        item = heapq.heappop(self._heap)
        self.now = item[0]
        return item

    def pop_event(self) -> Event:
        item = self.pop()
        return Event(item[0], item[2], item[3:], item[1])


def _fmt(value: Any) -> str:
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ":".join(_fmt(v) for v in value)
    return str(value)


def format_event(item: tuple) -> str:
    """One trace line: ``<time> <seq> <kind> <fields...>``."""
    time, seq, kind = item[0], item[1], item[2]
    fields = list(item[3:])
    if kind == DELIVER:
        fields[0] = MSG_NAMES[fields[0]]
    return " ".join([repr(time), str(seq), KIND_NAMES[kind], *(_fmt(f) for f in fields)])
