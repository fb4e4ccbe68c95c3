"""Timed discrete scenario actions."""
from __future__ import annotations

import enum
from dataclasses import dataclass


class EventKind(str, enum.Enum):
    BREAKER_OPEN = "breaker_open"
    BREAKER_CLOSE = "breaker_close"
    LOAD_STEP = "load_step"
    DG_REDISPATCH = "dg_redispatch"
    ATTACK_START = "attack_start"
    ATTACK_END = "attack_end"


@dataclass(frozen=True)
class Event:
    at: float
    kind: EventKind
    target: str | int | None = None  # line id, bus id or device id
    value: float | None = None  # load step dp / redispatch set-point (pu)
    dq: float = 0.0  # load step reactive part (pu)
    order: int = 0  # declaration index, breaks ties at equal times
    targets: tuple = ()  # redispatched DG ids
    restore: bool = False  # redispatch to bring the island back to nominal

    @property
    def sort_key(self):
        return (self.at, self.order)


def sort_events(events):
    return sorted(events, key=lambda e: e.sort_key)
