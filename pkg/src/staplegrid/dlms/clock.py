"""Injected simulation clock; verification logic never reads wall time."""

from __future__ import annotations

import datetime

from ..codec.der import to_utc_second


class SimClock:
    def __init__(self, start: datetime.datetime) -> None:
        self._now = to_utc_second(start)

    def now(self) -> datetime.datetime:
        return self._now

    __call__ = now

    def advance(self, delta: datetime.timedelta | int | float) -> datetime.datetime:
        if not isinstance(delta, datetime.timedelta):
            delta = datetime.timedelta(seconds=delta)
        self._now = to_utc_second(self._now + delta)
        return self._now

    def set(self, moment: datetime.datetime) -> None:
        self._now = to_utc_second(moment)
