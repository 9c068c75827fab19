"""Event loop with (time, issue-order) execution, fully deterministic."""

from __future__ import annotations

import heapq
from typing import Callable

from ..errors import SchedulingInPast


class EventEngine:
    """Min-heap of events ordered by (timestamp, sequence number).

    Two events at the same timestamp run in the order they were scheduled,
    so a run is a pure function of the schedule calls.
    """

    def __init__(self):
        self.now = 0.0
        self._seq = 0
        self._heap: list[tuple[float, int, Callable[[], None]]] = []
        self.executed = 0

    def schedule(self, at: float, action: Callable[[], None]) -> int:
        if at < self.now:
            raise SchedulingInPast(f"at={at} < now={self.now}")
        self._seq += 1
        heapq.heappush(self._heap, (at, self._seq, action))
        return self._seq

    def schedule_in(self, delay: float, action: Callable[[], None]) -> int:
        return self.schedule(self.now + delay, action)

    def pending(self) -> int:
        return len(self._heap)

    def advance(self) -> bool:
        """Execute the next event; False if none remain."""
        if not self._heap:
            return False
        at, _seq, action = heapq.heappop(self._heap)
        self.now = at
        self.executed += 1
        action()
        return True

    def run(self, until: float | None = None, max_events: int | None = None) -> int:
        """Drain the queue, optionally stopping after ``until`` or a budget.

        Returns the number of events executed by this call.
        """
        count = 0
        while self._heap:
            if until is not None and self._heap[0][0] > until:
                break
            if max_events is not None and count >= max_events:
                break
            self.advance()
            count += 1
        if until is not None and self.now < until and (
            not self._heap or self._heap[0][0] > until
        ):
            self.now = until
        return count
