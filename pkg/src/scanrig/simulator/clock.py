"""Virtual-time event queue: (time, insertion order) heap, no wall clock."""

from __future__ import annotations

import heapq
from typing import Callable


class EventQueue:
    def __init__(self):
        self._heap: list[tuple[float, int, Callable[[float], None]]] = []
        self._seq = 0
        self.now = 0.0

    def push(self, when: float, fn: Callable[[float], None]) -> None:
        # events scheduled "in the past" (float fuzz) run at the current time
        when = max(when, self.now)
        heapq.heappush(self._heap, (when, self._seq, fn))
        self._seq += 1

    def push_after(self, delay: float, fn: Callable[[float], None]) -> None:
        self.push(self.now + delay, fn)

    def pop_run(self) -> bool:
        """Run the next event; False when the queue is empty."""
        if not self._heap:
            return False
        when, _, fn = heapq.heappop(self._heap)
        self.now = when
        fn(when)
        return True

    def peek_time(self) -> float | None:
        return self._heap[0][0] if self._heap else None

    def __len__(self) -> int:
        return len(self._heap)
