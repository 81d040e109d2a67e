"""In-process event fan-out for the operator feed."""

from __future__ import annotations

import asyncio
from collections import deque


class EventBus:
    def __init__(self, history: int = 1024):
        self.history: deque[dict] = deque(maxlen=history)
        self._subs: list[asyncio.Queue] = []

    def emit(self, entry: dict) -> None:
        self.history.append(entry)
        for q in list(self._subs):
            try:
                q.put_nowait(entry)
            except asyncio.QueueFull:
                # slow consumer: drop it rather than stall the rig
                self._subs.remove(q)

    def subscribe(self) -> asyncio.Queue:
        q: asyncio.Queue = asyncio.Queue(maxsize=4096)
        self._subs.append(q)
        return q

    def unsubscribe(self, q: asyncio.Queue) -> None:
        if q in self._subs:
            self._subs.remove(q)
