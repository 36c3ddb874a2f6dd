"""Time sources for the stack.

Every component that needs the current time or has to pace a loop takes a
clock object instead of calling ``time`` directly, so tests and headless
evaluation runs can swap in :class:`FakeClock` and run at CPU speed with
fully deterministic timestamps.
"""

from __future__ import annotations

import threading
import time


class WallClock:
    """Monotonic clock pinned to the Unix epoch.

    ``time.time()`` can jump (NTP); stamping from a monotonic source keeps
    per-publisher stamps non-decreasing while still reporting epoch seconds.
    """

    def __init__(self) -> None:
        self._offset = time.time() - time.monotonic()

    def now(self) -> float:
        return self._offset + time.monotonic()

    def sleep(self, seconds: float) -> None:
        if seconds > 0:
            time.sleep(seconds)


class FakeClock:
    """Manually advanced clock; ``sleep`` advances instead of blocking."""

    def __init__(self, start: float = 0.0) -> None:
        self._now = float(start)
        self._lock = threading.Lock()

    def now(self) -> float:
        with self._lock:
            return self._now

    def advance(self, seconds: float) -> None:
        if seconds < 0:
            raise ValueError("cannot move a clock backwards")
        with self._lock:
            self._now += seconds

    def sleep(self, seconds: float) -> None:
        if seconds > 0:
            self.advance(seconds)
