"""Time sources for the control stack.

Every loop, service, and transport in this package reads time through a
``Clock`` so the whole stack can run either against the wall clock or against
a virtual clock that advances in lockstep with the simulated system. Virtual
mode makes multi-minute runs finish in seconds while keeping every timestamp,
latency sample, and tick deadline exact.
"""

from __future__ import annotations

import threading
import time
from contextlib import contextmanager

__all__ = ["Clock", "SystemClock", "VirtualClock", "make_clock"]


class Clock:
    """Interface shared by the wall clock and the virtual clock."""

    def now(self) -> float:
        """Current time in seconds (monotonic origin)."""
        raise NotImplementedError

    def now_ms(self) -> float:
        return self.now() * 1000.0

    def sleep(self, duration: float) -> None:
        raise NotImplementedError

    def sleep_until(self, deadline: float) -> None:
        raise NotImplementedError

    # Instrumentation hooks. The wall clock ignores them; the virtual clock
    # uses them to know when it is safe to jump time forward.

    def msg_sent(self) -> None:
        pass

    def msg_received(self) -> None:
        pass

    @contextmanager
    def working(self):
        yield

    @contextmanager
    def io_wait(self):
        yield


class SystemClock(Clock):
    """Wall-clock time. Instrumentation hooks are no-ops."""

    def now(self) -> float:
        return time.monotonic()

    def sleep(self, duration: float) -> None:
        if duration > 0:
            time.sleep(duration)

    def sleep_until(self, deadline: float) -> None:
        self.sleep(deadline - self.now())


class VirtualClock(Clock):
    """Deterministic simulated time shared by threads in one process.

    Time never flows on its own. It jumps to the earliest pending sleep
    deadline, and only when the system is quiescent:

    * no thread is inside a ``working()`` section (request handlers, loop
      bodies),
    * no message is in flight (``msg_sent`` without a matching
      ``msg_received``),
    * at least one thread is blocked in ``sleep``/``sleep_until``.

    Threads blocked on socket reads wrap the blocking call in ``io_wait()``,
    which suspends their ``working`` contribution: a thread waiting for a
    request is passive and must not hold time back. The net effect is that
    computation and wire transfer take zero virtual time while explicit
    sleeps (tick periods, injected inference latency) take exactly their
    nominal duration.

    If instrumentation is ever unbalanced (e.g. a peer vanished with a frame
    in flight), a real-time stall guard force-advances after
    ``stall_timeout`` seconds so a leak degrades to slowness, not deadlock.
    """

    def __init__(self, start: float = 0.0, stall_timeout: float = 1.0):
        self._now = float(start)
        self._cond = threading.Condition()
        self._workers = 0
        self._in_flight = 0
        self._sleepers: dict[int, float] = {}
        self._depth: dict[int, int] = {}
        self._suspended: dict[int, int] = {}
        self._last_change = time.monotonic()
        self.stall_timeout = stall_timeout
        self.forced_advances = 0

    def now(self) -> float:
        with self._cond:
            return self._now

    def sleep(self, duration: float) -> None:
        with self._cond:
            deadline = self._now + max(0.0, duration)
        self.sleep_until(deadline)

    def sleep_until(self, deadline: float) -> None:
        me = threading.get_ident()
        with self._cond:
            counted = self._counted(me)
            if counted:
                self._workers -= 1
            self._sleepers[me] = deadline
            self._touch()
            while self._now < deadline:
                if self._can_advance():
                    nxt = min(self._sleepers.values())
                    if nxt >= deadline:
                        # This thread holds (one of) the earliest deadlines.
                        self._now = deadline
                        self._touch()
                    else:
                        # Advance on behalf of an earlier sleeper, then yield
                        # the lock so it can wake and deregister.
                        self._now = nxt
                        self._touch()
                        self._cond.wait(timeout=0.02)
                else:
                    self._cond.wait(timeout=0.02)
                    self._check_stall()
            del self._sleepers[me]
            if counted:
                self._workers += 1
            self._touch()

    def msg_sent(self) -> None:
        with self._cond:
            self._in_flight += 1
            self._touch()

    def msg_received(self) -> None:
        with self._cond:
            self._in_flight -= 1
            self._touch()

    @contextmanager
    def working(self):
        me = threading.get_ident()
        with self._cond:
            depth = self._depth.get(me, 0) + 1
            self._depth[me] = depth
            if depth == 1 and self._suspended.get(me, 0) == 0:
                self._workers += 1
            self._touch()
        try:
            yield
        finally:
            with self._cond:
                self._depth[me] -= 1
                if self._depth[me] == 0:
                    del self._depth[me]
                    if self._suspended.get(me, 0) == 0:
                        self._workers -= 1
                self._touch()

    @contextmanager
    def io_wait(self):
        me = threading.get_ident()
        with self._cond:
            counted = self._counted(me)
            self._suspended[me] = self._suspended.get(me, 0) + 1
            if counted:
                self._workers -= 1
            self._touch()
        try:
            yield
        finally:
            with self._cond:
                self._suspended[me] -= 1
                if self._suspended[me] == 0:
                    del self._suspended[me]
                if self._depth.get(me, 0) > 0 and self._suspended.get(me, 0) == 0:
                    self._workers += 1
                self._touch()

    def _counted(self, ident: int) -> bool:
        return self._depth.get(ident, 0) > 0 and self._suspended.get(ident, 0) == 0

    def _can_advance(self) -> bool:
        return self._workers == 0 and self._in_flight == 0 and bool(self._sleepers)

    def _check_stall(self) -> None:
        # Called with the lock held. Unstick a leaked in-flight count.
        if not self._sleepers:
            return
        if self._workers == 0 and self._in_flight > 0:
            if time.monotonic() - self._last_change > self.stall_timeout:
                self._in_flight = 0
                self.forced_advances += 1
                self._touch()

    def _touch(self) -> None:
        self._last_change = time.monotonic()
        self._cond.notify_all()


def make_clock(kind: str = "real") -> Clock:
    """Build a clock from a CLI-style name: ``real`` or ``virtual``."""
    if kind == "real":
        return SystemClock()
    if kind == "virtual":
        return VirtualClock()
    raise ValueError(f"unknown clock kind: {kind!r}")
