"""Deterministic discrete-event engine.

Reference time is exact (Fraction).  Hardware clocks are piecewise-constant
rate schedules with rates in [1, theta]; threshold scheduling inverts the rate
schedule exactly, so an alarm set for a local clock value fires at the unique
real time where the clock reaches it.

Event order is total: (time, kind rank, node, sequence number); the
deterministic tie-break realizes the modeling assumption that no two events
coincide.  Handlers run atomically at zero simulated time.
"""

from __future__ import annotations

import heapq
from bisect import bisect_right
from fractions import Fraction
from typing import Optional

from .timebase import frac

THRESHOLD, DELIVERY, ACTION = 0, 1, 2
MAX_ACTIONS_PER_EVENT = 100_000


class SimulatorBug(Exception):
    """Internal misuse: events in the past, runaway handlers, bad alarms."""


class HardwareClock:
    """Strictly increasing local clock with drift in [1, theta]."""

    def __init__(self, offset: Fraction, schedule):
        # schedule: list of (start_real_time, rate), first start must be 0.
        self.offset = frac(offset)
        self.starts = [frac(t) for t, _ in schedule]
        self.rates = [frac(r) for _, r in schedule]
        if not self.starts or self.starts[0] != 0:
            raise ValueError("rate schedule must start at time 0")
        if any(r <= 0 for r in self.rates):
            raise ValueError("clock rates must be positive")
        self.h_starts = [self.offset]
        for i in range(1, len(self.starts)):
            span = self.starts[i] - self.starts[i - 1]
            if span <= 0:
                raise ValueError("rate schedule times must increase")
            self.h_starts.append(self.h_starts[-1] + self.rates[i - 1] * span)

    def value(self, t: Fraction) -> Fraction:
        i = bisect_right(self.starts, t) - 1
        return self.h_starts[i] + self.rates[i] * (t - self.starts[i])

    def invert(self, local: Fraction) -> Fraction:
        if local < self.offset:
            raise ValueError("local value precedes clock start")
        i = bisect_right(self.h_starts, local) - 1
        return self.starts[i] + (local - self.h_starts[i]) / self.rates[i]


class Simulator:
    def __init__(self, n: int, clocks, handlers, delay_policy, grid, rng,
                 d: Fraction, trace: Optional[list] = None):
        self.n = n
        self.clocks = clocks            # node -> HardwareClock
        self.handlers = handlers        # node -> handler object
        self.delay_policy = delay_policy
        self.grid = grid
        self.rng = rng
        self.d = frac(d)
        self.now: Fraction = Fraction(0)
        self.trace = trace if trace is not None else []
        self._queue: list = []
        self._seq = 0
        self._actions_this_event = 0

    # -- scheduling ---------------------------------------------------------

    def schedule(self, t: Fraction, kind: int, node: int, payload) -> None:
        if t < self.now:
            raise SimulatorBug(f"event at {t} scheduled in the past (now={self.now})")
        self._seq += 1
        self._actions_this_event += 1
        if self._actions_this_event > MAX_ACTIONS_PER_EVENT:
            raise SimulatorBug("per-event action budget exceeded (runaway handler?)")
        # float(t) is monotone in t, so the float leads the comparison for
        # speed and the exact Fraction settles the rare float ties.
        heapq.heappush(self._queue, (float(t), t, kind, node, self._seq, payload))

    def alarm(self, node: int, local_units: int, tag) -> None:
        """Fire a THRESHOLD event when `node`'s clock reaches local_units."""
        local = self.grid.from_units(local_units)
        clock = self.clocks[node]
        if local <= clock.value(self.now):
            raise SimulatorBug(f"alarm for node {node} at local {local} already passed")
        self.schedule(clock.invert(local), THRESHOLD, node, (local_units, tag))

    def send(self, sender: int, receiver: int, msg, frame_bits: int,
             payload_bits: int, delay: Optional[Fraction] = None) -> None:
        if sender == receiver:
            raise SimulatorBug("self-delivery is local state, not a channel send")
        if delay is None:
            delay = self.delay_policy(sender, receiver, msg, self.now, self.rng)
        if not (0 < delay < self.d):
            raise SimulatorBug(f"delay {delay} outside (0, {self.d})")
        self.trace.append(("send", self.now, sender, receiver,
                           type(msg).__name__, frame_bits, payload_bits, msg))
        self.schedule(self.now + delay, DELIVERY, receiver, (sender, msg))

    def inject_garbage(self, sender: int, receiver: int, msg, deliver_at) -> None:
        """Queue a pre-existing in-flight envelope; only legal before time d."""
        deliver_at = frac(deliver_at)
        if self.now != 0:
            raise SimulatorBug("initial-state injection only at time 0")
        if not (0 < deliver_at < self.d):
            raise ValueError(f"garbage delivery time {deliver_at} outside (0, {self.d})")
        self.trace.append(("garbage", deliver_at, sender, receiver,
                           type(msg).__name__, 0, 0, msg))
        self.schedule(deliver_at, DELIVERY, receiver, (sender, msg))

    # -- clock access -------------------------------------------------------

    def local_clock(self, node: int, t: Optional[Fraction] = None) -> Fraction:
        return self.clocks[node].value(self.now if t is None else frac(t))

    def reading(self, node: int) -> int:
        """Current quantized local clock, in grid units."""
        return self.grid.read(self.clocks[node].value(self.now))

    # -- main loop ----------------------------------------------------------

    def run_until(self, deadline) -> None:
        deadline = frac(deadline)
        if deadline < self.now:
            raise SimulatorBug("deadline precedes current time")
        queue = self._queue
        deadline_f = float(deadline)
        while queue and (queue[0][0] < deadline_f or queue[0][1] <= deadline):
            _, t, kind, node, _, payload = heapq.heappop(queue)
            self.now = t
            self._actions_this_event = 0
            handler = self.handlers[node]
            if kind == THRESHOLD:
                local_units, tag = payload
                handler.on_threshold(node, local_units, tag)
            elif kind == DELIVERY:
                sender, msg = payload
                self.trace.append(("recv", t, node, sender, type(msg).__name__))
                handler.on_deliver(node, sender, msg)
            else:
                handler.on_action(node, payload)
        self.now = deadline
