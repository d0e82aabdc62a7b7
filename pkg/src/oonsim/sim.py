"""Discrete-event engine, trace log and run metrics.

A single integer-tick clock; events are processed in (tick, insertion
sequence) order, which makes every run a pure function of its inputs.
"""

from __future__ import annotations

import hashlib
import heapq
from collections import Counter
from dataclasses import dataclass, field


@dataclass(frozen=True)
class Event:
    tick: int
    seq: int
    target: str
    payload: object


class EventLoop:
    """Single-threaded deterministic event loop."""

    def __init__(self):
        self.now = 0
        self._heap = []
        self._seq = 0
        self._handlers = {}
        self._last = (-1, -1)
        self._cancelled = set()

    def register(self, target: str, handler) -> None:
        self._handlers[target] = handler

    def post(self, delay: int, target: str, payload) -> tuple:
        """Schedule a payload; returns a handle usable with cancel()."""
        if delay < 0:
            raise ValueError("negative delay")
        ev = Event(self.now + delay, self._seq, target, payload)
        self._seq += 1
        heapq.heappush(self._heap, (ev.tick, ev.seq, ev))
        return (ev.tick, ev.seq)

    def cancel(self, handle: tuple) -> None:
        """Cancelled events are discarded without advancing the clock."""
        self._cancelled.add(handle)

    def run(self, max_events: int = None) -> int:
        """Drain the queue; returns the number of events processed."""
        processed = 0
        while self._heap:
            if max_events is not None and processed >= max_events:
                break
            tick, seq, ev = heapq.heappop(self._heap)
            if (tick, seq) in self._cancelled:
                self._cancelled.discard((tick, seq))
                continue
            assert (tick, seq) > self._last, "event ordering violated"
            self._last = (tick, seq)
            self.now = tick
            self._handlers[ev.target](ev.payload)
            processed += 1
        return processed

    @property
    def pending(self) -> int:
        return len(self._heap)


class Trace:
    """Append-only run log; lines are prefixed with the current tick."""

    def __init__(self, loop: EventLoop):
        self._loop = loop
        self.lines = []

    def log(self, text: str) -> None:
        self.lines.append(f"t={self._loop.now} {text}")

    def text(self) -> str:
        if not self.lines:
            return ""
        return "\n".join(self.lines) + "\n"

    def sha256(self) -> str:
        return hashlib.sha256(self.text().encode("utf-8")).hexdigest()


METRICS_CSV_HEADER = ("run_id,messages_sent,delivered,dropped,"
                      "mean_hops,fib_inter_size,fib_intra_size")


class Metrics:
    """Counters and samples collected over one run.

    Conservation invariant: every message sent is eventually counted as
    delivered or dropped, exactly once.
    """

    def __init__(self):
        self.sent = Counter()        # by message type: data | xfind | results
        self.delivered = Counter()
        self.dropped = Counter()     # by message type
        self.drops_by_cause = Counter()
        self.data_hops = []          # inter-domain hops per delivered data message
        self.xfind_hops = []         # inter-relay hops per processed xfind
        self.query_latency = []      # ticks from issue to request completion
        self.routing_updates = 0     # inter-relay routing-update messages
        self.fib_inter_size = 0      # max over routers at end of run
        self.fib_intra_size = 0
        self.irn_store_sizes = []

    def messages_sent(self) -> int:
        return sum(self.sent.values())

    def messages_delivered(self) -> int:
        return sum(self.delivered.values())

    def messages_dropped(self) -> int:
        return sum(self.dropped.values())

    def conservation_holds(self) -> bool:
        return self.messages_sent() == self.messages_delivered() + self.messages_dropped()

    def mean_hops(self) -> float:
        if not self.data_hops:
            return 0.0
        return sum(self.data_hops) / len(self.data_hops)

    def csv_row(self, run_id: str) -> str:
        return (f"{run_id},{self.messages_sent()},{self.messages_delivered()},"
                f"{self.messages_dropped()},{self.mean_hops():.4f},"
                f"{self.fib_inter_size},{self.fib_intra_size}")

    def csv(self, run_id: str) -> str:
        return METRICS_CSV_HEADER + "\n" + self.csv_row(run_id) + "\n"
