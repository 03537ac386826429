"""Simulation substrate: tick clock, event queue, fault state, event log.

Determinism contract, checked by the test suite:
  * integer tick clock, no wall time anywhere;
  * events execute ordered by (tick, schedule sequence), so two events on
    the same tick run in the order they were scheduled;
  * a single random.Random(seed) is the only entropy source and is
    consumed in event execution order;
  * the event log is byte-identical across runs of the same scenario
    and seed.

Log line format: "tick seq kind subject detail" where seq is the
strictly increasing record index and detail is a space-separated list of
key=value pairs in a stable order.  Deliveries into or out of a
partitioned chain are dropped silently (logged as kind=drop, never as
deliver).
"""

from __future__ import annotations

import heapq
import logging
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

from .errors import UnknownTarget

logger = logging.getLogger(__name__)

DEFAULT_INTER_CHAIN_LATENCY = 2


class EventKind(str, Enum):
    DELIVER = "deliver"
    TIMER = "timer"
    FAULT = "fault"
    PROBE = "probe"


class FaultKind(str, Enum):
    PARTITION = "partition"
    NODE_CRASH = "node_crash"
    GATEWAY_CRASH = "gateway_crash"
    HEAL = "heal"


@dataclass
class FaultSpec:
    """One injected fault.

    target holds chain ids for partition, node ids for node_crash,
    gateway ids for gateway_crash, or a prior fault id for heal.
    links holds chain-id pairs for link-level partitions.
    until_tick, when set, schedules the reverse fault automatically;
    the fault is active over [at_tick, until_tick).
    """

    fault_id: str
    kind: FaultKind
    at_tick: int
    target: tuple[str, ...] = ()
    links: tuple[tuple[str, str], ...] = ()
    until_tick: Optional[int] = None


@dataclass
class SimEvent:
    tick: int
    seq: int
    kind: EventKind
    subject: str
    action: Callable[[], None]
    detail: str = ""
    cancelled: bool = False


@dataclass
class LogRecord:
    tick: int
    seq: int
    kind: str
    subject: str
    detail: str

    def line(self) -> str:
        return f"{self.tick} {self.seq} {self.kind} {self.subject} {self.detail}".rstrip()


class EventLog:
    """Append-only run log; the unit of replay comparison."""

    def __init__(self) -> None:
        self.records: list[LogRecord] = []

    def append(self, tick: int, kind: str, subject: str, detail: str) -> LogRecord:
        rec = LogRecord(tick, len(self.records), kind, subject, detail)
        self.records.append(rec)
        return rec

    def lines(self) -> list[str]:
        return [r.line() for r in self.records]

    def dumps(self) -> str:
        return "".join(line + "\n" for line in self.lines())

    def write(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.dumps())


def fmt_detail(*pairs) -> str:
    """Render (key, value) pairs as 'k=v k=v'; lists join with commas."""
    parts = []
    for key, value in pairs:
        if isinstance(value, (list, tuple, set, frozenset)):
            value = ",".join(str(v) for v in sorted(value)) if isinstance(value, (set, frozenset)) else ",".join(str(v) for v in value)
        parts.append(f"{key}={value}")
    return " ".join(parts)


class SimNet:
    """Clock, queue, partitions and RNG for one simulation run.

    The engine registers known entity ids so inject() can reject faults
    that name entities which do not exist, and registers a fault applier
    that mutates chain and gateway liveness when fault events fire.
    """

    def __init__(self, seed: int, inter_chain_latency: int = DEFAULT_INTER_CHAIN_LATENCY,
                 latency_jitter: int = 0) -> None:
        self.seed = seed
        self.rng = random.Random(seed)
        self.now = 0
        self.log = EventLog()
        self.inter_chain_latency = inter_chain_latency
        self.latency_jitter = latency_jitter
        self._queue: list[tuple[int, int, SimEvent]] = []
        self._next_event_seq = 0
        # fault state
        self.partitioned_chains: set[str] = set()
        self.cut_links: set[frozenset] = set()
        # [chain_id, start_tick, end_tick_or_None] per isolation episode
        self.partition_history: list[list] = []
        # [frozenset(pair), start_tick, end_tick_or_None] per cut episode
        self.cut_history: list[list] = []
        self._faults: dict[str, FaultSpec] = {}
        self._fault_applier: Optional[Callable[[FaultSpec, bool], None]] = None
        # entity registry for UnknownTarget checks
        self.known_chains: set[str] = set()
        self.known_nodes: set[str] = set()
        self.known_gateways: set[str] = set()

    # -- scheduling ----------------------------------------------------

    def schedule(self, kind: EventKind, subject: str, action: Callable[[], None],
                 delay: int, detail: str = "") -> SimEvent:
        """Queue an event delay ticks from now; returns it for cancellation."""
        assert delay >= 0, "cannot schedule into the past"
        ev = SimEvent(self.now + delay, self._next_event_seq, kind, subject, action, detail)
        self._next_event_seq += 1
        heapq.heappush(self._queue, (ev.tick, ev.seq, ev))
        return ev

    def deliver(self, src_chain: str, dst_chain: str, subject: str,
                action: Callable[[], None], detail: str = "",
                extra_delay: int = 0) -> SimEvent:
        """Schedule a cross-chain message; dropped at execution time if
        either endpoint is partitioned or the link is cut then."""
        delay = self.inter_chain_latency + extra_delay
        if self.latency_jitter:
            delay += self.rng.randint(0, self.latency_jitter)

        def run():
            if self.delivery_blocked(src_chain, dst_chain):
                self.record("drop", subject, fmt_detail(("src", src_chain), ("dst", dst_chain)) +
                            (f" {detail}" if detail else ""))
                return
            self.record(EventKind.DELIVER.value, subject,
                        fmt_detail(("src", src_chain), ("dst", dst_chain)) +
                        (f" {detail}" if detail else ""))
            action()

        ev = SimEvent(self.now + delay, self._next_event_seq, EventKind.DELIVER, subject, run, detail)
        self._next_event_seq += 1
        heapq.heappush(self._queue, (ev.tick, ev.seq, ev))
        return ev

    def local_deliver(self, chain_id: str, subject: str, action: Callable[[], None],
                      detail: str = "", delay: int = 0) -> SimEvent:
        """App-to-chain submission path: no transport latency, but still
        dropped silently when the chain is partitioned at execution."""

        def run():
            if chain_id in self.partitioned_chains:
                self.record("drop", subject, fmt_detail(("dst", chain_id)) +
                            (f" {detail}" if detail else ""))
                return
            self.record(EventKind.DELIVER.value, subject, fmt_detail(("dst", chain_id)) +
                        (f" {detail}" if detail else ""))
            action()

        ev = SimEvent(self.now + delay, self._next_event_seq, EventKind.DELIVER, subject, run, detail)
        self._next_event_seq += 1
        heapq.heappush(self._queue, (ev.tick, ev.seq, ev))
        return ev

    def timer(self, subject: str, action: Callable[[], None], delay: int,
              detail: str = "") -> SimEvent:
        return self.schedule(EventKind.TIMER, subject, action, delay, detail)

    # -- fault machinery -----------------------------------------------

    def register_entities(self, chains, nodes, gateways) -> None:
        self.known_chains = set(chains)
        self.known_nodes = set(nodes)
        self.known_gateways = set(gateways)

    def set_fault_applier(self, applier: Callable[[FaultSpec, bool], None]) -> None:
        self._fault_applier = applier

    def inject(self, fault: FaultSpec) -> None:
        """Validate targets and queue the fault (and auto-heal) events."""
        self._validate_fault(fault)
        self._faults[fault.fault_id] = fault
        delay = fault.at_tick - self.now
        if delay < 0:
            raise UnknownTarget(f"fault {fault.fault_id} scheduled in the past")
        self.schedule(EventKind.FAULT, fault.fault_id,
                      lambda: self._apply_fault(fault, heal=False), delay)
        if fault.until_tick is not None and fault.kind != FaultKind.HEAL:
            self.schedule(EventKind.FAULT, fault.fault_id,
                          lambda: self._apply_fault(fault, heal=True),
                          fault.until_tick - self.now)

    def _validate_fault(self, fault: FaultSpec) -> None:
        if fault.kind == FaultKind.PARTITION:
            for cid in fault.target:
                if cid not in self.known_chains:
                    raise UnknownTarget(f"unknown chain {cid}")
            for a, b in fault.links:
                if a not in self.known_chains or b not in self.known_chains:
                    raise UnknownTarget(f"unknown link {a}-{b}")
        elif fault.kind == FaultKind.NODE_CRASH:
            for nid in fault.target:
                if nid not in self.known_nodes:
                    raise UnknownTarget(f"unknown node {nid}")
        elif fault.kind == FaultKind.GATEWAY_CRASH:
            for gid in fault.target:
                if gid not in self.known_gateways:
                    raise UnknownTarget(f"unknown gateway {gid}")
        elif fault.kind == FaultKind.HEAL:
            for fid in fault.target:
                if fid not in self._faults:
                    raise UnknownTarget(f"unknown fault {fid}")

    def _apply_fault(self, fault: FaultSpec, heal: bool) -> None:
        phase = "heal" if heal else "apply"
        detail = fmt_detail(("kind", fault.kind.value), ("phase", phase))
        if fault.target:
            detail += " " + fmt_detail(("target", list(fault.target)))
        if fault.links:
            detail += " " + fmt_detail(("links", [f"{a}-{b}" for a, b in fault.links]))
        self.record(EventKind.FAULT.value, fault.fault_id, detail)
        if fault.kind == FaultKind.PARTITION:
            if heal:
                self._heal_partition(fault)
            else:
                self._start_partition(fault)
        elif fault.kind == FaultKind.HEAL:
            for fid in fault.target:
                self._apply_fault(self._faults[fid], heal=True)
            return
        if self._fault_applier is not None and fault.kind in (FaultKind.NODE_CRASH, FaultKind.GATEWAY_CRASH):
            self._fault_applier(fault, heal)

    def _start_partition(self, fault: FaultSpec) -> None:
        for cid in fault.target:
            if cid not in self.partitioned_chains:
                self.partitioned_chains.add(cid)
                self.partition_history.append([cid, self.now, None])
        for a, b in fault.links:
            pair = frozenset((a, b))
            if pair not in self.cut_links:
                self.cut_links.add(pair)
                self.cut_history.append([pair, self.now, None])

    def _heal_partition(self, fault: FaultSpec) -> None:
        for cid in fault.target:
            if cid in self.partitioned_chains:
                self.partitioned_chains.discard(cid)
                for episode in self.partition_history:
                    if episode[0] == cid and episode[2] is None:
                        episode[2] = self.now
        for a, b in fault.links:
            pair = frozenset((a, b))
            if pair in self.cut_links:
                self.cut_links.discard(pair)
                for episode in self.cut_history:
                    if episode[0] == pair and episode[2] is None:
                        episode[2] = self.now

    def delivery_blocked(self, src_chain: str, dst_chain: str) -> bool:
        if src_chain in self.partitioned_chains or dst_chain in self.partitioned_chains:
            return True
        return frozenset((src_chain, dst_chain)) in self.cut_links

    def chain_partitioned(self, chain_id: str) -> bool:
        return chain_id in self.partitioned_chains

    # -- execution -----------------------------------------------------

    def record(self, kind: str, subject: str, detail: str = "") -> LogRecord:
        return self.log.append(self.now, kind, subject, detail)

    def has_events(self) -> bool:
        return any(not ev.cancelled for _, _, ev in self._queue)

    def next_event_tick(self) -> Optional[int]:
        while self._queue and self._queue[0][2].cancelled:
            heapq.heappop(self._queue)
        return self._queue[0][0] if self._queue else None

    def drain(self, tick: int) -> int:
        """Execute every event due at tick, including ones scheduled at
        this tick by other events; returns the number executed."""
        assert tick >= self.now
        self.now = tick
        executed = 0
        while self._queue and self._queue[0][0] <= tick:
            _, _, ev = heapq.heappop(self._queue)
            if ev.cancelled:
                continue
            if ev.kind == EventKind.TIMER:
                self.record(EventKind.TIMER.value, ev.subject,
                            ev.detail if ev.detail else "fire")
            ev.action()
            executed += 1
        return executed
