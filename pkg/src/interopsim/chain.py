"""Blockchain autonomous system abstraction.

A chain is a quorum-latency consensus model over an append-only ledger:
a submitted unit confirms once it has aged confirm_latency_ticks and the
live node population meets the quorum threshold, computed against the
total registered population.  Internal structure beyond node count and
liveness is deliberately out of scope; nodes never gossip here.

Invariants enforced or surfaced for audit:
  * ledger is append-only (no removal API; marks are one-shot);
  * at most one authority mark and one void tombstone per entry;
  * idempotent submission: same idempotency_key never creates two
    entries on one chain;
  * unit semantic_type must match the chain's;
  * write and read permission checks per the chain's regime.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from math import ceil
from typing import Any, Optional

from .errors import NotFound, PermissionDenied, SemanticMismatch

logger = logging.getLogger(__name__)


class SemanticType(str, Enum):
    PAYMENTS = "payments"
    ASSET_REGISTRY = "asset-registry"
    GENERIC_RECORD = "generic-record"


class Directionality(str, Enum):
    UNI = "uni"
    BI = "bi"


@dataclass(frozen=True)
class PermissionRegime:
    """Four independent permissioning axes; node permissioning implies
    consensus permissioning (a known node set is a known quorum set)."""

    node_permissioned: bool = False
    consensus_permissioned: bool = False
    user_write_permissioned: bool = False
    user_read_permissioned: bool = False

    def __post_init__(self):
        if self.node_permissioned and not self.consensus_permissioned:
            raise ValueError("node permissioning subsumes consensus permissioning")


@dataclass(frozen=True)
class TransferUnit:
    """The datagram of the system: what a chain confirms."""

    payload_digest: str
    semantic_type: SemanticType
    directionality: Directionality
    idempotency_key: str
    intended_peer: Optional[str] = None

    def __post_init__(self):
        if self.directionality == Directionality.BI and self.intended_peer is None:
            raise ValueError("bidirectional unit requires intended_peer")
        if self.directionality == Directionality.UNI and self.intended_peer is not None:
            raise ValueError("unidirectional unit must not name a peer")


# Entry kinds. unit/lock/record go through consensus and are subject to
# the quorum and latency rules; genesis entries are scenario-seeded and
# attestation entries are direct gateway appends.
ENTRY_KIND_UNIT = "unit"
ENTRY_KIND_LOCK = "lock"
ENTRY_KIND_RECORD = "record"
ENTRY_KIND_GENESIS = "genesis"
ENTRY_KIND_ATTESTATION = "attestation"

CONSENSUS_KINDS = (ENTRY_KIND_UNIT, ENTRY_KIND_LOCK, ENTRY_KIND_RECORD)


@dataclass
class LedgerEntry:
    local_ref: str
    kind: str
    unit: Optional[TransferUnit]
    submitted_tick: int
    confirmed_tick: int
    confirming_nodes: tuple[str, ...]
    payload: str = ""

    def canonical(self) -> str:
        unit_part = "-"
        if self.unit is not None:
            peer = self.unit.intended_peer or "-"
            unit_part = (f"{self.unit.payload_digest}:{self.unit.semantic_type.value}:"
                         f"{self.unit.directionality.value}:{self.unit.idempotency_key}:{peer}")
        return (f"{self.local_ref}|{self.kind}|{unit_part}|{self.submitted_tick}|"
                f"{self.confirmed_tick}|{','.join(self.confirming_nodes)}|{self.payload}")


@dataclass
class Ledger:
    """Append-only confirmed entries plus one-shot marks and voids."""

    entries: list[LedgerEntry] = field(default_factory=list)
    marks: dict[str, Any] = field(default_factory=dict)
    voids: dict[str, int] = field(default_factory=dict)
    _by_ref: dict[str, LedgerEntry] = field(default_factory=dict)

    def append(self, entry: LedgerEntry) -> LedgerEntry:
        assert entry.local_ref not in self._by_ref, "duplicate local_ref"
        self.entries.append(entry)
        self._by_ref[entry.local_ref] = entry
        return entry

    def get(self, local_ref: str) -> Optional[LedgerEntry]:
        return self._by_ref.get(local_ref)

    def mark(self, local_ref: str, pointer: Any) -> None:
        if local_ref not in self._by_ref:
            raise NotFound(f"no entry {local_ref}")
        if local_ref in self.marks:
            raise ValueError(f"entry {local_ref} already marked")
        self.marks[local_ref] = pointer

    def void(self, local_ref: str, tick: int) -> None:
        if local_ref not in self._by_ref:
            raise NotFound(f"no entry {local_ref}")
        if local_ref in self.voids:
            raise ValueError(f"entry {local_ref} already voided")
        self.voids[local_ref] = tick

    def snapshot(self) -> tuple[LedgerEntry, ...]:
        return tuple(self.entries)

    def canonical_lines(self) -> list[str]:
        lines = [e.canonical() for e in self.entries]
        for ref in sorted(self.marks):
            lines.append(f"mark|{ref}|{self.marks[ref]}")
        for ref in sorted(self.voids):
            lines.append(f"void|{ref}|{self.voids[ref]}")
        return lines


@dataclass
class SubmitReceipt:
    chain_id: str
    local_ref: str
    idempotency_key: str
    duplicate: bool


@dataclass
class ReadResult:
    entry: LedgerEntry
    mark: Any = None
    voided: bool = False


@dataclass
class ChainStatus:
    chain_id: str
    live_node_count: int
    pending_count: int
    mean_confirm_latency: float
    reachable: bool


@dataclass
class PendingUnit:
    local_ref: str
    kind: str
    unit: TransferUnit
    submitted_tick: int


class BlockchainSystem:
    """One autonomous system: node population, regime, ledger."""

    def __init__(self, chain_id: str, node_ids: list[str], gateway_ids: list[str],
                 regime: PermissionRegime, quorum_fraction: Fraction,
                 confirm_latency_ticks: int, semantic_type: SemanticType,
                 writers: Optional[set[str]] = None,
                 readers: Optional[set[str]] = None) -> None:
        if not node_ids:
            raise ValueError("chain needs at least one node")
        if not (Fraction(0) < quorum_fraction <= Fraction(1)):
            raise ValueError("quorum_fraction must be in (0, 1]")
        if confirm_latency_ticks < 1:
            raise ValueError("confirm_latency_ticks must be >= 1")
        self.chain_id = chain_id
        self.nodes: dict[str, bool] = {nid: True for nid in node_ids}
        self.gateway_ids = list(gateway_ids)
        self.regime = regime
        self.quorum_fraction = quorum_fraction
        self.confirm_latency_ticks = confirm_latency_ticks
        self.semantic_type = semantic_type
        self.writers: set[str] = set(writers or ())
        self.readers: set[str] = set(readers or ())
        self.ledger = Ledger()
        self.pending: list[PendingUnit] = []
        self._idem: dict[str, str] = {}
        self._ref_counter = 0

    # -- population ----------------------------------------------------

    def quorum_threshold(self) -> int:
        """Minimum confirming nodes, against total registered population."""
        return ceil(self.quorum_fraction * len(self.nodes))

    def live_node_ids(self) -> list[str]:
        return sorted(nid for nid, live in self.nodes.items() if live)

    def live_count(self) -> int:
        return sum(1 for live in self.nodes.values() if live)

    def set_node_live(self, node_id: str, live: bool) -> None:
        if node_id not in self.nodes:
            raise NotFound(f"unknown node {node_id}")
        self.nodes[node_id] = live

    def quorum_met(self) -> bool:
        return self.live_count() >= self.quorum_threshold()

    # -- write path ----------------------------------------------------

    def next_ref(self) -> str:
        self._ref_counter += 1
        return f"e{self._ref_counter}"

    def submit(self, unit: TransferUnit, credential: str, now: int,
               kind: str = ENTRY_KIND_UNIT) -> SubmitReceipt:
        """Queue a unit for consensus.  Reachability is the transport
        layer's concern; this is the chain-side admission check."""
        if self.regime.user_write_permissioned and credential not in self.writers:
            raise PermissionDenied(f"{credential!r} may not write to {self.chain_id}")
        if unit.semantic_type != self.semantic_type:
            raise SemanticMismatch(
                f"{unit.semantic_type.value} unit on {self.semantic_type.value} chain")
        existing = self._idem.get(unit.idempotency_key)
        if existing is not None:
            return SubmitReceipt(self.chain_id, existing, unit.idempotency_key, duplicate=True)
        ref = self.next_ref()
        self._idem[unit.idempotency_key] = ref
        self.pending.append(PendingUnit(ref, kind, unit, now))
        return SubmitReceipt(self.chain_id, ref, unit.idempotency_key, duplicate=False)

    def advance_consensus(self, now: int) -> list[LedgerEntry]:
        """Confirm every pending unit that has aged past the confirm
        latency, provided the live population meets quorum.  Returns the
        newly confirmed entries in submission order."""
        if not self.quorum_met():
            return []
        confirming = tuple(self.live_node_ids())
        confirmed: list[LedgerEntry] = []
        remaining: list[PendingUnit] = []
        for pu in self.pending:
            if now - pu.submitted_tick >= self.confirm_latency_ticks:
                entry = LedgerEntry(pu.local_ref, pu.kind, pu.unit,
                                    pu.submitted_tick, now, confirming)
                self.ledger.append(entry)
                confirmed.append(entry)
            else:
                remaining.append(pu)
        self.pending = remaining
        return confirmed

    # -- direct appends (not consensus-path) ---------------------------

    def append_genesis(self, unit: TransferUnit, payload: str = "") -> LedgerEntry:
        """Scenario-seeded asset entry, confirmed at tick 0 by the full
        node set before the run starts."""
        ref = self.next_ref()
        self._idem[unit.idempotency_key] = ref
        entry = LedgerEntry(ref, ENTRY_KIND_GENESIS, unit, 0, 0,
                            tuple(sorted(self.nodes)))
        return self.ledger.append(entry)

    def append_attestation(self, payload: str, now: int) -> LedgerEntry:
        """Gateway signatures recorded on the ledger as a direct append."""
        ref = self.next_ref()
        entry = LedgerEntry(ref, ENTRY_KIND_ATTESTATION, None, now, now, (), payload)
        return self.ledger.append(entry)

    # -- read path -----------------------------------------------------

    def read(self, local_ref: str, credential: str) -> ReadResult:
        if self.regime.user_read_permissioned and credential not in self.readers:
            raise PermissionDenied(f"{credential!r} may not read {self.chain_id}")
        entry = self.ledger.get(local_ref)
        if entry is None:
            raise NotFound(f"no confirmed entry {local_ref} on {self.chain_id}")
        return ReadResult(entry, self.ledger.marks.get(local_ref),
                          local_ref in self.ledger.voids)

    def status(self, now: int, reachable: bool = True) -> ChainStatus:
        """Aggregate, node-anonymous when the regime demands it."""
        if self.regime.node_permissioned:
            advertised = self.live_count()
        else:
            advertised = self.quorum_threshold() if self.quorum_met() else 0
        lats = [e.confirmed_tick - e.submitted_tick
                for e in self.ledger.entries if e.kind in CONSENSUS_KINDS]
        mean_lat = sum(lats) / len(lats) if lats else float(self.confirm_latency_ticks)
        return ChainStatus(self.chain_id, advertised, len(self.pending),
                           round(mean_lat, 2), reachable)
