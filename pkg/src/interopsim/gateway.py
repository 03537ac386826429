"""Gateways: the only cross-domain actors.

Everything that crosses a chain boundary goes through here: reachability
advertisements, threshold vouch attestations, delegated mediated reads,
peering agreements, and the four-phase cross-domain transfer protocol
(INITIATED -> SOURCE_LOCKED -> DEST_RECORDED -> VOUCHED -> FINALIZED,
with ABORTED reachable from any non-terminal state).

Pairing is deterministic: the lowest-id live gateway on each side.  On a
crash the transfer re-pairs to the next lowest live gateway, or aborts
when a side has none left.

The signature scheme is deliberately abstract: a signature is the
sha256 of the gateway's registry key concatenated with the claim bytes,
so verification is a pure function of (attestation, registry) and any
single-byte tamper of the claim invalidates every signature.
"""

from __future__ import annotations

import hashlib
import logging
import struct
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Optional

from .chain import (
    Directionality,
    ENTRY_KIND_LOCK,
    ENTRY_KIND_RECORD,
    LedgerEntry,
    SemanticType,
    TransferUnit,
)
from .errors import (
    AlreadyTerminal,
    DuplicateAgreement,
    GrantExpired,
    GrantMismatch,
    InsufficientGateways,
    NoLiveGateways,
    NoPeering,
    NotAuthoritativeHere,
    NotConfirmed,
    NotFound,
    PermissionDenied,
    Unreachable,
)
from .identity import AuthoritativePointer, CrossId

logger = logging.getLogger(__name__)


@dataclass
class Gateway:
    gateway_id: str
    home_chain: str
    live: bool = True


class GatewayRegistry:
    """All gateways of the run plus their signing keys."""

    def __init__(self) -> None:
        self.gateways: dict[str, Gateway] = {}
        self.by_chain: dict[str, list[str]] = {}

    def add(self, gateway: Gateway) -> None:
        self.gateways[gateway.gateway_id] = gateway
        self.by_chain.setdefault(gateway.home_chain, []).append(gateway.gateway_id)
        self.by_chain[gateway.home_chain].sort()

    def get(self, gateway_id: str) -> Gateway:
        if gateway_id not in self.gateways:
            raise NotFound(f"unknown gateway {gateway_id}")
        return self.gateways[gateway_id]

    def chain_gateways(self, chain_id: str) -> list[Gateway]:
        return [self.gateways[g] for g in self.by_chain.get(chain_id, [])]

    def live_gateways(self, chain_id: str) -> list[Gateway]:
        return [g for g in self.chain_gateways(chain_id) if g.live]

    def lowest_live(self, chain_id: str) -> Optional[Gateway]:
        live = self.live_gateways(chain_id)
        return live[0] if live else None

    def signing_key(self, gateway_id: str) -> bytes:
        # key material derived from identity; stands in for a real keypair
        return f"k-{gateway_id}".encode("ascii")


# -- attestations ------------------------------------------------------

@dataclass(frozen=True)
class Claim:
    """What an attestation asserts about one chain's ledger."""

    chain_id: str
    cross_id: str
    confirmed: bool
    entry_digest: str

    def to_bytes(self) -> bytes:
        return f"{self.chain_id}|{self.cross_id}|{int(self.confirmed)}|{self.entry_digest}".encode("ascii")


@dataclass(frozen=True)
class VouchAttestation:
    claim: Claim
    threshold_k: int
    signatures: tuple[tuple[str, str], ...]  # (gateway_id, sig hex), sorted
    issued_tick: int

    def serialize(self) -> bytes:
        """Length-prefixed claim plus signer list; bit-exact across replays."""
        claim = self.claim.to_bytes()
        signers = ",".join(f"{gid}:{sig}" for gid, sig in self.signatures)
        head = struct.pack(">HI", self.threshold_k, len(claim))
        return head + claim + b"|" + str(self.issued_tick).encode("ascii") + b"|" + signers.encode("ascii")


def entry_digest(entry: LedgerEntry) -> str:
    return hashlib.sha256(entry.canonical().encode("utf-8")).hexdigest()


def sign_claim(registry: GatewayRegistry, gateway_id: str, claim: Claim) -> str:
    return hashlib.sha256(registry.signing_key(gateway_id) + b"|" + claim.to_bytes()).hexdigest()


def vouch(chain_id: str, registry: GatewayRegistry, claim: Claim, k: int,
          now: int) -> VouchAttestation:
    """k-of-n attestation by the chain's live gateways, lowest ids first."""
    live = registry.live_gateways(chain_id)
    if len(live) < k:
        raise InsufficientGateways(
            f"{chain_id} has {len(live)} live gateways, threshold {k}")
    signers = live[:k]
    sigs = tuple(sorted((g.gateway_id, sign_claim(registry, g.gateway_id, claim))
                        for g in signers))
    return VouchAttestation(claim, k, sigs, now)


def verify_attestation(att: VouchAttestation, registry: GatewayRegistry) -> bool:
    """Pure check: enough distinct registered gateways of the claimed
    chain signed these exact claim bytes.  Liveness is irrelevant."""
    valid = set()
    for gid, sig in att.signatures:
        gw = registry.gateways.get(gid)
        if gw is None or gw.home_chain != att.claim.chain_id:
            continue
        if sign_claim(registry, gid, att.claim) == sig:
            valid.add(gid)
    return len(valid) >= att.threshold_k


# -- reachability advertisements ---------------------------------------

@dataclass(frozen=True)
class ReachabilityAdvertisement:
    """What a domain shows the outside: gateways, semantics, asset
    prefixes.  Never any intra-domain node identifier."""

    chain_path: str
    gateway_endpoints: tuple[str, ...]
    semantic_types: tuple[str, ...]
    reachable_assets: tuple[str, ...]
    issued_tick: int

    def transcript(self) -> str:
        return (f"path={self.chain_path}"
                f" endpoints={','.join(self.gateway_endpoints)}"
                f" semantics={','.join(self.semantic_types)}"
                f" assets={','.join(self.reachable_assets) or '-'}")


def advertise(chain, registry: GatewayRegistry, resolver, now: int) -> ReachabilityAdvertisement:
    endpoints = tuple(g.gateway_id for g in registry.live_gateways(chain.chain_id))
    assets = tuple(sorted(
        cid.prefix() for cid in resolver.assets()
        if resolver.resolve(cid).home_chain == chain.chain_id))
    return ReachabilityAdvertisement(chain.chain_id, endpoints,
                                     (chain.semantic_type.value,), assets, now)


# -- delegated reads ---------------------------------------------------

@dataclass(frozen=True)
class DelegationGrant:
    grant_id: str
    grantor: str
    grantee: str
    target: str  # str(CrossId)
    expiry_tick: int


@dataclass
class MediatedReadView:
    cross_id: str
    chain_id: str
    payload_digest: str
    submitted_tick: int
    confirmed_tick: int
    mark: Optional[AuthoritativePointer]
    voided: bool
    attestation: VouchAttestation


def mediated_read(gateway: Gateway, registry: GatewayRegistry, chain, resolver,
                  grant: DelegationGrant, cross_id: CrossId, requester: str,
                  now: int) -> MediatedReadView:
    """Read on behalf of an outside party holding a delegation grant.

    The view is keyed by cross id only; local refs stay inside the
    domain.  The grantor's own read privilege is re-checked at call
    time, so a revoked grantor invalidates every grant they issued.
    """
    if grant.grantee != requester or grant.target != str(cross_id):
        raise GrantMismatch(f"grant {grant.grant_id} does not cover this request")
    if now >= grant.expiry_tick:
        raise GrantExpired(f"grant {grant.grant_id} expired at {grant.expiry_tick}")
    if chain.regime.user_read_permissioned and grant.grantor not in chain.readers:
        raise PermissionDenied(f"grantor {grant.grantor!r} lost read privilege")
    local_ref = resolver.local_ref_for(chain.chain_id, cross_id)
    entry = chain.ledger.get(local_ref)
    if entry is None:
        if any(pu.local_ref == local_ref for pu in chain.pending):
            raise NotConfirmed(f"{cross_id} not confirmed yet")
        raise NotFound(f"{cross_id} has no entry on {chain.chain_id}")
    claim = Claim(chain.chain_id, str(cross_id), True, entry_digest(entry))
    att = VouchAttestation(claim, 1,
                           ((gateway.gateway_id, sign_claim(registry, gateway.gateway_id, claim)),),
                           now)
    digest = entry.unit.payload_digest if entry.unit else entry.payload
    return MediatedReadView(str(cross_id), chain.chain_id, digest,
                            entry.submitted_tick, entry.confirmed_tick,
                            chain.ledger.marks.get(local_ref),
                            local_ref in chain.ledger.voids, att)


# -- peering -----------------------------------------------------------

@dataclass
class PeeringAgreement:
    agreement_id: str
    chain_a: str
    chain_b: str
    compatible_semantics: frozenset
    fee_per_transfer: Fraction
    active: bool = True

    def pair(self) -> tuple[str, str]:
        return tuple(sorted((self.chain_a, self.chain_b)))

    def covers(self, a: str, b: str, semantic: SemanticType) -> bool:
        return (self.active and {a, b} == {self.chain_a, self.chain_b}
                and semantic in self.compatible_semantics)


class PeeringRegistry:
    def __init__(self) -> None:
        self.agreements: dict[str, PeeringAgreement] = {}
        self.settlements: dict[tuple[str, str], Fraction] = {}

    def establish(self, agreement: PeeringAgreement) -> PeeringAgreement:
        for other in self.agreements.values():
            if (other.active and other.pair() == agreement.pair()
                    and other.compatible_semantics & agreement.compatible_semantics):
                raise DuplicateAgreement(
                    f"active agreement {other.agreement_id} already covers "
                    f"{agreement.pair()}")
        self.agreements[agreement.agreement_id] = agreement
        return agreement

    def revoke(self, agreement_id: str) -> None:
        if agreement_id not in self.agreements:
            raise NotFound(f"unknown agreement {agreement_id}")
        self.agreements[agreement_id].active = False

    def covering(self, a: str, b: str, semantic: SemanticType) -> Optional[PeeringAgreement]:
        for aid in sorted(self.agreements):
            if self.agreements[aid].covers(a, b, semantic):
                return self.agreements[aid]
        return None

    def tally_fee(self, agreement: PeeringAgreement) -> None:
        pair = agreement.pair()
        self.settlements[pair] = self.settlements.get(pair, Fraction(0)) + agreement.fee_per_transfer


# -- cross-domain transfers --------------------------------------------

class TransferState(str, Enum):
    INITIATED = "INITIATED"
    SOURCE_LOCKED = "SOURCE_LOCKED"
    DEST_RECORDED = "DEST_RECORDED"
    VOUCHED = "VOUCHED"
    FINALIZED = "FINALIZED"
    ABORTED = "ABORTED"


TERMINAL_STATES = (TransferState.FINALIZED, TransferState.ABORTED)


@dataclass
class CrossDomainTransfer:
    transfer_id: str
    asset: CrossId
    source_chain: str
    dest_chain: str
    beneficiary: str
    deadline_tick: int
    agreement_id: str
    paired_source: str
    paired_dest: str
    state: TransferState = TransferState.INITIATED
    lock_ref: Optional[str] = None
    record_ref: Optional[str] = None
    lock_confirmed: bool = False
    record_confirmed: bool = False
    record_request_sent: bool = False
    attestation_sent: bool = False
    attestation_arrived: bool = False
    source_attestation: Optional[VouchAttestation] = None
    dest_attestation: Optional[VouchAttestation] = None
    holds_lock: bool = False
    abort_reason: str = ""
    final_tick: Optional[int] = None

    def terminal(self) -> bool:
        return self.state in TERMINAL_STATES


class TransferEngine:
    """Drives every cross-domain transfer of a run.

    All state transitions are logged; the engine's per-tick step phase
    calls step_all after consensus so confirmations observed this tick
    can be acted on this tick.
    """

    def __init__(self, net, chains: dict, registry: GatewayRegistry,
                 resolver, peerings: PeeringRegistry,
                 vouch_thresholds: dict[str, int]) -> None:
        self.net = net
        self.chains = chains
        self.registry = registry
        self.resolver = resolver
        self.peerings = peerings
        self.vouch_thresholds = vouch_thresholds
        self.transfers: dict[str, CrossDomainTransfer] = {}
        self.order: list[str] = []
        self.locks: dict[tuple[str, str], str] = {}

    # -- helpers -------------------------------------------------------

    def _log(self, transfer: CrossDomainTransfer, actor: str, extra: str = "") -> None:
        detail = (f"state={transfer.state.value} asset={transfer.asset}"
                  f" src={transfer.source_chain} dst={transfer.dest_chain} by={actor}")
        if extra:
            detail += " " + extra
        self.net.record("transfer", transfer.transfer_id, detail)

    def _threshold(self, chain_id: str) -> int:
        return self.vouch_thresholds[chain_id]

    # -- initiation ----------------------------------------------------

    def initiate(self, transfer_id: str, asset: CrossId, source_chain: str,
                 dest_chain: str, beneficiary: str, deadline_tick: int,
                 now: int) -> CrossDomainTransfer:
        pointer = self.resolver.resolve(asset)
        if pointer.home_chain != source_chain:
            raise NotAuthoritativeHere(
                f"{asset} lives on {pointer.home_chain}, not {source_chain}")
        if self.net.chain_partitioned(source_chain):
            raise Unreachable(f"{source_chain} is partitioned")
        semantic = self.chains[source_chain].semantic_type
        agreement = self.peerings.covering(source_chain, dest_chain, semantic)
        if agreement is None:
            raise NoPeering(f"no active {semantic.value} agreement for "
                            f"{source_chain}/{dest_chain}")
        src_gw = self.registry.lowest_live(source_chain)
        dst_gw = self.registry.lowest_live(dest_chain)
        if src_gw is None or dst_gw is None:
            raise NoLiveGateways(f"no live gateway pair for {source_chain}/{dest_chain}")

        transfer = CrossDomainTransfer(
            transfer_id, asset, source_chain, dest_chain, beneficiary,
            deadline_tick, agreement.agreement_id,
            src_gw.gateway_id, dst_gw.gateway_id)
        self.transfers[transfer_id] = transfer
        self.order.append(transfer_id)
        self._log(transfer, src_gw.gateway_id,
                  f"gw={transfer.paired_source}:{transfer.paired_dest}"
                  f" deadline={deadline_tick}")

        lock_key = (source_chain, str(asset))
        if lock_key in self.locks:
            self.abort(transfer, now, "lock-held")
            return transfer
        self.locks[lock_key] = transfer_id
        transfer.holds_lock = True

        chain = self.chains[source_chain]
        unit = TransferUnit(
            payload_digest=f"lock:{asset.opaque_suffix[:12]}",
            semantic_type=chain.semantic_type,
            directionality=Directionality.UNI,
            idempotency_key=f"lock:{transfer_id}")
        receipt = chain.submit(unit, src_gw.gateway_id, now, kind=ENTRY_KIND_LOCK)
        transfer.lock_ref = receipt.local_ref
        self.net.record("ledger", f"{source_chain}/{receipt.local_ref}",
                        f"submit kind=lock transfer={transfer_id}")
        return transfer

    # -- confirmation callbacks ----------------------------------------

    def on_confirmed(self, chain_id: str, entry: LedgerEntry) -> None:
        for tid in self.order:
            t = self.transfers[tid]
            if (chain_id == t.source_chain and entry.local_ref == t.lock_ref
                    and not t.lock_confirmed):
                t.lock_confirmed = True
                if t.state == TransferState.INITIATED and not t.terminal():
                    t.state = TransferState.SOURCE_LOCKED
                    self._log(t, t.paired_source)
            elif (chain_id == t.dest_chain and entry.local_ref == t.record_ref
                    and not t.record_confirmed):
                t.record_confirmed = True
                if t.state == TransferState.ABORTED:
                    # aborted before the record landed: tombstone it now
                    self._void_record(t)
                elif t.state == TransferState.SOURCE_LOCKED and not t.terminal():
                    t.state = TransferState.DEST_RECORDED
                    self._log(t, t.paired_dest)

    # -- per-tick driving ----------------------------------------------

    def step_all(self, now: int) -> None:
        for tid in self.order:
            self.step(self.transfers[tid], now)

    def step(self, t: CrossDomainTransfer, now: int) -> None:
        if t.terminal():
            return
        if now > t.deadline_tick:
            self.abort(t, now, "deadline")
            return
        if not self._repair_pairing(t, now):
            return
        if t.state == TransferState.SOURCE_LOCKED and not t.record_request_sent:
            self._send_record_request(t, now)
        elif t.state == TransferState.DEST_RECORDED and not t.attestation_sent:
            self._vouch_and_send(t, now)
        elif (t.state == TransferState.DEST_RECORDED and t.attestation_arrived
                and t.source_attestation is None):
            # source-side vouch could not meet threshold earlier; retry
            self._try_finalize(t, now)

    def _repair_pairing(self, t: CrossDomainTransfer, now: int) -> bool:
        """Re-pair crashed gateways to the lowest live ones; abort when a
        side has none.  Returns False when the transfer just aborted."""
        for side in ("source", "dest"):
            chain_id = t.source_chain if side == "source" else t.dest_chain
            current = t.paired_source if side == "source" else t.paired_dest
            if self.registry.get(current).live:
                continue
            replacement = self.registry.lowest_live(chain_id)
            if replacement is None:
                self.abort(t, now, f"no-live-gateway-{side}")
                return False
            if side == "source":
                t.paired_source = replacement.gateway_id
            else:
                t.paired_dest = replacement.gateway_id
            self.net.record("peer", t.transfer_id,
                            f"repair side={side} gw={replacement.gateway_id}")
        return True

    def _send_record_request(self, t: CrossDomainTransfer, now: int) -> None:
        t.record_request_sent = True
        self.net.deliver(t.source_chain, t.dest_chain, t.transfer_id,
                         lambda: self._arrive_record_request(t),
                         detail=f"msg=record-request transfer={t.transfer_id}")

    def _arrive_record_request(self, t: CrossDomainTransfer) -> None:
        now = self.net.now
        if t.terminal():
            return
        if now > t.deadline_tick:
            self.abort(t, now, "deadline")
            return
        if not self._repair_pairing(t, now):
            return
        chain = self.chains[t.dest_chain]
        unit = TransferUnit(
            payload_digest=f"record:{t.asset.opaque_suffix[:12]}",
            semantic_type=chain.semantic_type,
            directionality=Directionality.BI,
            idempotency_key=f"record:{t.transfer_id}",
            intended_peer=t.beneficiary)
        receipt = chain.submit(unit, t.paired_dest, now, kind=ENTRY_KIND_RECORD)
        t.record_ref = receipt.local_ref
        self.net.record("ledger", f"{t.dest_chain}/{receipt.local_ref}",
                        f"submit kind=record transfer={t.transfer_id}")

    def _vouch_and_send(self, t: CrossDomainTransfer, now: int) -> None:
        chain = self.chains[t.dest_chain]
        entry = chain.ledger.get(t.record_ref)
        claim = Claim(t.dest_chain, str(t.asset), True, entry_digest(entry))
        try:
            att = vouch(t.dest_chain, self.registry, claim,
                        self._threshold(t.dest_chain), now)
        except InsufficientGateways:
            return  # retry next tick; deadline will fire eventually
        t.dest_attestation = att
        ledger_entry = chain.append_attestation(att.serialize().hex(), now)
        self.net.record("ledger", f"{t.dest_chain}/{ledger_entry.local_ref}",
                        f"append kind=attestation transfer={t.transfer_id}")
        self.net.record("vouch", t.transfer_id,
                        f"side=dest k={att.threshold_k} att={att.serialize().hex()}")
        t.attestation_sent = True
        self.net.deliver(t.dest_chain, t.source_chain, t.transfer_id,
                         lambda: self._arrive_attestation(t),
                         detail=f"msg=attestation transfer={t.transfer_id}")

    def _arrive_attestation(self, t: CrossDomainTransfer) -> None:
        now = self.net.now
        if t.terminal():
            return
        t.attestation_arrived = True
        if now > t.deadline_tick:
            self.abort(t, now, "deadline")
            return
        if not self._repair_pairing(t, now):
            return
        self._try_finalize(t, now)

    def _try_finalize(self, t: CrossDomainTransfer, now: int) -> None:
        source = self.chains[t.source_chain]
        lock_entry = source.ledger.get(t.lock_ref)
        claim = Claim(t.source_chain, str(t.asset), True, entry_digest(lock_entry))
        try:
            att = vouch(t.source_chain, self.registry, claim,
                        self._threshold(t.source_chain), now)
        except InsufficientGateways:
            return  # retry via retry_finalize until deadline
        t.source_attestation = att
        ledger_entry = source.append_attestation(att.serialize().hex(), now)
        self.net.record("ledger", f"{t.source_chain}/{ledger_entry.local_ref}",
                        f"append kind=attestation transfer={t.transfer_id}")
        self.net.record("vouch", t.transfer_id,
                        f"side=source k={att.threshold_k} att={att.serialize().hex()}")
        t.state = TransferState.VOUCHED
        self._log(t, t.paired_source)
        self._finalize(t, now)

    def _finalize(self, t: CrossDomainTransfer, now: int) -> None:
        source = self.chains[t.source_chain]
        source_ref = self.resolver.local_ref_for(t.source_chain, t.asset)
        pointer = AuthoritativePointer(t.asset, t.dest_chain, t.source_chain, now)
        source.ledger.mark(source_ref, pointer)
        self.net.record("ledger", f"{t.source_chain}/{source_ref}",
                        f"mark to={t.dest_chain} transfer={t.transfer_id}")
        self.resolver.rebind_authority(t.asset, t.source_chain, t.dest_chain,
                                       (t.source_attestation, t.dest_attestation), now)
        self.net.record("resolver", str(t.asset),
                        f"rebind from={t.source_chain} to={t.dest_chain}")
        self.resolver.bind_existing(t.dest_chain, t.asset, t.record_ref)
        if t.holds_lock:
            self.locks.pop((t.source_chain, str(t.asset)), None)
            t.holds_lock = False
        agreement = self.peerings.agreements[t.agreement_id]
        self.peerings.tally_fee(agreement)
        t.state = TransferState.FINALIZED
        t.final_tick = now
        self._log(t, t.paired_source, f"fee={agreement.fee_per_transfer}")

    # -- abort ---------------------------------------------------------

    def abort(self, t: CrossDomainTransfer, now: int, reason: str) -> None:
        if t.terminal():
            raise AlreadyTerminal(f"{t.transfer_id} is {t.state.value}")
        t.state = TransferState.ABORTED
        t.abort_reason = reason
        t.final_tick = now
        if t.holds_lock:
            self.locks.pop((t.source_chain, str(t.asset)), None)
            t.holds_lock = False
        self._log(t, t.paired_source, f"reason={reason}")
        if t.record_confirmed and t.record_ref is not None:
            self._void_record(t)

    def _void_record(self, t: CrossDomainTransfer) -> None:
        chain = self.chains[t.dest_chain]
        if t.record_ref in chain.ledger.voids:
            return
        chain.ledger.void(t.record_ref, self.net.now)
        self.net.record("ledger", f"{t.dest_chain}/{t.record_ref}",
                        f"void transfer={t.transfer_id}")
