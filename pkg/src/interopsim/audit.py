"""Global invariant audits over a finished run.

Each audit inspects the final state plus the event log and returns
pass/fail with a detail string.  The CLI exit status is derived from
these, so an audit must only fail when the corresponding invariant is
genuinely violated.
"""

from __future__ import annotations

import logging
import re

from .chain import CONSENSUS_KINDS
from .gateway import TransferState, verify_attestation
from .report import AuditResult
from .valuenet import PathState

logger = logging.getLogger(__name__)

_LOCAL_REF = re.compile(r"\be\d+\b")


def run_all(sim) -> list[AuditResult]:
    checks = [
        ("clock_monotonic", _clock_monotonic),
        ("append_only_ledgers", _append_only),
        ("quorum_soundness", _quorum_soundness),
        ("confirm_latency", _confirm_latency),
        ("semantic_gating", _semantic_gating),
        ("idempotent_submission", _idempotent_submission),
        ("single_authority", _single_authority),
        ("no_lost_assets", _no_lost_assets),
        ("attestation_necessity", _attestation_necessity),
        ("masking_bijectivity", _masking_bijectivity),
        ("resolution_opacity", _resolution_opacity),
        ("no_partition_delivery", _no_partition_delivery),
        ("value_conservation", _value_conservation),
        ("reservation_consistency", _reservation_consistency),
    ]
    results = []
    for name, fn in checks:
        passed, detail = fn(sim)
        results.append(AuditResult(name, passed, detail))
    return results


def _clock_monotonic(sim):
    last_tick = 0
    for i, rec in enumerate(sim.net.log.records):
        if rec.seq != i:
            return False, f"record {i} has seq {rec.seq}"
        if rec.tick < last_tick:
            return False, f"tick went backwards at record {i}"
        last_tick = rec.tick
    return True, f"{len(sim.net.log.records)} records"


def _append_only(sim):
    """Ledger contents must equal the append records in the log, in
    order; anything else means an entry was dropped or reordered."""
    appended: dict[str, list[str]] = {cid: [] for cid in sim.chains}
    for rec in sim.net.log.records:
        if rec.kind != "ledger":
            continue
        verb = rec.detail.split(" ", 1)[0].split("=")[0]
        if verb not in ("confirm", "genesis", "append"):
            continue
        cid, ref = rec.subject.split("/", 1)
        appended[cid].append(ref)
    for cid, chain in sorted(sim.chains.items()):
        actual = [e.local_ref for e in chain.ledger.entries]
        if actual != appended[cid]:
            return False, f"{cid}: ledger {actual} vs log {appended[cid]}"
    return True, ""


def _quorum_soundness(sim):
    for cid, chain in sorted(sim.chains.items()):
        threshold = chain.quorum_threshold()
        for e in chain.ledger.entries:
            if e.kind not in CONSENSUS_KINDS:
                continue
            if len(e.confirming_nodes) < threshold:
                return False, (f"{cid}/{e.local_ref}: {len(e.confirming_nodes)} "
                               f"confirming < threshold {threshold}")
            if not set(e.confirming_nodes) <= set(chain.nodes):
                return False, f"{cid}/{e.local_ref}: unknown confirming node"
    return True, ""


def _confirm_latency(sim):
    for cid, chain in sorted(sim.chains.items()):
        for e in chain.ledger.entries:
            if e.kind in CONSENSUS_KINDS:
                age = e.confirmed_tick - e.submitted_tick
                if age < chain.confirm_latency_ticks:
                    return False, (f"{cid}/{e.local_ref}: confirmed after {age} "
                                   f"< latency {chain.confirm_latency_ticks}")
    return True, ""


def _semantic_gating(sim):
    for cid, chain in sorted(sim.chains.items()):
        for e in chain.ledger.entries:
            if e.unit is not None and e.unit.semantic_type != chain.semantic_type:
                return False, f"{cid}/{e.local_ref}: semantic mismatch"
    return True, ""


def _idempotent_submission(sim):
    for cid, chain in sorted(sim.chains.items()):
        seen = set()
        for e in chain.ledger.entries:
            if e.unit is None:
                continue
            if e.unit.idempotency_key in seen:
                return False, f"{cid}: duplicate key {e.unit.idempotency_key}"
            seen.add(e.unit.idempotency_key)
    return True, ""


def _single_authority(sim):
    resolver = sim.resolver
    masks = resolver.mask_tables()
    for cid in resolver.assets():
        pointer = resolver.resolve(cid)
        history = resolver.audit(cid)
        if history[0].forwarded_from is not None:
            return False, f"{cid}: history does not start at origin"
        for prev, cur in zip(history, history[1:]):
            if cur.forwarded_from != prev.home_chain:
                return False, f"{cid}: broken forward chain"
        if history[-1] != pointer:
            return False, f"{cid}: history tip is not the current home"
        holders = []
        for chain_id in sorted(masks):
            for ref, mapped in masks[chain_id].items():
                if mapped != cid:
                    continue
                chain = sim.chains[chain_id]
                entry = chain.ledger.get(ref)
                if entry is None:
                    return False, f"{cid}: masked ref {chain_id}/{ref} off ledger"
                if ref not in chain.ledger.marks and ref not in chain.ledger.voids:
                    holders.append(chain_id)
        if holders != [pointer.home_chain]:
            return False, f"{cid}: authoritative entries on {holders}, home {pointer.home_chain}"
    return True, f"{len(resolver.assets())} assets"


def _no_lost_assets(sim):
    engine = sim.transfers
    finalized_assets = {str(t.asset) for t in engine.transfers.values()
                        if t.state == TransferState.FINALIZED}
    for tid, t in sorted(engine.transfers.items()):
        if not t.terminal():
            return False, f"{tid}: still {t.state.value} at end of run"
        if t.holds_lock:
            return False, f"{tid}: terminal but still holds the source lock"
        if t.state == TransferState.FINALIZED:
            home = sim.resolver.resolve(t.asset).home_chain
            record = sim.chains[t.dest_chain].ledger.get(t.record_ref)
            if record is None:
                return False, f"{tid}: finalized without a destination record"
            if t.record_ref in sim.chains[t.dest_chain].ledger.voids:
                return False, f"{tid}: finalized but record voided"
        else:
            if (sim.resolver.resolve(t.asset).home_chain != t.source_chain
                    and str(t.asset) not in finalized_assets):
                return False, f"{tid}: aborted but authority left {t.source_chain}"
            if t.record_ref is not None and t.record_confirmed:
                if t.record_ref not in sim.chains[t.dest_chain].ledger.voids:
                    return False, f"{tid}: aborted but record not voided"
    return True, f"{len(engine.transfers)} transfers terminal"


def _attestation_necessity(sim):
    vouches: dict[str, set[str]] = {}
    for rec in sim.net.log.records:
        if rec.kind == "vouch":
            side = rec.detail.split(" ", 1)[0].split("=")[1]
            vouches.setdefault(rec.subject, set()).add(side)
    for tid, t in sorted(sim.transfers.transfers.items()):
        if t.state != TransferState.FINALIZED:
            continue
        if vouches.get(tid) != {"source", "dest"}:
            return False, f"{tid}: finalized without both vouch records"
        for side, att in (("source", t.source_attestation),
                          ("dest", t.dest_attestation)):
            if att is None:
                return False, f"{tid}: missing {side} attestation"
            if not verify_attestation(att, sim.registry):
                return False, f"{tid}: {side} attestation fails verification"
            chain_id = t.source_chain if side == "source" else t.dest_chain
            if att.threshold_k != sim.vouch_thresholds[chain_id]:
                return False, f"{tid}: {side} threshold {att.threshold_k} wrong"
    return True, ""


def _masking_bijectivity(sim):
    for chain_id, mask in sorted(sim.resolver.mask_tables().items()):
        ids = list(mask.values())
        if len(ids) != len(set(ids)):
            return False, f"{chain_id}: two refs share a cross id"
        back = sim.resolver._unmask[chain_id]
        if len(back) != len(mask):
            return False, f"{chain_id}: mask tables out of sync"
        for ref, cid in mask.items():
            if back.get(cid) != ref:
                return False, f"{chain_id}: {cid} does not map back to {ref}"
    return True, ""


def _resolution_opacity(sim):
    """Advertisement and resolve transcripts must not leak node ids or
    chain-local transaction refs."""
    node_ids = sorted(sim.net.known_nodes)
    scanned = 0
    for rec in sim.net.log.records:
        if rec.kind not in ("advert", "resolve"):
            continue
        scanned += 1
        text = f"{rec.subject} {rec.detail}"
        for nid in node_ids:
            if nid in text:
                return False, f"record {rec.seq} leaks node id {nid}"
        if _LOCAL_REF.search(text):
            return False, f"record {rec.seq} leaks a local ref"
    return True, f"{scanned} transcripts"


def _no_partition_delivery(sim):
    def isolated(chain_id, tick):
        for cid, start, end in sim.net.partition_history:
            if cid == chain_id and start <= tick and (end is None or tick < end):
                return True
        return False

    def link_cut(a, b, tick):
        pair = frozenset((a, b))
        for p, start, end in sim.net.cut_history:
            if p == pair and start <= tick and (end is None or tick < end):
                return True
        return False

    for rec in sim.net.log.records:
        if rec.kind != "deliver":
            continue
        fields = dict(f.split("=", 1) for f in rec.detail.split(" ") if "=" in f)
        src, dst = fields.get("src"), fields.get("dst")
        if dst and isolated(dst, rec.tick):
            return False, f"record {rec.seq}: delivery into partitioned {dst}"
        if src and isolated(src, rec.tick):
            return False, f"record {rec.seq}: delivery out of partitioned {src}"
        if src and dst and link_cut(src, dst, rec.tick):
            return False, f"record {rec.seq}: delivery across cut link {src}-{dst}"
    return True, ""


def _value_conservation(sim):
    problems = sim.valuenet.conservation_errors()
    if problems:
        return False, "; ".join(problems)
    for conn in sim.valuenet.connectors.values():
        for denom, amount in conn.reserves.items():
            if amount < 0:
                return False, f"{conn.connector_id}: negative {denom} reserve"
    return True, ""


def _reservation_consistency(sim):
    expected: dict[tuple[str, str], object] = {}
    for path in sim.valuenet.paths.values():
        if path.state != PathState.RESERVED:
            continue
        for hop in path.hops:
            key = (hop.connector_id, hop.denom_out)
            expected[key] = expected.get(key, 0) + hop.amount_out
    actual = sim.valuenet.residual_holds()
    if {k: v for k, v in expected.items() if v} != actual:
        return False, f"holds {actual} do not match open reservations {expected}"
    return True, ""
