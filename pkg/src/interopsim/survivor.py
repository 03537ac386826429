"""Survivability layer: timeout-driven fallback across candidate chains.

An application transaction is a set of sub-transactions, each with an
ordered candidate chain list.  Submission is fire-and-forget: the unit
is handed to the current candidate (silently lost if that chain is
partitioned) and a timer drives fallback to the next candidate.  The
application never learns which chain confirmed except through the audit
call; the caller-visible outcome record carries state, tick and attempt
count only.

Duplicates are tolerated by design: a chain that heals after the layer
has moved on may still confirm the old submission.  Every confirmation
is recorded and the surplus is surfaced via poll_duplicates.

Timing rule: a timer due the same tick as a confirmation fires first
(timers drain before the consensus phase), so the attempt times out and
the confirmation then lands as a late confirmation of the same sub.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

from .chain import TransferUnit
from .errors import EmptyCandidates, InteropError, NotFound, SemanticMismatch

logger = logging.getLogger(__name__)

DEFAULT_TIMEOUT_FACTOR = 3

ATTEMPT_PENDING = "pending"
ATTEMPT_CONFIRMED = "confirmed"
ATTEMPT_TIMEOUT = "timeout"
ATTEMPT_PREEMPTED = "preempted"

TXN_PENDING = "PENDING"
TXN_CONFIRMED = "CONFIRMED"
TXN_FAILED = "FAILED"


@dataclass
class Attempt:
    chain_id: str
    start_tick: int
    outcome: str = ATTEMPT_PENDING
    end_tick: Optional[int] = None


@dataclass
class SubTxn:
    sub_id: str
    unit: TransferUnit
    candidates: list[str]
    timeout_override: Optional[int] = None
    credential: str = "anon"
    attempts: list[Attempt] = field(default_factory=list)
    confirmations: list[tuple[str, str, int]] = field(default_factory=list)
    state: str = TXN_PENDING
    current: int = -1


@dataclass
class AppTransaction:
    txn_id: str
    subs: dict[str, SubTxn]
    state: str = TXN_PENDING
    final_tick: Optional[int] = None

    def terminal(self) -> bool:
        return self.state != TXN_PENDING


@dataclass
class OutcomeRecord:
    """What the caller sees: no chain identities."""

    state: str
    final_tick: Optional[int]
    attempts: int


class SurvivorLayer:
    def __init__(self, net, chains: dict) -> None:
        self.net = net
        self.chains = chains
        self.txns: dict[str, AppTransaction] = {}
        self._by_key: dict[str, tuple[str, str]] = {}

    # -- submission ----------------------------------------------------

    def submit_app_txn(self, txn_id: str, subs: list[SubTxn], now: int) -> str:
        for sub in subs:
            if not sub.candidates:
                raise EmptyCandidates(f"{txn_id}/{sub.sub_id} has no candidates")
            for cid in sub.candidates:
                if cid not in self.chains:
                    raise NotFound(f"unknown candidate chain {cid}")
                if self.chains[cid].semantic_type != sub.unit.semantic_type:
                    raise SemanticMismatch(
                        f"candidate {cid} is {self.chains[cid].semantic_type.value}, "
                        f"unit is {sub.unit.semantic_type.value}")
        txn = AppTransaction(txn_id, {s.sub_id: s for s in subs})
        self.txns[txn_id] = txn
        for sub in subs:
            self._by_key[sub.unit.idempotency_key] = (txn_id, sub.sub_id)
            self._start_attempt(txn, sub, now)
        return txn_id

    def _timeout_for(self, sub: SubTxn, chain_id: str) -> int:
        if sub.timeout_override is not None:
            return sub.timeout_override
        return DEFAULT_TIMEOUT_FACTOR * self.chains[chain_id].confirm_latency_ticks

    def _start_attempt(self, txn: AppTransaction, sub: SubTxn, now: int) -> None:
        sub.current += 1
        idx = sub.current
        chain_id = sub.candidates[idx]
        sub.attempts.append(Attempt(chain_id, now))
        subject = f"{txn.txn_id}/{sub.sub_id}"
        self.net.record("txn", subject, f"attempt={idx + 1} chain={chain_id} submit")
        chain = self.chains[chain_id]

        def do_submit():
            try:
                receipt = chain.submit(sub.unit, sub.credential, self.net.now)
            except InteropError as exc:
                self.net.record("reject", subject,
                                f"chain={chain_id} error={type(exc).__name__}")
                return
            self.net.record("ledger", f"{chain_id}/{receipt.local_ref}",
                            f"submit kind=unit txn={subject}")

        self.net.local_deliver(chain_id, subject, do_submit,
                               detail=f"msg=submit attempt={idx + 1}")
        timeout = self._timeout_for(sub, chain_id)
        self.net.timer(subject, lambda: self._on_timeout(txn, sub, idx),
                       timeout, detail=f"timeout attempt={idx + 1}")

    # -- progress ------------------------------------------------------

    def _on_timeout(self, txn: AppTransaction, sub: SubTxn, idx: int) -> None:
        if sub.state != TXN_PENDING or idx != sub.current:
            return  # stale timer
        now = self.net.now
        attempt = sub.attempts[idx]
        attempt.outcome = ATTEMPT_TIMEOUT
        attempt.end_tick = now
        subject = f"{txn.txn_id}/{sub.sub_id}"
        self.net.record("txn", subject, f"attempt={idx + 1} chain={attempt.chain_id} timeout")
        if sub.current + 1 < len(sub.candidates):
            self._start_attempt(txn, sub, now)
        else:
            sub.state = TXN_FAILED
            self._refresh_txn_state(txn, now)

    def on_confirmed(self, chain_id: str, entry) -> None:
        """Consensus callback; every confirmation is recorded, including
        late ones from chains the layer already abandoned."""
        if entry.unit is None:
            return
        hit = self._by_key.get(entry.unit.idempotency_key)
        if hit is None:
            return
        txn = self.txns[hit[0]]
        sub = txn.subs[hit[1]]
        now = self.net.now
        sub.confirmations.append((chain_id, entry.local_ref, now))
        subject = f"{txn.txn_id}/{sub.sub_id}"
        late = len(sub.confirmations) > 1 or sub.state != TXN_PENDING
        self.net.record("txn", subject,
                        f"confirmed chain={chain_id} ref={entry.local_ref}"
                        + (" late=1" if late else ""))
        if sub.state != TXN_PENDING:
            return
        sub.state = TXN_CONFIRMED
        for attempt in sub.attempts:
            if attempt.outcome == ATTEMPT_PENDING:
                attempt.outcome = (ATTEMPT_CONFIRMED if attempt.chain_id == chain_id
                                   else ATTEMPT_PREEMPTED)
                attempt.end_tick = now
        self._refresh_txn_state(txn, now)

    def _refresh_txn_state(self, txn: AppTransaction, now: int) -> None:
        if txn.terminal():
            return
        states = {sub.state for sub in txn.subs.values()}
        if TXN_FAILED in states:
            txn.state = TXN_FAILED
        elif states == {TXN_CONFIRMED}:
            txn.state = TXN_CONFIRMED
        else:
            return
        txn.final_tick = now
        self.net.record("txn", txn.txn_id,
                        f"state={txn.state} attempts={self._attempt_count(txn)}")

    def _attempt_count(self, txn: AppTransaction) -> int:
        return sum(len(sub.attempts) for sub in txn.subs.values())

    # -- caller surface ------------------------------------------------

    def poll_status(self, txn_id: str) -> OutcomeRecord:
        txn = self._get(txn_id)
        return OutcomeRecord(txn.state, txn.final_tick, self._attempt_count(txn))

    def audit(self, txn_id: str) -> dict[str, SubTxn]:
        """Full per-chain truth; the only place chain identities leak."""
        return dict(self._get(txn_id).subs)

    def poll_duplicates(self, txn_id: str) -> list[tuple[str, str, str]]:
        """(sub_id, chain, ref) for every confirmation beyond the first."""
        txn = self._get(txn_id)
        out = []
        for sid in sorted(txn.subs):
            for chain_id, ref, _ in txn.subs[sid].confirmations[1:]:
                out.append((sid, chain_id, ref))
        return out

    def _get(self, txn_id: str) -> AppTransaction:
        if txn_id not in self.txns:
            raise NotFound(f"unknown app transaction {txn_id}")
        return self.txns[txn_id]

    def all_terminal(self) -> bool:
        return all(t.terminal() for t in self.txns.values())
