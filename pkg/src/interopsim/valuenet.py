"""Connector network for cross-chain value movement.

Modeled after interledger-style two-phase payments: a path of connector
hops is reserved end to end (all or nothing), then settled or released.
All amounts and exchange rates are exact rationals; floats never enter
the arithmetic.

Routing is fewest hops with a deterministic tie-break on the
lexicographically smallest connector-id sequence.  A connector's
capacity is its reserve of the outgoing denomination minus everything
already held for unsettled reservations; an overloaded connector simply
rejects the new request and the whole path build fails without residue.

Reservations expire reservation_ttl ticks after they are made; the
expiry sweep releases them at the tick boundary.
"""

from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Optional

from .errors import AlreadyTerminal, NoRoute, NotFound, Overloaded, PathExpired

logger = logging.getLogger(__name__)

DEFAULT_RESERVATION_TTL = 50


@dataclass
class Connector:
    """Liquidity provider standing between two or more chains."""

    connector_id: str
    adjacent_chains: tuple[str, ...]
    reserves: dict[str, Fraction]
    rates: dict[tuple[str, str], Fraction]

    def rate(self, denom_in: str, denom_out: str) -> Optional[Fraction]:
        return self.rates.get((denom_in, denom_out))


@dataclass(frozen=True)
class Hop:
    connector_id: str
    chain_in: str
    chain_out: str
    denom_in: str
    denom_out: str
    amount_in: Fraction
    amount_out: Fraction


class PathState(str, Enum):
    RESERVED = "RESERVED"
    SETTLED = "SETTLED"
    RELEASED = "RELEASED"
    EXPIRED = "EXPIRED"


@dataclass
class PaymentPath:
    path_id: str
    sender_chain: str
    receiver_chain: str
    hops: tuple[Hop, ...]
    amount_in: Fraction
    denom_in: str
    amount_out: Fraction
    denom_out: str
    state: PathState
    reserved_tick: int
    expiry_tick: int
    final_tick: Optional[int] = None

    def route_ids(self) -> list[str]:
        return [h.connector_id for h in self.hops]


class ValueNetwork:
    """All connectors plus reservation and settlement state for a run."""

    def __init__(self, chain_denoms: dict[str, str],
                 connectors: list[Connector],
                 reservation_ttl: int = DEFAULT_RESERVATION_TTL) -> None:
        self.chain_denoms = dict(chain_denoms)
        self.connectors = {c.connector_id: c for c in connectors}
        self.reservation_ttl = reservation_ttl
        self.paths: dict[str, PaymentPath] = {}
        # held amounts per (connector, denom) for unsettled reservations
        self.holds: dict[tuple[str, str], Fraction] = {}
        self.credits: dict[tuple[str, str], Fraction] = {}
        self.settled_hops: list[Hop] = []
        self.initial_reserves = {
            (c.connector_id, d): amt
            for c in connectors for d, amt in c.reserves.items()}

    # -- capacity ------------------------------------------------------

    def available(self, connector_id: str, denom: str) -> Fraction:
        reserve = self.connectors[connector_id].reserves.get(denom, Fraction(0))
        return reserve - self.holds.get((connector_id, denom), Fraction(0))

    def _hold(self, connector_id: str, denom: str, amount: Fraction) -> None:
        key = (connector_id, denom)
        self.holds[key] = self.holds.get(key, Fraction(0)) + amount
        assert self.available(connector_id, denom) >= 0, "hold exceeded reserve"

    def _release_hold(self, connector_id: str, denom: str, amount: Fraction) -> None:
        key = (connector_id, denom)
        self.holds[key] -= amount
        assert self.holds[key] >= 0, "negative hold"
        if self.holds[key] == 0:
            del self.holds[key]

    # -- routing -------------------------------------------------------

    def route(self, sender_chain: str, receiver_chain: str) -> Optional[list[tuple[str, str]]]:
        """Fewest-hop route as [(connector_id, next_chain), ...], ties
        broken by the lexicographically smallest connector sequence.
        Edges exist only where the connector quotes the needed rate."""
        if sender_chain == receiver_chain:
            return None
        if sender_chain not in self.chain_denoms or receiver_chain not in self.chain_denoms:
            return None
        # priority: (hop count, connector id sequence, chain sequence)
        frontier = [(0, (), (sender_chain,), sender_chain, [])]
        done = set()
        while frontier:
            hops, conn_seq, chain_seq, chain, path = heapq.heappop(frontier)
            if chain == receiver_chain:
                return path
            if chain in done:
                continue
            done.add(chain)
            for cid in sorted(self.connectors):
                conn = self.connectors[cid]
                if chain not in conn.adjacent_chains:
                    continue
                for nxt in sorted(conn.adjacent_chains):
                    if nxt == chain or nxt in done:
                        continue
                    if nxt not in self.chain_denoms:
                        continue
                    if conn.rate(self.chain_denoms[chain], self.chain_denoms[nxt]) is None:
                        continue
                    heapq.heappush(frontier, (
                        hops + 1, conn_seq + (cid,), chain_seq + (nxt,),
                        nxt, path + [(cid, nxt)]))
        return None

    # -- reservation ---------------------------------------------------

    def build_path(self, path_id: str, sender_chain: str, receiver_chain: str,
                   amount_in: Fraction, denom_in: str, denom_out: str,
                   now: int) -> PaymentPath:
        """Reserve capacity along the best route, atomically.

        On any shortfall nothing is held and Overloaded is raised, so a
        failed build leaves the global reservation set untouched.
        """
        if amount_in <= 0:
            raise NoRoute("amount must be positive")
        if self.chain_denoms.get(sender_chain) != denom_in:
            raise NoRoute(f"{sender_chain} does not denominate {denom_in}")
        if self.chain_denoms.get(receiver_chain) != denom_out:
            raise NoRoute(f"{receiver_chain} does not denominate {denom_out}")
        steps = self.route(sender_chain, receiver_chain)
        if steps is None:
            raise NoRoute(f"no connector path {sender_chain} -> {receiver_chain}")

        hops: list[Hop] = []
        amount = amount_in
        chain = sender_chain
        for cid, nxt in steps:
            conn = self.connectors[cid]
            d_in, d_out = self.chain_denoms[chain], self.chain_denoms[nxt]
            out = amount * conn.rate(d_in, d_out)
            hops.append(Hop(cid, chain, nxt, d_in, d_out, amount, out))
            amount, chain = out, nxt

        # check every hop before holding anything
        shortfall = None
        planned: dict[tuple[str, str], Fraction] = {}
        for hop in hops:
            key = (hop.connector_id, hop.denom_out)
            need = planned.get(key, Fraction(0)) + hop.amount_out
            if self.available(*key) < need:
                shortfall = hop
                break
            planned[key] = need
        if shortfall is not None:
            raise Overloaded(
                f"{shortfall.connector_id} cannot cover {shortfall.amount_out} "
                f"{shortfall.denom_out}")
        for hop in hops:
            self._hold(hop.connector_id, hop.denom_out, hop.amount_out)

        path = PaymentPath(path_id, sender_chain, receiver_chain, tuple(hops),
                           amount_in, denom_in, hops[-1].amount_out, denom_out,
                           PathState.RESERVED, now, now + self.reservation_ttl)
        self.paths[path_id] = path
        return path

    # -- settlement ----------------------------------------------------

    def _get(self, path_id: str) -> PaymentPath:
        if path_id not in self.paths:
            raise NotFound(f"unknown path {path_id}")
        return self.paths[path_id]

    def settle_path(self, path_id: str, now: int) -> PaymentPath:
        """Move value along every hop; conservation per denomination."""
        path = self._get(path_id)
        if path.state != PathState.RESERVED:
            raise AlreadyTerminal(f"{path_id} is {path.state.value}")
        if now >= path.expiry_tick:
            self._expire_path(path, now)
            raise PathExpired(f"{path_id} expired at {path.expiry_tick}")
        for hop in path.hops:
            conn = self.connectors[hop.connector_id]
            conn.reserves[hop.denom_in] = conn.reserves.get(hop.denom_in, Fraction(0)) + hop.amount_in
            conn.reserves[hop.denom_out] = conn.reserves[hop.denom_out] - hop.amount_out
            self._release_hold(hop.connector_id, hop.denom_out, hop.amount_out)
            assert conn.reserves[hop.denom_out] >= 0, "reserve went negative"
            self.settled_hops.append(hop)
        key = (path.receiver_chain, path.denom_out)
        self.credits[key] = self.credits.get(key, Fraction(0)) + path.amount_out
        path.state = PathState.SETTLED
        path.final_tick = now
        return path

    def release_path(self, path_id: str, now: int) -> PaymentPath:
        path = self._get(path_id)
        if path.state != PathState.RESERVED:
            raise AlreadyTerminal(f"{path_id} is {path.state.value}")
        for hop in path.hops:
            self._release_hold(hop.connector_id, hop.denom_out, hop.amount_out)
        path.state = PathState.RELEASED
        path.final_tick = now
        return path

    def _expire_path(self, path: PaymentPath, now: int) -> None:
        for hop in path.hops:
            self._release_hold(hop.connector_id, hop.denom_out, hop.amount_out)
        path.state = PathState.EXPIRED
        path.final_tick = now

    def expire(self, now: int) -> list[str]:
        """Tick-boundary sweep; returns the ids just expired."""
        out = []
        for pid in sorted(self.paths):
            path = self.paths[pid]
            if path.state == PathState.RESERVED and now >= path.expiry_tick:
                self._expire_path(path, now)
                out.append(pid)
        return out

    # -- audit helpers -------------------------------------------------

    def residual_holds(self) -> dict[tuple[str, str], Fraction]:
        return {k: v for k, v in self.holds.items() if v != 0}

    def conservation_errors(self) -> list[str]:
        """Exact per-denomination check of reserve deltas vs settled hops."""
        denoms = set(d for _, d in self.initial_reserves)
        for c in self.connectors.values():
            denoms.update(c.reserves)
        problems = []
        for denom in sorted(denoms):
            final = sum((c.reserves.get(denom, Fraction(0))
                         for c in self.connectors.values()), Fraction(0))
            initial = sum((amt for (_, d), amt in self.initial_reserves.items()
                           if d == denom), Fraction(0))
            inflow = sum((h.amount_in for h in self.settled_hops
                          if h.denom_in == denom), Fraction(0))
            outflow = sum((h.amount_out for h in self.settled_hops
                           if h.denom_out == denom), Fraction(0))
            if final - initial != inflow - outflow:
                problems.append(
                    f"{denom}: reserve delta {final - initial} != settled net "
                    f"{inflow - outflow}")
        return problems
