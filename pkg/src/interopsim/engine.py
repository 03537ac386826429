"""Simulation orchestrator: builds the world from a scenario config,
drives the tick loop, collects workload outcomes.

Per-tick phases, in contractual order (golden logs depend on it):
  1. drain every event due this tick (deliveries, timers, faults,
     probes), including events those events schedule for the same tick;
  2. consensus phase: chains in id order confirm aged pending units
     (skipped entirely while a chain is partitioned), confirmation
     callbacks update survivor and transfer state;
  3. transfer step phase: transfers in initiation order act on what the
     consensus phase just told them;
  4. reservation expiry sweep.

The run ends at quiescence (no queued events, no pending units, all
workload terminal, no open reservations) or at the horizon, whichever
comes first.
"""

from __future__ import annotations

import hashlib
import logging
from typing import Optional

from . import audit as audit_mod
from .chain import (
    BlockchainSystem,
    Directionality,
    SemanticType,
    TransferUnit,
)
from .errors import (
    GrantMismatch,
    InteropError,
    NotFound,
    Unreachable,
)
from .gateway import (
    DelegationGrant,
    Gateway,
    GatewayRegistry,
    PeeringAgreement,
    PeeringRegistry,
    TransferEngine,
    advertise,
    mediated_read,
    verify_attestation,
)
from .identity import CrossId, Resolver
from .report import AuditResult, RunReport
from .scenario import ScenarioConfig, SubCfg
from .simnet import EventKind, FaultKind, FaultSpec, SimNet, fmt_detail
from .survivor import SubTxn, SurvivorLayer
from .valuenet import Connector, PathState, ValueNetwork

logger = logging.getLogger(__name__)


def payload_digest(payload: str) -> str:
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


class Simulation:
    """One isolated run; no state shared between instances."""

    def __init__(self, config: ScenarioConfig, seed: Optional[int] = None) -> None:
        self.config = config
        self.seed = config.seed if seed is None else seed
        self.net = SimNet(self.seed, config.inter_chain_latency, config.latency_jitter)
        self.chains: dict[str, BlockchainSystem] = {}
        self.registry = GatewayRegistry()
        self.resolver = Resolver(self.net.rng)
        self.peerings = PeeringRegistry()
        self.grants: dict[str, DelegationGrant] = {}
        self.assets: dict[str, CrossId] = {}
        self.vouch_thresholds: dict[str, int] = {}
        self.end_tick = 0
        self.events_executed = 0
        # workload outcomes keyed by section then id
        self.outcomes: dict[str, dict[str, dict]] = {
            "app_txns": {}, "transfers": {}, "payments": {}, "reads": {},
            "resolves": {}, "probes": {}}
        self._build_world()
        self.survivor = SurvivorLayer(self.net, self.chains)
        self.transfers = TransferEngine(self.net, self.chains, self.registry,
                                        self.resolver, self.peerings,
                                        self.vouch_thresholds)
        self.resolver.set_verifier(lambda att: verify_attestation(att, self.registry))
        self._seed_assets()
        self._emit_adverts()
        self._schedule_all()

    # -- construction --------------------------------------------------

    def _build_world(self) -> None:
        cfg = self.config
        for c in cfg.chains:
            chain = BlockchainSystem(
                c.chain_id, c.node_ids(), c.gateway_ids(), c.regime,
                c.quorum, c.confirm_latency, c.semantic,
                writers=set(c.writers), readers=set(c.readers))
            # gateways operate inside their own domain
            chain.writers.update(c.gateway_ids())
            chain.readers.update(c.gateway_ids())
            self.chains[c.chain_id] = chain
            self.vouch_thresholds[c.chain_id] = c.threshold()
            self.resolver.register_chain(c.chain_id, c.path)
            for gid in c.gateway_ids():
                self.registry.add(Gateway(gid, c.chain_id))
        for p in cfg.peerings:
            self.peerings.establish(PeeringAgreement(
                p.peering_id, p.chains[0], p.chains[1],
                frozenset(p.semantics), p.fee))
        denoms = {c.chain_id: c.denom for c in cfg.chains if c.denom}
        connectors = [Connector(cc.connector_id, tuple(cc.chains),
                                dict(cc.reserves), dict(cc.rates))
                      for cc in cfg.connectors]
        self.valuenet = ValueNetwork(denoms, connectors, cfg.reservation_ttl)
        for g in cfg.grants:
            self.grants[g.grant_id] = DelegationGrant(
                g.grant_id, g.grantor, g.grantee, g.asset, g.expiry)
        self.net.register_entities(
            self.chains,
            [n for c in cfg.chains for n in c.node_ids()],
            [g for c in cfg.chains for g in c.gateway_ids()])
        self.net.set_fault_applier(self._apply_crash)

    def _apply_crash(self, fault: FaultSpec, heal: bool) -> None:
        if fault.kind == FaultKind.NODE_CRASH:
            for nid in fault.target:
                chain_id = nid.split(".")[0]
                self.chains[chain_id].set_node_live(nid, heal)
        elif fault.kind == FaultKind.GATEWAY_CRASH:
            for gid in fault.target:
                self.registry.get(gid).live = heal

    def _seed_assets(self) -> None:
        """Genesis entries confirmed before the run; grants name assets
        by symbolic id, so translate those once minted."""
        for a in self.config.assets:
            chain = self.chains[a.chain]
            unit = TransferUnit(payload_digest(a.payload), chain.semantic_type,
                                Directionality.UNI, f"genesis:{a.asset_id}")
            entry = chain.append_genesis(unit)
            cid = self.resolver.mint_cross_id(chain, entry.local_ref, 0)
            self.assets[a.asset_id] = cid
            self.net.record("ledger", f"{a.chain}/{entry.local_ref}",
                            f"genesis asset={cid}")
            self.net.record("resolver", str(cid), f"register home={a.chain}")
        # grants target cross ids, not symbolic names
        for gid, grant in list(self.grants.items()):
            if grant.target in self.assets:
                self.grants[gid] = DelegationGrant(
                    grant.grant_id, grant.grantor, grant.grantee,
                    str(self.assets[grant.target]), grant.expiry_tick)

    def _emit_adverts(self) -> None:
        for cid in sorted(self.chains):
            adv = advertise(self.chains[cid], self.registry, self.resolver, 0)
            self.net.record("advert", cid, adv.transcript())

    def _schedule_all(self) -> None:
        # faults first so a fault at tick T lands before workload at T
        for f in self.config.faults:
            self.net.inject(FaultSpec(
                f.fault_id, FaultKind(f.kind), f.at,
                target=tuple(f.chains or f.nodes or f.gateways or f.faults),
                links=tuple(f.links), until_tick=f.until))
        for t in self.config.app_txns:
            self.net.timer(t.txn_id, self._app_txn_action(t), t.at,
                           detail="start kind=app_txn")
        for x in self.config.transfers:
            self.net.timer(x.transfer_id, self._transfer_action(x), x.at,
                           detail="start kind=transfer")
        for p in self.config.payments:
            self.net.timer(p.payment_id, self._payment_action(p), p.at,
                           detail="start kind=payment")
        for r in self.config.reads:
            self.net.timer(r.read_id, self._read_action(r), r.at,
                           detail="start kind=read")
        for q in self.config.resolves:
            self.net.timer(q.resolve_id, self._resolve_action(q), q.at,
                           detail="start kind=resolve")
        for pr in self.config.probes:
            self.net.schedule(EventKind.PROBE, pr.probe_id,
                              self._probe_action(pr), pr.at)

    # -- workload actions ----------------------------------------------

    def _app_txn_action(self, cfg):
        def run():
            subs = []
            for s in cfg.subs:
                semantic = self.chains[s.candidates[0]].semantic_type
                unit = TransferUnit(payload_digest(s.payload), semantic,
                                    Directionality.UNI, f"{cfg.txn_id}/{s.sub_id}")
                subs.append(SubTxn(s.sub_id, unit, list(s.candidates),
                                   s.timeout, cfg.app))
            try:
                self.survivor.submit_app_txn(cfg.txn_id, subs, self.net.now)
            except InteropError as exc:
                self.outcomes["app_txns"][cfg.txn_id] = {
                    "state": "REJECTED", "error": type(exc).__name__}
                self.net.record("txn", cfg.txn_id,
                                f"state=REJECTED error={type(exc).__name__}")
        return run

    def _transfer_action(self, cfg):
        def run():
            try:
                self.transfers.initiate(
                    cfg.transfer_id, self.assets[cfg.asset], cfg.source,
                    cfg.dest, cfg.beneficiary, cfg.deadline, self.net.now)
            except InteropError as exc:
                self.outcomes["transfers"][cfg.transfer_id] = {
                    "state": "REJECTED", "error": type(exc).__name__}
                self.net.record("transfer", cfg.transfer_id,
                                f"state=REJECTED error={type(exc).__name__}")
        return run

    def _payment_action(self, cfg):
        def run():
            try:
                path = self.valuenet.build_path(
                    cfg.payment_id, cfg.source, cfg.dest, cfg.amount,
                    cfg.denom_in, cfg.denom_out, self.net.now)
            except InteropError as exc:
                self.outcomes["payments"][cfg.payment_id] = {
                    "state": "REJECTED", "error": type(exc).__name__}
                self.net.record("path", cfg.payment_id,
                                f"state=REJECTED error={type(exc).__name__}")
                return
            self.net.record("path", cfg.payment_id, fmt_detail(
                ("state", path.state.value),
                ("route", path.route_ids()),
                ("amount_in", path.amount_in), ("denom_in", path.denom_in),
                ("amount_out", path.amount_out), ("denom_out", path.denom_out),
                ("expiry", path.expiry_tick)))
            if cfg.settle_after is not None:
                self.net.timer(cfg.payment_id, self._settle_action(cfg.payment_id),
                               cfg.settle_after, detail="settle due")
            elif cfg.release_after is not None:
                self.net.timer(cfg.payment_id, self._release_action(cfg.payment_id),
                               cfg.release_after, detail="release due")
        return run

    def _settle_action(self, path_id):
        def run():
            try:
                path = self.valuenet.settle_path(path_id, self.net.now)
            except InteropError as exc:
                self.net.record("path", path_id,
                                f"state=ERROR error={type(exc).__name__}")
                return
            self.net.record("path", path_id, fmt_detail(
                ("state", path.state.value),
                ("amount_out", path.amount_out), ("denom_out", path.denom_out),
                ("receiver", path.receiver_chain)))
        return run

    def _release_action(self, path_id):
        def run():
            try:
                path = self.valuenet.release_path(path_id, self.net.now)
            except InteropError as exc:
                self.net.record("path", path_id,
                                f"state=ERROR error={type(exc).__name__}")
                return
            self.net.record("path", path_id, f"state={path.state.value}")
        return run

    def _read_action(self, cfg):
        def run():
            now = self.net.now
            outcome = self.outcomes["reads"]
            try:
                cid = self.assets[cfg.asset]
                pointer = self.resolver.resolve(cid)
                home = pointer.home_chain
                if self.net.chain_partitioned(home):
                    raise Unreachable(f"{home} is partitioned")
                gw = self.registry.lowest_live(home)
                if gw is None:
                    raise Unreachable(f"{home} has no live gateway")
                grant = self.grants.get(cfg.grant) if cfg.grant else None
                if grant is None:
                    raise GrantMismatch("no delegation grant presented")
                view = mediated_read(gw, self.registry, self.chains[home],
                                     self.resolver, grant, cid,
                                     cfg.requester, now)
            except InteropError as exc:
                outcome[cfg.read_id] = {"state": "ERROR",
                                        "error": type(exc).__name__}
                self.net.record("read", cfg.read_id,
                                f"result={type(exc).__name__}")
                return
            outcome[cfg.read_id] = {
                "state": "OK", "chain": view.chain_id,
                "digest": view.payload_digest, "voided": view.voided}
            self.net.record("read", cfg.read_id, fmt_detail(
                ("asset", view.cross_id), ("chain", view.chain_id),
                ("digest", view.payload_digest),
                ("confirmed", view.confirmed_tick),
                ("via", view.attestation.signatures[0][0])))
        return run

    def _resolve_action(self, cfg):
        def run():
            outcome = self.outcomes["resolves"]
            try:
                pointer, endpoints = self.resolve_endpoint(self.assets[cfg.asset])
            except InteropError as exc:
                outcome[cfg.resolve_id] = {"state": "ERROR",
                                           "error": type(exc).__name__}
                self.net.record("resolve", cfg.resolve_id,
                                f"result={type(exc).__name__}")
                return
            outcome[cfg.resolve_id] = {"state": "OK",
                                       "home": pointer.home_chain,
                                       "endpoints": list(endpoints)}
            self.net.record("resolve", cfg.resolve_id, fmt_detail(
                ("asset", pointer.asset), ("home", pointer.home_chain),
                ("endpoints", list(endpoints))))
        return run

    def _probe_action(self, cfg):
        def run():
            outcome = self.outcomes["probes"]
            chain = self.chains[cfg.chain]
            gw = self.registry.lowest_live(cfg.chain)
            if self.net.chain_partitioned(cfg.chain) or gw is None:
                outcome[cfg.probe_id] = {"state": "ERROR", "error": "Unreachable"}
                self.net.record("probe", cfg.probe_id,
                                f"chain={cfg.chain} result=Unreachable")
                return
            status = chain.status(self.net.now, reachable=True)
            outcome[cfg.probe_id] = {
                "state": "OK", "live": status.live_node_count,
                "pending": status.pending_count,
                "latency": f"{status.mean_confirm_latency:.2f}"}
            self.net.record("probe", cfg.probe_id, fmt_detail(
                ("chain", cfg.chain), ("via", gw.gateway_id),
                ("live", status.live_node_count),
                ("pending", status.pending_count),
                ("latency", f"{status.mean_confirm_latency:.2f}"),
                ("reachable", 1)))
        return run

    # -- synchronous facade (direct API, used by tests) ----------------

    def submit(self, chain_id: str, unit: TransferUnit, credential: str):
        """Reachability-checked submission."""
        if self.net.chain_partitioned(chain_id):
            raise Unreachable(f"{chain_id} is partitioned")
        return self.chains[chain_id].submit(unit, credential, self.net.now)

    def read_ledger(self, chain_id: str, query, credential: str):
        """query is a local_ref or a CrossId; cross ids translate via
        this chain's mask only, never another chain's."""
        if self.net.chain_partitioned(chain_id):
            raise Unreachable(f"{chain_id} is partitioned")
        ref = query
        if isinstance(query, CrossId):
            ref = self.resolver.local_ref_for(chain_id, query)
        return self.chains[chain_id].read(ref, credential)

    def probe_status(self, chain_id: str):
        if chain_id not in self.chains:
            raise NotFound(f"unknown chain {chain_id}")
        if self.net.chain_partitioned(chain_id):
            raise Unreachable(f"{chain_id} is partitioned")
        if self.registry.lowest_live(chain_id) is None and self.chains[chain_id].gateway_ids:
            raise Unreachable(f"{chain_id} has no live gateway")
        return self.chains[chain_id].status(self.net.now, reachable=True)

    def resolve_endpoint(self, cross_id: CrossId):
        """Resolution as an outside party sees it: pointer plus the home
        chain's live gateway endpoints, never node addresses."""
        pointer = self.resolver.resolve(cross_id)
        home = pointer.home_chain
        if self.net.chain_partitioned(home):
            raise Unreachable(f"{home} is partitioned")
        endpoints = tuple(g.gateway_id for g in self.registry.live_gateways(home))
        if not endpoints:
            raise Unreachable(f"{home} has no live gateway")
        return pointer, endpoints

    # -- main loop -----------------------------------------------------

    def run(self) -> RunReport:
        tick = 0
        while tick <= self.config.horizon:
            self.events_executed += self.net.drain(tick)
            for cid in sorted(self.chains):
                if self.net.chain_partitioned(cid):
                    continue
                for entry in self.chains[cid].advance_consensus(tick):
                    self.net.record("ledger", f"{cid}/{entry.local_ref}", fmt_detail(
                        ("confirm", entry.kind),
                        ("submitted", entry.submitted_tick),
                        ("nodes", len(entry.confirming_nodes))))
                    self.survivor.on_confirmed(cid, entry)
                    self.transfers.on_confirmed(cid, entry)
            self.transfers.step_all(tick)
            for pid in self.valuenet.expire(tick):
                self.net.record("path", pid, "state=EXPIRED")
            if self._quiescent():
                break
            tick += 1
        self.end_tick = min(tick, self.config.horizon)
        self._emit_resolver_dump()
        return self._assemble_report()

    def _quiescent(self) -> bool:
        if self.net.has_events():
            return False
        if any(c.pending for c in self.chains.values()):
            return False
        if not self.survivor.all_terminal():
            return False
        if any(not t.terminal() for t in self.transfers.transfers.values()):
            return False
        if any(p.state == PathState.RESERVED for p in self.valuenet.paths.values()):
            return False
        return True

    def _emit_resolver_dump(self) -> None:
        for line in self.resolver.dump_lines():
            cid, rest = line.split(" ", 1)
            self.net.record("resolver", cid, rest)

    # -- reporting -----------------------------------------------------

    def _assemble_report(self) -> RunReport:
        self._collect_outcomes()
        duplicates = {}
        for t in self.config.app_txns:
            if t.txn_id in self.survivor.txns:
                dups = self.survivor.poll_duplicates(t.txn_id)
                if dups:
                    duplicates[t.txn_id] = [f"{s}:{c}/{r}" for s, c, r in dups]
        settlements = {f"{a}|{b}": str(fee)
                       for (a, b), fee in sorted(self.peerings.settlements.items())}
        audits = audit_mod.run_all(self)
        metrics = {
            "events_executed": self.events_executed,
            "ledger_entries": {cid: len(c.ledger.entries)
                               for cid, c in sorted(self.chains.items())},
            "log_records": len(self.net.log.records),
        }
        return RunReport(
            scenario=self.config.name, seed=self.seed,
            horizon=self.config.horizon, end_tick=self.end_tick,
            outcomes=self.outcomes, duplicates=duplicates,
            settlements=settlements, audits=audits, metrics=metrics)

    def _collect_outcomes(self) -> None:
        for t in self.config.app_txns:
            if t.txn_id in self.outcomes["app_txns"]:
                continue  # rejected at submission
            status = self.survivor.poll_status(t.txn_id)
            self.outcomes["app_txns"][t.txn_id] = {
                "state": status.state, "tick": status.final_tick,
                "attempts": status.attempts}
        for x in self.config.transfers:
            if x.transfer_id in self.outcomes["transfers"]:
                continue
            t = self.transfers.transfers.get(x.transfer_id)
            if t is None:
                self.outcomes["transfers"][x.transfer_id] = {"state": "MISSING"}
                continue
            entry = {"state": t.state.value, "tick": t.final_tick}
            if t.abort_reason:
                entry["reason"] = t.abort_reason
            self.outcomes["transfers"][x.transfer_id] = entry
        for p in self.config.payments:
            if p.payment_id in self.outcomes["payments"]:
                continue
            path = self.valuenet.paths.get(p.payment_id)
            if path is None:
                self.outcomes["payments"][p.payment_id] = {"state": "MISSING"}
                continue
            self.outcomes["payments"][p.payment_id] = {
                "state": path.state.value, "tick": path.final_tick,
                "amount_out": str(path.amount_out), "denom_out": path.denom_out,
                "route": path.route_ids()}


def run_scenario(config: ScenarioConfig, seed: Optional[int] = None) -> tuple[RunReport, Simulation]:
    sim = Simulation(config, seed)
    report = sim.run()
    return report, sim
