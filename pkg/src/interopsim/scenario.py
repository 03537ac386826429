"""Scenario files: YAML schema, parsing and validation.

A scenario declares the world (chains, assets, peerings, connectors)
and the workload (app transactions, transfers, payments, reads,
resolves, probes) plus injected faults.  Validation is collecting: one
ValidationError carries every problem found, each tagged with the field
path that caused it.

Exact amounts (fees, reserves, rates, payment amounts) must be written
as ints or strings ("2/3", "1.25"); YAML floats are rejected to keep
the arithmetic rational.  The full schema is documented in
docs/scenario_format.md.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Optional

import yaml

from .chain import PermissionRegime, SemanticType
from .errors import ParseError, ValidationError

logger = logging.getLogger(__name__)

SEMANTIC_VALUES = {s.value for s in SemanticType}
FAULT_KINDS = {"partition", "node_crash", "gateway_crash", "heal"}


@dataclass
class ChainCfg:
    chain_id: str
    nodes: int
    gateways: int
    quorum: Fraction
    confirm_latency: int
    semantic: SemanticType
    regime: PermissionRegime
    path: Optional[str] = None
    writers: list[str] = field(default_factory=list)
    readers: list[str] = field(default_factory=list)
    vouch_threshold: Optional[int] = None
    denom: Optional[str] = None

    def threshold(self) -> int:
        if self.vouch_threshold is not None:
            return self.vouch_threshold
        return self.gateways // 2 + 1

    def node_ids(self) -> list[str]:
        return [f"{self.chain_id}.n{i}" for i in range(1, self.nodes + 1)]

    def gateway_ids(self) -> list[str]:
        return [f"{self.chain_id}.g{i}" for i in range(1, self.gateways + 1)]


@dataclass
class AssetCfg:
    asset_id: str
    chain: str
    payload: str


@dataclass
class PeeringCfg:
    peering_id: str
    chains: tuple[str, str]
    semantics: list[SemanticType]
    fee: Fraction


@dataclass
class ConnectorCfg:
    connector_id: str
    chains: list[str]
    reserves: dict[str, Fraction]
    rates: dict[tuple[str, str], Fraction]


@dataclass
class SubCfg:
    sub_id: str
    candidates: list[str]
    payload: str
    timeout: Optional[int] = None


@dataclass
class AppTxnCfg:
    txn_id: str
    at: int
    subs: list[SubCfg]
    app: str = "anon"


@dataclass
class TransferCfg:
    transfer_id: str
    at: int
    asset: str
    source: str
    dest: str
    beneficiary: str
    deadline: int


@dataclass
class PaymentCfg:
    payment_id: str
    at: int
    source: str
    dest: str
    amount: Fraction
    denom_in: str
    denom_out: str
    settle_after: Optional[int] = None
    release_after: Optional[int] = None


@dataclass
class FaultCfg:
    fault_id: str
    kind: str
    at: int
    chains: list[str] = field(default_factory=list)
    links: list[tuple[str, str]] = field(default_factory=list)
    nodes: list[str] = field(default_factory=list)
    gateways: list[str] = field(default_factory=list)
    faults: list[str] = field(default_factory=list)
    until: Optional[int] = None


@dataclass
class GrantCfg:
    grant_id: str
    grantor: str
    grantee: str
    asset: str
    expiry: int


@dataclass
class ReadCfg:
    read_id: str
    at: int
    asset: str
    requester: str
    grant: Optional[str] = None


@dataclass
class ResolveCfg:
    resolve_id: str
    at: int
    asset: str


@dataclass
class ProbeCfg:
    probe_id: str
    at: int
    chain: str


@dataclass
class ScenarioConfig:
    name: str
    horizon: int
    seed: int = 0
    inter_chain_latency: int = 2
    latency_jitter: int = 0
    reservation_ttl: int = 50
    chains: list[ChainCfg] = field(default_factory=list)
    assets: list[AssetCfg] = field(default_factory=list)
    peerings: list[PeeringCfg] = field(default_factory=list)
    connectors: list[ConnectorCfg] = field(default_factory=list)
    app_txns: list[AppTxnCfg] = field(default_factory=list)
    transfers: list[TransferCfg] = field(default_factory=list)
    payments: list[PaymentCfg] = field(default_factory=list)
    faults: list[FaultCfg] = field(default_factory=list)
    grants: list[GrantCfg] = field(default_factory=list)
    reads: list[ReadCfg] = field(default_factory=list)
    resolves: list[ResolveCfg] = field(default_factory=list)
    probes: list[ProbeCfg] = field(default_factory=list)

    def chain(self, chain_id: str) -> ChainCfg:
        for c in self.chains:
            if c.chain_id == chain_id:
                return c
        raise KeyError(chain_id)


class _Collector:
    """Accumulates (path, message) problems during parse/validate."""

    def __init__(self) -> None:
        self.problems: list[str] = []

    def add(self, path: str, message: str) -> None:
        self.problems.append(f"{path}: {message}")

    def raise_if_any(self) -> None:
        if self.problems:
            raise ValidationError(self.problems)


def _as_int(val, path, col, minimum=None) -> Optional[int]:
    if not isinstance(val, int) or isinstance(val, bool):
        col.add(path, f"expected integer, got {val!r}")
        return None
    if minimum is not None and val < minimum:
        col.add(path, f"must be >= {minimum}, got {val}")
        return None
    return val


def _as_fraction(val, path, col, minimum=None) -> Optional[Fraction]:
    if isinstance(val, float):
        col.add(path, "floats are inexact; write the amount as a string")
        return None
    try:
        frac = Fraction(val) if isinstance(val, int) else Fraction(str(val))
    except (ValueError, ZeroDivisionError, TypeError):
        col.add(path, f"not a rational: {val!r}")
        return None
    if minimum is not None and frac < minimum:
        col.add(path, f"must be >= {minimum}, got {frac}")
        return None
    return frac


def _as_str(val, path, col) -> Optional[str]:
    if not isinstance(val, str) or not val:
        col.add(path, f"expected non-empty string, got {val!r}")
        return None
    return val


def _as_list(val, path, col) -> list:
    if val is None:
        return []
    if not isinstance(val, list):
        col.add(path, f"expected list, got {type(val).__name__}")
        return []
    return val


def _as_map(val, path, col) -> dict:
    if val is None:
        return {}
    if not isinstance(val, dict):
        col.add(path, f"expected mapping, got {type(val).__name__}")
        return {}
    return val


def load_scenario(path) -> ScenarioConfig:
    """Parse and validate a scenario file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}")
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}" if mark else ""
        raise ParseError(f"{path.name}: malformed YAML{where}: {exc}")
    if raw is None:
        raise ParseError(f"{path.name}: empty scenario file")
    if not isinstance(raw, dict):
        raise ParseError(f"{path.name}: top level must be a mapping")
    return parse_scenario(raw, name=path.stem)


def parse_scenario(raw: dict, name: str = "scenario") -> ScenarioConfig:
    col = _Collector()
    horizon = _as_int(raw.get("horizon"), "horizon", col, minimum=1)
    seed = _as_int(raw.get("seed", 0), "seed", col, minimum=0)
    links = _as_map(raw.get("links"), "links", col)
    inter = _as_int(links.get("inter_chain_latency", 2), "links.inter_chain_latency", col, minimum=0)
    jitter = _as_int(links.get("latency_jitter", 0), "links.latency_jitter", col, minimum=0)
    vn = _as_map(raw.get("valuenet"), "valuenet", col)
    ttl = _as_int(vn.get("reservation_ttl", 50), "valuenet.reservation_ttl", col, minimum=1)

    cfg = ScenarioConfig(name=name, horizon=horizon or 1, seed=seed or 0,
                         inter_chain_latency=inter if inter is not None else 2,
                         latency_jitter=jitter or 0,
                         reservation_ttl=ttl or 50)

    known_keys = {"horizon", "seed", "links", "valuenet", "chains", "assets",
                  "peerings", "connectors", "app_txns", "transfers", "payments",
                  "faults", "grants", "reads", "resolves", "probes"}
    for key in raw:
        if key not in known_keys:
            col.add(key, "unknown section")

    _parse_chains(raw, cfg, col)
    _parse_assets(raw, cfg, col)
    _parse_peerings(raw, cfg, col)
    _parse_connectors(raw, cfg, col)
    _parse_app_txns(raw, cfg, col)
    _parse_transfers(raw, cfg, col)
    _parse_payments(raw, cfg, col)
    _parse_faults(raw, cfg, col)
    _parse_grants(raw, cfg, col)
    _parse_reads(raw, cfg, col)
    _parse_simple_queries(raw, cfg, col)
    _cross_validate(cfg, col)
    col.raise_if_any()
    return cfg


def _parse_chains(raw, cfg, col):
    seen = set()
    for i, item in enumerate(_as_list(raw.get("chains"), "chains", col)):
        p = f"chains[{i}]"
        item = _as_map(item, p, col)
        cid = _as_str(item.get("id"), f"{p}.id", col)
        if cid in seen:
            col.add(f"{p}.id", f"duplicate chain id {cid}")
        seen.add(cid)
        nodes = _as_int(item.get("nodes"), f"{p}.nodes", col, minimum=1)
        gateways = _as_int(item.get("gateways", 0), f"{p}.gateways", col, minimum=0)
        quorum = _as_fraction(item.get("quorum", "1/2"), f"{p}.quorum", col)
        if quorum is not None and not (0 < quorum <= 1):
            col.add(f"{p}.quorum", f"must be in (0, 1], got {quorum}")
            quorum = None
        latency = _as_int(item.get("confirm_latency"), f"{p}.confirm_latency", col, minimum=1)
        semantic_raw = item.get("semantic")
        if semantic_raw not in SEMANTIC_VALUES:
            col.add(f"{p}.semantic", f"expected one of {sorted(SEMANTIC_VALUES)}, got {semantic_raw!r}")
            semantic = SemanticType.GENERIC_RECORD
        else:
            semantic = SemanticType(semantic_raw)
        regime_raw = _as_map(item.get("regime"), f"{p}.regime", col)
        try:
            regime = PermissionRegime(
                node_permissioned=bool(regime_raw.get("node", False)),
                consensus_permissioned=bool(regime_raw.get("consensus", False)),
                user_write_permissioned=bool(regime_raw.get("write", False)),
                user_read_permissioned=bool(regime_raw.get("read", False)))
        except ValueError as exc:
            col.add(f"{p}.regime", str(exc))
            regime = PermissionRegime()
        threshold = item.get("vouch_threshold")
        if threshold is not None:
            threshold = _as_int(threshold, f"{p}.vouch_threshold", col, minimum=1)
            if threshold is not None and gateways is not None and threshold > gateways:
                col.add(f"{p}.vouch_threshold",
                        f"threshold {threshold} exceeds gateway count {gateways}")
        denom = item.get("denom")
        if denom is not None:
            denom = _as_str(denom, f"{p}.denom", col)
        if cid is None or nodes is None or latency is None or quorum is None:
            continue
        cfg.chains.append(ChainCfg(
            cid, nodes, gateways or 0, quorum, latency, semantic, regime,
            path=item.get("path"),
            writers=[w for w in _as_list(item.get("writers"), f"{p}.writers", col)],
            readers=[r for r in _as_list(item.get("readers"), f"{p}.readers", col)],
            vouch_threshold=threshold, denom=denom))


def _chain_ids(cfg):
    return {c.chain_id for c in cfg.chains}


def _parse_assets(raw, cfg, col):
    seen = set()
    for i, item in enumerate(_as_list(raw.get("assets"), "assets", col)):
        p = f"assets[{i}]"
        item = _as_map(item, p, col)
        aid = _as_str(item.get("id"), f"{p}.id", col)
        chain = _as_str(item.get("chain"), f"{p}.chain", col)
        payload = _as_str(item.get("payload", aid or "payload"), f"{p}.payload", col)
        if aid in seen:
            col.add(f"{p}.id", f"duplicate asset id {aid}")
        seen.add(aid)
        if aid and chain and payload:
            cfg.assets.append(AssetCfg(aid, chain, payload))


def _parse_peerings(raw, cfg, col):
    for i, item in enumerate(_as_list(raw.get("peerings"), "peerings", col)):
        p = f"peerings[{i}]"
        item = _as_map(item, p, col)
        pid = _as_str(item.get("id", f"pa{i + 1}"), f"{p}.id", col)
        chains = _as_list(item.get("chains"), f"{p}.chains", col)
        if len(chains) != 2 or chains[0] == chains[1]:
            col.add(f"{p}.chains", f"expected two distinct chain ids, got {chains!r}")
            continue
        semantics = []
        for s in _as_list(item.get("semantics"), f"{p}.semantics", col):
            if s not in SEMANTIC_VALUES:
                col.add(f"{p}.semantics", f"unknown semantic {s!r}")
            else:
                semantics.append(SemanticType(s))
        if not semantics:
            col.add(f"{p}.semantics", "agreement must cover at least one semantic type")
        fee = _as_fraction(item.get("fee", 0), f"{p}.fee", col, minimum=0)
        if pid and fee is not None and semantics:
            cfg.peerings.append(PeeringCfg(pid, (chains[0], chains[1]), semantics, fee))


def _parse_connectors(raw, cfg, col):
    for i, item in enumerate(_as_list(raw.get("connectors"), "connectors", col)):
        p = f"connectors[{i}]"
        item = _as_map(item, p, col)
        cid = _as_str(item.get("id"), f"{p}.id", col)
        chains = [c for c in _as_list(item.get("chains"), f"{p}.chains", col)]
        if len(chains) < 2:
            col.add(f"{p}.chains", "connector must bridge at least two chains")
        reserves = {}
        for denom, amt in _as_map(item.get("reserves"), f"{p}.reserves", col).items():
            frac = _as_fraction(amt, f"{p}.reserves.{denom}", col, minimum=0)
            if frac is not None:
                reserves[str(denom)] = frac
        rates = {}
        for j, r in enumerate(_as_list(item.get("rates"), f"{p}.rates", col)):
            rp = f"{p}.rates[{j}]"
            r = _as_map(r, rp, col)
            d_from = _as_str(r.get("from"), f"{rp}.from", col)
            d_to = _as_str(r.get("to"), f"{rp}.to", col)
            rate = _as_fraction(r.get("rate"), f"{rp}.rate", col)
            if rate is not None and rate <= 0:
                col.add(f"{rp}.rate", f"rate must be positive, got {rate}")
                rate = None
            if d_from and d_to and rate is not None:
                rates[(d_from, d_to)] = rate
        if cid and len(chains) >= 2:
            cfg.connectors.append(ConnectorCfg(cid, chains, reserves, rates))


def _parse_app_txns(raw, cfg, col):
    for i, item in enumerate(_as_list(raw.get("app_txns"), "app_txns", col)):
        p = f"app_txns[{i}]"
        item = _as_map(item, p, col)
        tid = _as_str(item.get("id"), f"{p}.id", col)
        at = _as_int(item.get("at", 0), f"{p}.at", col, minimum=0)
        subs = []
        for j, s in enumerate(_as_list(item.get("subs"), f"{p}.subs", col)):
            sp = f"{p}.subs[{j}]"
            s = _as_map(s, sp, col)
            sid = _as_str(s.get("id", f"s{j + 1}"), f"{sp}.id", col)
            candidates = [c for c in _as_list(s.get("candidates"), f"{sp}.candidates", col)]
            if not candidates:
                col.add(f"{sp}.candidates", "sub-transaction needs at least one candidate")
            payload = _as_str(s.get("payload", f"{tid}-{sid}"), f"{sp}.payload", col)
            timeout = s.get("timeout")
            if timeout is not None:
                timeout = _as_int(timeout, f"{sp}.timeout", col, minimum=1)
            if sid and payload and candidates:
                subs.append(SubCfg(sid, candidates, payload, timeout))
        if not subs:
            col.add(f"{p}.subs", "app transaction needs at least one sub-transaction")
        if tid and at is not None and subs:
            cfg.app_txns.append(AppTxnCfg(tid, at, subs, app=item.get("app", "anon")))


def _parse_transfers(raw, cfg, col):
    for i, item in enumerate(_as_list(raw.get("transfers"), "transfers", col)):
        p = f"transfers[{i}]"
        item = _as_map(item, p, col)
        tid = _as_str(item.get("id"), f"{p}.id", col)
        at = _as_int(item.get("at", 0), f"{p}.at", col, minimum=0)
        asset = _as_str(item.get("asset"), f"{p}.asset", col)
        src = _as_str(item.get("from"), f"{p}.from", col)
        dst = _as_str(item.get("to"), f"{p}.to", col)
        beneficiary = _as_str(item.get("beneficiary", "bearer"), f"{p}.beneficiary", col)
        deadline = _as_int(item.get("deadline"), f"{p}.deadline", col, minimum=1)
        if src and dst and src == dst:
            col.add(f"{p}.to", "source and destination must differ")
            continue
        if None in (tid, at, asset, src, dst, beneficiary, deadline):
            continue
        cfg.transfers.append(TransferCfg(tid, at, asset, src, dst, beneficiary, deadline))


def _parse_payments(raw, cfg, col):
    for i, item in enumerate(_as_list(raw.get("payments"), "payments", col)):
        p = f"payments[{i}]"
        item = _as_map(item, p, col)
        pid = _as_str(item.get("id"), f"{p}.id", col)
        at = _as_int(item.get("at", 0), f"{p}.at", col, minimum=0)
        src = _as_str(item.get("from"), f"{p}.from", col)
        dst = _as_str(item.get("to"), f"{p}.to", col)
        amount = _as_fraction(item.get("amount"), f"{p}.amount", col)
        if amount is not None and amount <= 0:
            col.add(f"{p}.amount", f"must be positive, got {amount}")
            amount = None
        d_in = _as_str(item.get("denom_in"), f"{p}.denom_in", col)
        d_out = _as_str(item.get("denom_out"), f"{p}.denom_out", col)
        settle_after = item.get("settle_after")
        release_after = item.get("release_after")
        if settle_after is not None and release_after is not None:
            col.add(p, "settle_after and release_after are mutually exclusive")
        if settle_after is not None:
            settle_after = _as_int(settle_after, f"{p}.settle_after", col, minimum=1)
        if release_after is not None:
            release_after = _as_int(release_after, f"{p}.release_after", col, minimum=1)
        if None in (pid, at, src, dst, amount, d_in, d_out):
            continue
        cfg.payments.append(PaymentCfg(pid, at, src, dst, amount, d_in, d_out,
                                       settle_after, release_after))


def _parse_faults(raw, cfg, col):
    seen = set()
    for i, item in enumerate(_as_list(raw.get("faults"), "faults", col)):
        p = f"faults[{i}]"
        item = _as_map(item, p, col)
        fid = _as_str(item.get("id", f"f{i + 1}"), f"{p}.id", col)
        kind = item.get("kind")
        if kind not in FAULT_KINDS:
            col.add(f"{p}.kind", f"expected one of {sorted(FAULT_KINDS)}, got {kind!r}")
            continue
        if fid in seen:
            col.add(f"{p}.id", f"duplicate fault id {fid}")
        seen.add(fid)
        at = _as_int(item.get("at"), f"{p}.at", col, minimum=0)
        until = item.get("until")
        if until is not None:
            until = _as_int(until, f"{p}.until", col, minimum=1)
            if until is not None and at is not None and until <= at:
                col.add(f"{p}.until", f"until {until} must exceed at {at}")
        chains = [c for c in _as_list(item.get("chains"), f"{p}.chains", col)]
        links = []
        for j, pair in enumerate(_as_list(item.get("links"), f"{p}.links", col)):
            if (not isinstance(pair, list) or len(pair) != 2
                    or pair[0] == pair[1]):
                col.add(f"{p}.links[{j}]", f"expected [a, b] pair, got {pair!r}")
            else:
                links.append((pair[0], pair[1]))
        nodes = [n for n in _as_list(item.get("nodes"), f"{p}.nodes", col)]
        gateways = [g for g in _as_list(item.get("gateways"), f"{p}.gateways", col)]
        faults = [f for f in _as_list(item.get("faults"), f"{p}.faults", col)]
        if kind == "partition" and not chains and not links:
            col.add(p, "partition needs chains or links")
        if kind == "node_crash" and not nodes:
            col.add(p, "node_crash needs nodes")
        if kind == "gateway_crash" and not gateways:
            col.add(p, "gateway_crash needs gateways")
        if kind == "heal" and not faults:
            col.add(p, "heal needs fault ids")
        if fid and at is not None:
            cfg.faults.append(FaultCfg(fid, kind, at, chains, links, nodes,
                                       gateways, faults, until))


def _parse_grants(raw, cfg, col):
    for i, item in enumerate(_as_list(raw.get("grants"), "grants", col)):
        p = f"grants[{i}]"
        item = _as_map(item, p, col)
        gid = _as_str(item.get("id"), f"{p}.id", col)
        grantor = _as_str(item.get("grantor"), f"{p}.grantor", col)
        grantee = _as_str(item.get("grantee"), f"{p}.grantee", col)
        asset = _as_str(item.get("asset"), f"{p}.asset", col)
        expiry = _as_int(item.get("expiry"), f"{p}.expiry", col, minimum=1)
        if None in (gid, grantor, grantee, asset, expiry):
            continue
        cfg.grants.append(GrantCfg(gid, grantor, grantee, asset, expiry))


def _parse_reads(raw, cfg, col):
    for i, item in enumerate(_as_list(raw.get("reads"), "reads", col)):
        p = f"reads[{i}]"
        item = _as_map(item, p, col)
        rid = _as_str(item.get("id", f"r{i + 1}"), f"{p}.id", col)
        at = _as_int(item.get("at", 0), f"{p}.at", col, minimum=0)
        asset = _as_str(item.get("asset"), f"{p}.asset", col)
        requester = _as_str(item.get("requester"), f"{p}.requester", col)
        grant = item.get("grant")
        if None in (rid, at, asset, requester):
            continue
        cfg.reads.append(ReadCfg(rid, at, asset, requester, grant))


def _parse_simple_queries(raw, cfg, col):
    for i, item in enumerate(_as_list(raw.get("resolves"), "resolves", col)):
        p = f"resolves[{i}]"
        item = _as_map(item, p, col)
        rid = _as_str(item.get("id", f"q{i + 1}"), f"{p}.id", col)
        at = _as_int(item.get("at", 0), f"{p}.at", col, minimum=0)
        asset = _as_str(item.get("asset"), f"{p}.asset", col)
        if None not in (rid, at, asset):
            cfg.resolves.append(ResolveCfg(rid, at, asset))
    for i, item in enumerate(_as_list(raw.get("probes"), "probes", col)):
        p = f"probes[{i}]"
        item = _as_map(item, p, col)
        pid = _as_str(item.get("id", f"pr{i + 1}"), f"{p}.id", col)
        at = _as_int(item.get("at", 0), f"{p}.at", col, minimum=0)
        chain = _as_str(item.get("chain"), f"{p}.chain", col)
        if None not in (pid, at, chain):
            cfg.probes.append(ProbeCfg(pid, at, chain))


def _cross_validate(cfg: ScenarioConfig, col: _Collector) -> None:
    chain_ids = _chain_ids(cfg)
    asset_ids = {a.asset_id for a in cfg.assets}
    node_ids = {n for c in cfg.chains for n in c.node_ids()}
    gateway_ids = {g for c in cfg.chains for g in c.gateway_ids()}
    fault_ids = {f.fault_id for f in cfg.faults}
    grant_ids = {g.grant_id for g in cfg.grants}
    denoms = {c.chain_id: c.denom for c in cfg.chains}
    horizon = cfg.horizon

    def check_tick(at, path):
        if at is not None and at > horizon:
            col.add(path, f"tick {at} beyond horizon {horizon}")

    for i, a in enumerate(cfg.assets):
        if a.chain not in chain_ids:
            col.add(f"assets[{i}].chain", f"unknown chain {a.chain}")
    for i, pc in enumerate(cfg.peerings):
        for cid in pc.chains:
            if cid not in chain_ids:
                col.add(f"peerings[{i}].chains", f"unknown chain {cid}")
    for i, cc in enumerate(cfg.connectors):
        for cid in cc.chains:
            if cid not in chain_ids:
                col.add(f"connectors[{i}].chains", f"unknown chain {cid}")
    for i, t in enumerate(cfg.app_txns):
        check_tick(t.at, f"app_txns[{i}].at")
        for j, s in enumerate(t.subs):
            semantics = set()
            for cid in s.candidates:
                if cid not in chain_ids:
                    col.add(f"app_txns[{i}].subs[{j}].candidates", f"unknown chain {cid}")
                else:
                    semantics.add(cfg.chain(cid).semantic)
            if len(semantics) > 1:
                col.add(f"app_txns[{i}].subs[{j}].candidates",
                        f"candidates span semantic types {sorted(s.value for s in semantics)}")
    for i, t in enumerate(cfg.transfers):
        check_tick(t.at, f"transfers[{i}].at")
        if t.asset not in asset_ids:
            col.add(f"transfers[{i}].asset", f"unknown asset {t.asset}")
        for cid, fld in ((t.source, "from"), (t.dest, "to")):
            if cid not in chain_ids:
                col.add(f"transfers[{i}].{fld}", f"unknown chain {cid}")
        if t.deadline > horizon:
            col.add(f"transfers[{i}].deadline",
                    f"deadline {t.deadline} beyond horizon {horizon}")
        if t.deadline <= t.at:
            col.add(f"transfers[{i}].deadline",
                    f"deadline {t.deadline} not after start {t.at}")
        if t.source in chain_ids and t.dest in chain_ids:
            if cfg.chain(t.source).semantic != cfg.chain(t.dest).semantic:
                col.add(f"transfers[{i}]",
                        "source and destination chains differ in semantic type")
    for i, pm in enumerate(cfg.payments):
        check_tick(pm.at, f"payments[{i}].at")
        for cid, fld in ((pm.source, "from"), (pm.dest, "to")):
            if cid not in chain_ids:
                col.add(f"payments[{i}].{fld}", f"unknown chain {cid}")
            elif denoms.get(cid) is None:
                col.add(f"payments[{i}].{fld}", f"chain {cid} declares no denom")
        if pm.source in denoms and denoms[pm.source] not in (None, pm.denom_in):
            col.add(f"payments[{i}].denom_in",
                    f"{pm.source} denominates {denoms[pm.source]}, not {pm.denom_in}")
        if pm.dest in denoms and denoms[pm.dest] not in (None, pm.denom_out):
            col.add(f"payments[{i}].denom_out",
                    f"{pm.dest} denominates {denoms[pm.dest]}, not {pm.denom_out}")
    for i, f in enumerate(cfg.faults):
        check_tick(f.at, f"faults[{i}].at")
        for cid in f.chains:
            if cid not in chain_ids:
                col.add(f"faults[{i}].chains", f"unknown chain {cid}")
        for a, b in f.links:
            if a not in chain_ids or b not in chain_ids:
                col.add(f"faults[{i}].links", f"unknown link {a}-{b}")
        for nid in f.nodes:
            if nid not in node_ids:
                col.add(f"faults[{i}].nodes", f"unknown node {nid}")
        for gid in f.gateways:
            if gid not in gateway_ids:
                col.add(f"faults[{i}].gateways", f"unknown gateway {gid}")
        for fid in f.faults:
            if fid not in fault_ids:
                col.add(f"faults[{i}].faults", f"unknown fault {fid}")
    for i, g in enumerate(cfg.grants):
        if g.asset not in asset_ids:
            col.add(f"grants[{i}].asset", f"unknown asset {g.asset}")
    for i, r in enumerate(cfg.reads):
        check_tick(r.at, f"reads[{i}].at")
        if r.asset not in asset_ids:
            col.add(f"reads[{i}].asset", f"unknown asset {r.asset}")
        if r.grant is not None and r.grant not in grant_ids:
            col.add(f"reads[{i}].grant", f"unknown grant {r.grant}")
    for i, q in enumerate(cfg.resolves):
        check_tick(q.at, f"resolves[{i}].at")
        if q.asset not in asset_ids:
            col.add(f"resolves[{i}].asset", f"unknown asset {q.asset}")
    for i, pr in enumerate(cfg.probes):
        check_tick(pr.at, f"probes[{i}].at")
        if pr.chain not in chain_ids:
            col.add(f"probes[{i}].chain", f"unknown chain {pr.chain}")
