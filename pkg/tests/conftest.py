"""Shared fixtures: small hand-built worlds plus bundled scenario access.

The builders here construct protocol objects directly (no YAML, no
engine) so unit tests can drive one module at a time.  Integration
tests load the bundled scenario files instead.
"""

from fractions import Fraction
from pathlib import Path

import pytest

from interopsim.chain import (
    BlockchainSystem,
    Directionality,
    PermissionRegime,
    SemanticType,
    TransferUnit,
)
from interopsim.gateway import (
    Gateway,
    GatewayRegistry,
    PeeringAgreement,
    PeeringRegistry,
    TransferEngine,
)
from interopsim.identity import Resolver
from interopsim.scenario import load_scenario
from interopsim.simnet import SimNet

REPO_ROOT = Path(__file__).resolve().parent.parent
SCENARIO_DIR = REPO_ROOT / "scenarios"
GOLDEN_DIR = REPO_ROOT / "goldens"

BUNDLED_SCENARIOS = [
    "fig2_fallback",
    "fig4_transfer",
    "ilp_path",
    "gateway_crash",
    "abort_partition",
]


@pytest.fixture
def scenario_dir() -> Path:
    return SCENARIO_DIR


@pytest.fixture
def golden_dir() -> Path:
    return GOLDEN_DIR


def bundled(name: str):
    """Load a bundled scenario config by stem name."""
    return load_scenario(SCENARIO_DIR / f"{name}.yaml")


def make_chain(chain_id="bc1", nodes=4, gateways=0, quorum="2/3", latency=3,
               semantic=SemanticType.GENERIC_RECORD, regime=None,
               writers=(), readers=()):
    """One chain with bc style node/gateway ids, open regime by default."""
    regime = regime or PermissionRegime()
    node_ids = [f"{chain_id}.n{i}" for i in range(1, nodes + 1)]
    gateway_ids = [f"{chain_id}.g{i}" for i in range(1, gateways + 1)]
    return BlockchainSystem(chain_id, node_ids, gateway_ids, regime,
                            Fraction(quorum), latency, semantic,
                            writers=set(writers), readers=set(readers))


def make_unit(key="k1", semantic=SemanticType.GENERIC_RECORD, peer=None,
              digest="d1"):
    direction = Directionality.BI if peer else Directionality.UNI
    return TransferUnit(digest, semantic, direction, key, peer)


def confirm_unit(chain, unit, credential="anon", submit_tick=0):
    """Submit and hand-run consensus until the unit confirms; returns
    the ledger entry."""
    receipt = chain.submit(unit, credential, submit_tick)
    entry = None
    tick = submit_tick
    while entry is None:
        tick += 1
        for e in chain.advance_consensus(tick):
            if e.local_ref == receipt.local_ref:
                entry = e
        assert tick < submit_tick + 10 * chain.confirm_latency_ticks, \
            "unit never confirmed"
    return entry


class TransferWorld:
    """Two asset-registry chains joined by a peering, with a seeded
    asset and a transfer engine, all driven by hand."""

    def __init__(self, seed=1, gateways=3, latency=3, threshold=2,
                 inter_chain_latency=2, fee="2"):
        self.net = SimNet(seed, inter_chain_latency=inter_chain_latency)
        self.resolver = Resolver(self.net.rng)
        self.registry = GatewayRegistry()
        self.peerings = PeeringRegistry()
        self.chains = {}
        for cid in ("bc1", "bc2"):
            chain = make_chain(cid, nodes=4, gateways=gateways,
                               latency=latency,
                               semantic=SemanticType.ASSET_REGISTRY)
            self.chains[cid] = chain
            self.resolver.register_chain(cid)
            for gid in chain.gateway_ids:
                self.registry.add(Gateway(gid, cid))
        self.peerings.establish(PeeringAgreement(
            "pa1", "bc1", "bc2", frozenset({SemanticType.ASSET_REGISTRY}),
            Fraction(fee)))
        self.net.register_entities(
            list(self.chains),
            [n for c in self.chains.values() for n in c.nodes],
            [g for c in self.chains.values() for g in c.gateway_ids])
        self.net.set_fault_applier(self._apply_crash)
        self.engine = TransferEngine(
            self.net, self.chains, self.registry, self.resolver,
            self.peerings, {"bc1": threshold, "bc2": threshold})
        from interopsim.gateway import verify_attestation
        self.resolver.set_verifier(
            lambda att: verify_attestation(att, self.registry))

    def _apply_crash(self, fault, heal):
        from interopsim.simnet import FaultKind
        if fault.kind == FaultKind.NODE_CRASH:
            for nid in fault.target:
                self.chains[nid.split(".")[0]].set_node_live(nid, heal)
        elif fault.kind == FaultKind.GATEWAY_CRASH:
            for gid in fault.target:
                self.registry.get(gid).live = heal

    def seed_asset(self, chain_id="bc1", key="genesis:deed1"):
        chain = self.chains[chain_id]
        unit = make_unit(key, SemanticType.ASSET_REGISTRY, digest="deed")
        entry = chain.append_genesis(unit)
        return self.resolver.mint_cross_id(chain, entry.local_ref, 0)

    def run_until(self, end_tick):
        """Replicate the engine's per-tick phases for hand-built worlds."""
        for tick in range(self.net.now, end_tick + 1):
            self.net.drain(tick)
            for cid in sorted(self.chains):
                if self.net.chain_partitioned(cid):
                    continue
                for entry in self.chains[cid].advance_consensus(tick):
                    self.engine.on_confirmed(cid, entry)
            self.engine.step_all(tick)


@pytest.fixture
def transfer_world():
    return TransferWorld()
