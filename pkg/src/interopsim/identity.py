"""Identifier masking and the global resolver.

External parties never see chain-local transaction identifiers; they
hold CrossIds whose suffix is opaque (derived from the run's RNG, never
from the local_ref).  The resolver maps each asset to exactly one home
chain at a time and keeps the full forward history of rebinds.

Chain identifiers themselves are public; only transaction identifiers
are masked.

Invariants surfaced for audit:
  * per-chain masking is a bijection (one cross_id per local_ref and
    vice versa);
  * every asset has exactly one home chain;
  * rebinding is atomic: no observation window shows zero or two homes;
  * forward history is linear and terminates (each pointer's
    forwarded_from equals the previous home).
"""

from __future__ import annotations

import base64
import logging
from dataclasses import dataclass
from typing import Callable, Optional

from .errors import InvalidProof, NotConfirmed, NotFound, StaleAuthority

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CrossId:
    """Globally unique asset identifier: chain path plus opaque suffix."""

    chain_path: str
    opaque_suffix: str

    def __str__(self) -> str:
        return f"{self.chain_path}/{self.opaque_suffix}"

    def prefix(self, n: int = 8) -> str:
        """Truncated form safe for reachability advertisements."""
        return f"{self.chain_path}/{self.opaque_suffix[:n]}"


@dataclass(frozen=True)
class AuthoritativePointer:
    asset: CrossId
    home_chain: str
    forwarded_from: Optional[str]
    rebind_tick: int


class Resolver:
    """Single global resolver instance per run."""

    def __init__(self, rng, verifier: Optional[Callable] = None) -> None:
        self.rng = rng
        self._verifier = verifier
        self.chain_paths: dict[str, str] = {}
        # per chain: local_ref <-> cross_id
        self._mask: dict[str, dict[str, CrossId]] = {}
        self._unmask: dict[str, dict[CrossId, str]] = {}
        self._home: dict[CrossId, AuthoritativePointer] = {}
        self._history: dict[CrossId, list[AuthoritativePointer]] = {}

    def set_verifier(self, verifier: Callable) -> None:
        self._verifier = verifier

    def register_chain(self, chain_id: str, chain_path: Optional[str] = None) -> None:
        path = chain_path or chain_id
        if path in self.chain_paths and self.chain_paths[path] != chain_id:
            raise ValueError(f"chain path {path} already registered")
        self.chain_paths[path] = chain_id
        self._mask.setdefault(chain_id, {})
        self._unmask.setdefault(chain_id, {})

    def chain_for_path(self, path: str) -> str:
        if path not in self.chain_paths:
            raise NotFound(f"unknown chain path {path}")
        return self.chain_paths[path]

    # -- masking -------------------------------------------------------

    def _fresh_suffix(self) -> str:
        raw = self.rng.randbytes(16)
        return base64.b32encode(raw).decode("ascii").rstrip("=")

    def mint_cross_id(self, chain, local_ref: str, now: int = 0) -> CrossId:
        """Mask a confirmed entry of chain under a fresh opaque id and
        register the chain as the asset's home.  Idempotent per ref."""
        chain_id = chain.chain_id
        if chain_id not in self._mask:
            self.register_chain(chain_id)
        existing = self._mask[chain_id].get(local_ref)
        if existing is not None:
            return existing
        if chain.ledger.get(local_ref) is None:
            if any(pu.local_ref == local_ref for pu in chain.pending):
                raise NotConfirmed(f"{local_ref} pending on {chain_id}")
            raise NotFound(f"{local_ref} unknown on {chain_id}")
        path = self._path_of(chain_id)
        cid = CrossId(path, self._fresh_suffix())
        self._mask[chain_id][local_ref] = cid
        self._unmask[chain_id][cid] = local_ref
        pointer = AuthoritativePointer(cid, chain_id, None, now)
        self._home[cid] = pointer
        self._history[cid] = [pointer]
        return cid

    def _path_of(self, chain_id: str) -> str:
        for path, cid in self.chain_paths.items():
            if cid == chain_id:
                return path
        self.register_chain(chain_id)
        return chain_id

    def bind_existing(self, chain_id: str, cross_id: CrossId, local_ref: str) -> None:
        """Register an already-minted asset under a new chain's mask
        (used when a transfer lands the asset on its destination)."""
        if chain_id not in self._mask:
            self.register_chain(chain_id)
        if local_ref in self._mask[chain_id] or cross_id in self._unmask[chain_id]:
            raise ValueError(f"mask collision for {cross_id} on {chain_id}")
        self._mask[chain_id][local_ref] = cross_id
        self._unmask[chain_id][cross_id] = local_ref

    def local_ref_for(self, chain_id: str, cross_id: CrossId) -> str:
        ref = self._unmask.get(chain_id, {}).get(cross_id)
        if ref is None:
            raise NotFound(f"{cross_id} not masked on {chain_id}")
        return ref

    def cross_id_for(self, chain_id: str, local_ref: str) -> CrossId:
        cid = self._mask.get(chain_id, {}).get(local_ref)
        if cid is None:
            raise NotFound(f"{local_ref} has no cross id on {chain_id}")
        return cid

    def mask_tables(self) -> dict[str, dict[str, CrossId]]:
        return self._mask

    # -- resolution and rebinding --------------------------------------

    def assets(self) -> list[CrossId]:
        return sorted(self._home, key=str)

    def resolve(self, cross_id: CrossId) -> AuthoritativePointer:
        pointer = self._home.get(cross_id)
        if pointer is None:
            raise NotFound(f"unknown asset {cross_id}")
        return pointer

    def rebind_authority(self, cross_id: CrossId, from_chain: str, to_chain: str,
                         proof, now: int) -> AuthoritativePointer:
        """Atomically move the asset's home.  proof is a (source, dest)
        attestation pair; both must verify and name this asset."""
        current = self._home.get(cross_id)
        if current is None:
            raise NotFound(f"unknown asset {cross_id}")
        if current.home_chain != from_chain:
            raise StaleAuthority(
                f"{cross_id} home is {current.home_chain}, not {from_chain}")
        self._check_proof(cross_id, from_chain, to_chain, proof)
        pointer = AuthoritativePointer(cross_id, to_chain, from_chain, now)
        self._home[cross_id] = pointer
        self._history[cross_id].append(pointer)
        return pointer

    def _check_proof(self, cross_id: CrossId, from_chain: str, to_chain: str, proof) -> None:
        if self._verifier is None:
            raise InvalidProof("no attestation verifier configured")
        try:
            source_att, dest_att = proof
        except (TypeError, ValueError):
            raise InvalidProof("proof must be a (source, dest) attestation pair")
        for att, chain_id in ((source_att, from_chain), (dest_att, to_chain)):
            if att.claim.chain_id != chain_id:
                raise InvalidProof(f"attestation names {att.claim.chain_id}, expected {chain_id}")
            if att.claim.cross_id != str(cross_id):
                raise InvalidProof("attestation names a different asset")
            if not att.claim.confirmed:
                raise InvalidProof("attestation does not claim confirmation")
            if not self._verifier(att):
                raise InvalidProof(f"attestation by {att.claim.chain_id} failed verification")

    def audit(self, cross_id: CrossId) -> list[AuthoritativePointer]:
        if cross_id not in self._history:
            raise NotFound(f"unknown asset {cross_id}")
        return list(self._history[cross_id])

    # -- dump ----------------------------------------------------------

    def dump_lines(self) -> list[str]:
        """One line per asset, sorted: home plus forward history."""
        lines = []
        for cid in self.assets():
            hops = []
            for p in self._history[cid]:
                origin = p.forwarded_from or "-"
                hops.append(f"{origin}>{p.home_chain}@{p.rebind_tick}")
            lines.append(f"{cid} home={self._home[cid].home_chain} history={';'.join(hops)}")
        return lines
