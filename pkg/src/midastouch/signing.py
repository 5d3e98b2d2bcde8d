"""Keyed-digest signatures standing in for a real multi-signature scheme.

The verification contract is the one that matters to the protocol: a
signature verifies only under the signer's secret, so a party without the
secret cannot forge one. Simulation code holds the secrets centrally.
"""

from __future__ import annotations

import hashlib
import hmac
from dataclasses import dataclass, field


def derive_secret(btc_addr: str, eth_addr: str) -> bytes:
    return hashlib.sha256(f"validator:{btc_addr}:{eth_addr}".encode()).digest()


def sign(secret: bytes, message: bytes | str) -> str:
    if isinstance(message, str):
        message = message.encode("utf-8")
    return hmac.new(secret, message, hashlib.sha256).hexdigest()


def verify(secret: bytes, message: bytes | str, signature: str) -> bool:
    return hmac.compare_digest(sign(secret, message), signature)


@dataclass(frozen=True)
class QuorumProof:
    """A digest plus per-signer signatures over it, checked against a threshold."""

    digest: str
    signatures: dict = field(default_factory=dict)

    def signer_count(self) -> int:
        return len(self.signatures)
