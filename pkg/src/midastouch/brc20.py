"""Off-chain BRC-20 bookkeeping: deploy / mint / transfer as a pure state machine.

A registry maps tick -> TokenState. Every operation returns a fresh registry
and never mutates its input, so a rejected operation leaves the caller's
registry untouched.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping

Registry = Mapping[str, "TokenState"]


class Brc20Error(Exception):
    """Base error for token bookkeeping rule violations."""


class DuplicateTick(Brc20Error):
    pass


class InvalidParams(Brc20Error):
    pass


class UnknownTick(Brc20Error):
    pass


class ExceedsMintLimit(Brc20Error):
    pass


class ExceedsMaxSupply(Brc20Error):
    pass


class InsufficientBalance(Brc20Error):
    pass


@dataclass(frozen=True)
class TokenState:
    """Bookkeeping for one tick. Balance entries are created lazily on first credit."""

    tick: str
    max_supply: int
    mint_limit: int
    balances: dict = field(default_factory=dict)
    minted_total: int = 0

    def balance_of(self, addr: str) -> int:
        return self.balances.get(addr, 0)


def apply_deploy(registry: Registry, tick: str, max_supply: int, mint_limit: int) -> dict:
    """Create a new token. Redeploying an existing tick is an error, not a no-op."""
    if tick in registry:
        raise DuplicateTick(f"tick {tick!r} already deployed")
    if max_supply < 0 or mint_limit < 0:
        raise InvalidParams("max supply and mint limit must be non-negative")
    if mint_limit > max_supply:
        raise InvalidParams("per-mint limit exceeds max supply")
    out = dict(registry)
    out[tick] = TokenState(tick=tick, max_supply=max_supply, mint_limit=mint_limit)
    return out


def apply_mint(registry: Registry, tick: str, minter: str, amt: int) -> dict:
    if tick not in registry:
        raise UnknownTick(f"tick {tick!r} not deployed")
    if amt < 0:
        raise InvalidParams("mint amount must be non-negative")
    state = registry[tick]
    if amt > state.mint_limit:
        raise ExceedsMintLimit(f"amt {amt} > lim {state.mint_limit}")
    if state.minted_total + amt > state.max_supply:
        raise ExceedsMaxSupply(
            f"minted {state.minted_total} + {amt} > max {state.max_supply}")
    balances = dict(state.balances)
    balances[minter] = balances.get(minter, 0) + amt
    out = dict(registry)
    out[tick] = replace(state, balances=balances, minted_total=state.minted_total + amt)
    return out


def apply_transfer(registry: Registry, tick: str, sender: str, receiver: str, amt: int) -> dict:
    if tick not in registry:
        raise UnknownTick(f"tick {tick!r} not deployed")
    if amt < 0:
        raise InvalidParams("transfer amount must be non-negative")
    state = registry[tick]
    if state.balance_of(sender) < amt:
        raise InsufficientBalance(
            f"{sender!r} holds {state.balance_of(sender)} < {amt}")
    balances = dict(state.balances)
    balances[sender] = balances.get(sender, 0) - amt
    balances[receiver] = balances.get(receiver, 0) + amt
    out = dict(registry)
    out[tick] = replace(state, balances=balances)
    return out


def check_conservation(registry: Registry) -> None:
    """Assert the conservation invariants; raises AssertionError on violation."""
    for tick, state in registry.items():
        total = sum(state.balances.values())
        assert total == state.minted_total, (
            f"{tick}: balance sum {total} != minted {state.minted_total}")
        assert state.minted_total <= state.max_supply, (
            f"{tick}: minted {state.minted_total} > max {state.max_supply}")
        for addr, bal in state.balances.items():
            assert bal >= 0, f"{tick}: negative balance {bal} for {addr!r}"
