"""Naive replay oracle for the token bookkeeping rules, written from scratch.

Deliberately independent of the package under test: plain dicts, no shared
helpers, no imports from midastouch. If both agree on 1000 random histories
the implementations are interchangeable for these inputs.
"""

import random


class ReplayOracle:
    """Mutable, unoptimized ledger. One instance per replayed history."""

    def __init__(self):
        # tick -> {"max": int, "lim": int, "minted": int, "balances": {addr: int}}
        self.tokens = {}

    def deploy(self, tick, max_supply, mint_limit):
        if tick in self.tokens:
            return False
        if max_supply < 0 or mint_limit < 0:
            return False
        if mint_limit > max_supply:
            return False
        self.tokens[tick] = {
            "max": max_supply, "lim": mint_limit, "minted": 0, "balances": {},
        }
        return True

    def mint(self, tick, minter, amt):
        if tick not in self.tokens:
            return False
        if amt < 0:
            return False
        tok = self.tokens[tick]
        if amt > tok["lim"]:
            return False
        if tok["minted"] + amt > tok["max"]:
            return False
        tok["balances"][minter] = tok["balances"].get(minter, 0) + amt
        tok["minted"] += amt
        return True

    def transfer(self, tick, sender, receiver, amt):
        if tick not in self.tokens:
            return False
        if amt < 0:
            return False
        tok = self.tokens[tick]
        if tok["balances"].get(sender, 0) < amt:
            return False
        tok["balances"][sender] = tok["balances"].get(sender, 0) - amt
        tok["balances"][receiver] = tok["balances"].get(receiver, 0) + amt
        return True

    def apply(self, op):
        kind = op[0]
        if kind == "deploy":
            return self.deploy(op[1], op[2], op[3])
        if kind == "mint":
            return self.mint(op[1], op[2], op[3])
        if kind == "transfer":
            return self.transfer(op[1], op[2], op[3], op[4])
        raise ValueError(f"unknown op kind {kind!r}")

    def snapshot(self):
        """Comparable view: {tick: (max, lim, minted, sorted balance items)}."""
        out = {}
        for tick, tok in self.tokens.items():
            balances = tuple(sorted(
                (a, b) for a, b in tok["balances"].items() if b != 0))
            out[tick] = (tok["max"], tok["lim"], tok["minted"], balances)
        return out


def random_history(seed, max_ops=200, n_ticks=5, n_addrs=8):
    """Seeded op sequence mixing legal and illegal operations.

    Amount ranges deliberately straddle the limits so rejects happen
    (re-deploys, over-limit mints, overdrawn transfers, unknown ticks).
    """
    rng = random.Random(seed)
    ticks = [f"tk{i}" for i in range(n_ticks)]
    addrs = [f"addr{i}" for i in range(n_addrs)]
    ops = []
    for _ in range(rng.randint(1, max_ops)):
        roll = rng.random()
        tick = rng.choice(ticks)
        if roll < 0.15:
            max_supply = rng.randint(0, 5000)
            # sometimes lim > max, which must be rejected
            lim = rng.randint(0, 1500)
            ops.append(("deploy", tick, max_supply, lim))
        elif roll < 0.60:
            ops.append(("mint", tick, rng.choice(addrs), rng.randint(0, 1800)))
        else:
            ops.append(("transfer", tick, rng.choice(addrs),
                        rng.choice(addrs), rng.randint(0, 900)))
    return ops
