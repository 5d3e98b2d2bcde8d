"""Deterministic simulated UTXO chain.

Single-branch, no proof of work: blocks are produced on a logical clock at a
fixed interval, draining a FIFO mempool. Outputs may carry opaque payload
bytes (inscriptions). There is no randomness here at all, so identical
submission schedules produce identical chains, txids and timestamps.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace
from typing import NamedTuple, Optional


class ChainError(Exception):
    pass


class RejectedDoubleSpend(ChainError):
    pass


class RejectedMalformed(ChainError):
    pass


class NotYetMined(ChainError):
    pass


class UnknownTx(ChainError):
    pass


class InsufficientFunds(ChainError):
    pass


class OutPoint(NamedTuple):
    txid: str
    index: int


@dataclass(frozen=True)
class TxOutput:
    value: int
    recipient: str
    payload: Optional[bytes] = None


@dataclass(frozen=True)
class SimTransaction:
    inputs: tuple[OutPoint, ...]
    outputs: tuple[TxOutput, ...]
    submitted_at: int = 0
    nonce: int = 0

    @property
    def txid(self) -> str:
        body = {
            "inputs": [[o.txid, o.index] for o in self.inputs],
            "outputs": [
                [o.value, o.recipient, o.payload.hex() if o.payload else None]
                for o in self.outputs
            ],
            "submitted_at": self.submitted_at,
            "nonce": self.nonce,
        }
        blob = json.dumps(body, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()


@dataclass(frozen=True)
class SimBlock:
    height: int
    timestamp: int
    txs: tuple[SimTransaction, ...]


class BitcoinSim:
    """The simulated chain: mempool, miner and explorer queries in one object.

    A single driver mutates the chain (submit/mine); queries never observe a
    partially mined block because mining is one atomic call.
    """

    def __init__(self, block_interval: int = 600, per_tx_fee: int = 0):
        self.block_interval = block_interval
        self.per_tx_fee = per_tx_fee
        genesis = SimBlock(height=0, timestamp=0, txs=())
        self._blocks: list[SimBlock] = [genesis]
        self._mempool: list[SimTransaction] = []
        self._utxos: dict[OutPoint, TxOutput] = {}
        self._all_outputs: dict[OutPoint, TxOutput] = {}
        self._pending_spent: set[OutPoint] = set()
        self._mined_at: dict[str, int] = {}
        self._mempool_ids: set[str] = set()
        self._nonce = 0

    @property
    def tip_height(self) -> int:
        return self._blocks[-1].height

    @property
    def now(self) -> int:
        """Timestamp the next mined block will carry."""
        return (self.tip_height + 1) * self.block_interval

    def faucet(self, address: str, amount: int) -> str:
        """Grant coins out of thin air; used to fund originators."""
        tx = SimTransaction(inputs=(), outputs=(TxOutput(amount, address),))
        return self._admit(tx, funded=True)

    def submit_transaction(self, tx: SimTransaction) -> str:
        """Queue a transaction after UTXO validation; returns its stable txid."""
        return self._admit(tx, funded=False)

    def _admit(self, tx: SimTransaction, funded: bool) -> str:
        for out in tx.outputs:
            if out.value < 0:
                raise RejectedMalformed("negative output value")
        seen: set[OutPoint] = set()
        total_in = 0
        for point in tx.inputs:
            if point in seen:
                raise RejectedDoubleSpend(f"outpoint {point} spent twice in one tx")
            seen.add(point)
            if point in self._pending_spent:
                raise RejectedDoubleSpend(f"outpoint {point} already claimed")
            if point not in self._utxos:
                if point in self._all_outputs:
                    raise RejectedDoubleSpend(f"outpoint {point} already spent")
                raise RejectedMalformed(f"unknown outpoint {point}")
            total_in += self._utxos[point].value
        total_out = sum(out.value for out in tx.outputs)
        if not funded and tx.inputs and total_in < total_out + self.per_tx_fee:
            raise RejectedMalformed(
                f"outputs {total_out} + fee {self.per_tx_fee} exceed inputs {total_in}")
        if not funded and not tx.inputs and total_out > 0:
            raise RejectedMalformed("value-carrying tx needs inputs")

        tx = replace(tx, submitted_at=self.now, nonce=self._nonce)
        self._nonce += 1
        self._pending_spent.update(tx.inputs)
        self._mempool.append(tx)
        self._mempool_ids.add(tx.txid)
        return tx.txid

    def build_transaction(self, sender: str, outputs: list[TxOutput]) -> SimTransaction:
        """Select the sender's UTXOs to cover the outputs, adding change."""
        needed = sum(out.value for out in outputs) + self.per_tx_fee
        picked: list[OutPoint] = []
        total = 0
        for point, out in self._utxos.items():
            if out.recipient != sender or point in self._pending_spent:
                continue
            picked.append(point)
            total += out.value
            if total >= needed:
                break
        if total < needed:
            raise InsufficientFunds(f"{sender!r} holds {total} < {needed}")
        outs = tuple(outputs)
        if total > needed:
            outs = outs + (TxOutput(total - needed, sender),)
        return SimTransaction(inputs=tuple(picked), outputs=outs)

    def mine_block(self) -> SimBlock:
        """Drain the mempool FIFO into the next block. Empty blocks are legal."""
        height = self.tip_height + 1
        txs = tuple(self._mempool)
        self._mempool = []
        self._mempool_ids = set()
        block = SimBlock(height=height, timestamp=height * self.block_interval, txs=txs)
        self._blocks.append(block)
        for tx in txs:
            for point in tx.inputs:
                del self._utxos[point]
                self._pending_spent.discard(point)
            for index, out in enumerate(tx.outputs):
                point = OutPoint(tx.txid, index)
                self._utxos[point] = out
                self._all_outputs[point] = out
            self._mined_at[tx.txid] = height
        return block

    def get_block(self, height: int) -> SimBlock:
        if height < 0:
            raise NotYetMined(f"no block at height {height}")
        if height > self.tip_height:
            raise NotYetMined(f"height {height} beyond tip {self.tip_height}")
        return self._blocks[height]

    def confirmations(self, txid: str) -> int:
        """0 while in the mempool, else depth from the tip (tip block = 1)."""
        if txid in self._mined_at:
            return self.tip_height - self._mined_at[txid] + 1
        if txid in self._mempool_ids:
            return 0
        raise UnknownTx(txid)

    def balance_of(self, address: str) -> int:
        return sum(o.value for p, o in self._utxos.items() if o.recipient == address)

    def originator_of(self, tx: SimTransaction) -> str:
        """Address that funded the tx; for input-less txs, the first recipient."""
        if tx.inputs:
            return self._all_outputs[tx.inputs[0]].recipient
        return tx.outputs[0].recipient if tx.outputs else ""

    def export_dump(self) -> str:
        """JSON chain dump for external indexing or debugging."""
        blocks = []
        for block in self._blocks:
            blocks.append({
                "height": block.height,
                "timestamp": block.timestamp,
                "txs": [
                    {
                        "txid": tx.txid,
                        "inputs": [[p.txid, p.index] for p in tx.inputs],
                        "outputs": [
                            {
                                "value": o.value,
                                "recipient": o.recipient,
                                "payload": o.payload.hex() if o.payload else None,
                            }
                            for o in tx.outputs
                        ],
                    }
                    for tx in block.txs
                ],
            })
        return json.dumps({"blocks": blocks}, indent=2)
