"""The bridge: scans the UTXO chain, drives agreement, executes, answers.

Control flow is a loop shaped like a U. Inscriptions enter on the UTXO
side, are bundled once their block is final, agreed on by the committee,
executed against the contract platform, and answered with receipt
inscriptions submitted back to the UTXO side.

Epochs close at fixed multiples of the epoch length; an epoch is processed
when its last block reaches the finality depth. Registrations are handled
at scan time (they change the committee itself, so they cannot wait for a
committee to agree on them); everything else goes through consensus.

Fees are taken per inscription from its carried value, split equally over
the active committee with the integer remainder to the leader of the
committed view, and credited to the target contract's balance map. All fee
arithmetic is integral and exact.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from . import brc20
from .btcsim import BitcoinSim, SimBlock, SimTransaction, TxOutput
from .bus import MessageBus
from .codec import (Inscription, Op, OrderingKey, build_receipt_payload,
                    make_inscription_id, parse_inscription)
from .committee import (CommitteeError, ConsensusEngine, FaultMode,
                        ValidatorRecord, ValidatorSet, apply_slashing,
                        audit_equivocation)
from .evmsim import ContractTemplate, EvmSim
from .signing import QuorumProof

logger = logging.getLogger(__name__)


class OrchestratorError(Exception):
    pass


class InvariantViolation(OrchestratorError):
    """An audit check failed; the run is unsound."""


@dataclass(frozen=True)
class BridgeConfig:
    epsilon: int = 6
    finality_depth: int = 6
    bridge_btc_addr: str = "bc1qbridge0000000000"
    max_views_per_epoch: int = 16

    def validate(self) -> None:
        if self.epsilon < 1:
            raise ValueError("epoch length must be at least one block")
        if self.finality_depth < 1:
            raise ValueError("finality depth must be at least one block")
        if self.max_views_per_epoch < 1:
            raise ValueError("need at least one view per epoch")


@dataclass(frozen=True)
class EpochReport:
    index: int
    height: int
    bundle_size: int
    committed: bool
    view: int
    message_count: int
    total_message_count: int
    fees_charged: int
    fees_credited: int
    receipt_txids: tuple
    penalties: dict


def bundle_digest(inscriptions: list[Inscription]) -> str:
    ids = [i.inscription_id for i in inscriptions]
    blob = json.dumps(ids, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


_METRIC_KEYS = (
    "blocks_scanned", "inscriptions_seen", "malformed_payloads",
    "receipts_seen", "dropped_no_contract", "registrations_ok",
    "registrations_rejected", "epochs", "bundles_committed",
    "consensus_failures", "messages_total", "fees_charged_total",
    "fees_credited_total", "receipts_published", "slashed_total",
)


class Bridge:
    """One bridge instance bound to one chain, one contract platform and
    one validator roster."""

    def __init__(self, chain: BitcoinSim, evm: EvmSim,
                 validator_set: ValidatorSet, bus: MessageBus,
                 config: Optional[BridgeConfig] = None,
                 fault_plan: Optional[dict[str, FaultMode]] = None):
        self.chain = chain
        self.evm = evm
        self.validator_set = validator_set
        self.bus = bus
        self.config = config or BridgeConfig()
        self.config.validate()
        self.fault_plan = dict(fault_plan or {})
        self._fee_fraction = Fraction(str(evm.gas_schedule.fee_rate))
        self._scanned_height = 0
        self._pending: list[tuple[Inscription, int]] = []
        self._receipts: dict[str, dict[str, tuple[bool, str]]] = {}
        self._next_epoch_end = self.config.epsilon
        self._epoch_index = 0
        self._view = 0
        self._audited_log_len = 0
        self._published_ids: set[str] = set()
        self._settled: dict[str, tuple[bool, str, str]] = {}
        self._receipt_log: list[dict] = []
        self.reports: list[EpochReport] = []
        self.metrics = {key: 0 for key in _METRIC_KEYS}

    # -- driving -------------------------------------------------------

    def poll(self) -> list[EpochReport]:
        """Catch up with the chain: scan every newly final block and run
        the epochs that closed. Returns reports for epochs run now."""
        produced: list[EpochReport] = []
        while True:
            final_height = self.chain.tip_height - self.config.finality_depth + 1
            if self._scanned_height >= final_height:
                break
            height = self._scanned_height + 1
            self._scan_block(self.chain.get_block(height))
            self._scanned_height = height
            if height == self._next_epoch_end:
                report = self._run_epoch(height)
                self._next_epoch_end += self.config.epsilon
                produced.append(report)
        return produced

    def step(self) -> tuple[SimBlock, list[EpochReport]]:
        """Mine one block, then let the bridge catch up."""
        block = self.chain.mine_block()
        return block, self.poll()

    def run(self, blocks: int) -> list[EpochReport]:
        out: list[EpochReport] = []
        for _ in range(blocks):
            _, reports = self.step()
            out.extend(reports)
        return out

    # -- scanning ------------------------------------------------------

    def _scan_block(self, block: SimBlock) -> None:
        self.metrics["blocks_scanned"] += 1
        for tx_index, tx in enumerate(block.txs):
            origin = self.chain.originator_of(tx)
            for out_index, output in enumerate(tx.outputs):
                if output.payload is None:
                    continue
                envelope = parse_inscription(output.payload)
                if envelope is None:
                    self.metrics["malformed_payloads"] += 1
                    continue
                inscription = Inscription(
                    envelope=envelope,
                    inscription_id=make_inscription_id(tx.txid, out_index),
                    value=output.value,
                    origin=origin,
                    ordering_key=OrderingKey(block.timestamp, block.height,
                                             tx_index, out_index))
                self.metrics["inscriptions_seen"] += 1
                self._route(inscription, block.height)

    def _route(self, inscription: Inscription, height: int) -> None:
        if inscription.op is Op.RECEIPT:
            # Our own answers coming back around; nothing to do.
            self.metrics["receipts_seen"] += 1
            return
        if inscription.op is Op.REGISTRATION:
            self._handle_registration(inscription)
            return
        if inscription.c_addr is None:
            # Plain token activity with no routing target is out of scope.
            self.metrics["dropped_no_contract"] += 1
            return
        self._pending.append((inscription, height))

    def _handle_registration(self, inscription: Inscription) -> None:
        c_addr = inscription.c_addr
        eth_addr = inscription.fields["eth_addr"]
        deposit = inscription.envelope.int_field("max")
        outcome: tuple[bool, str]
        if not self.evm.has_contract(c_addr):
            outcome = (False, "UnknownContract")
        elif self.evm.contract(c_addr).template is not ContractTemplate.DEPOSIT:
            outcome = (False, "WrongTemplate")
        else:
            try:
                self.validator_set.register(eth_addr, inscription.origin, deposit)
            except CommitteeError as err:
                outcome = (False, type(err).__name__)
            else:
                event = self.evm.register_validator_onchain(
                    c_addr, eth_addr, inscription.origin, deposit)
                outcome = (event.success, event.return_value)
        key = "registrations_ok" if outcome[0] else "registrations_rejected"
        self.metrics[key] += 1
        self._record_outcome(c_addr, inscription.inscription_id, outcome)

    def _record_outcome(self, c_addr: str, inscription_id: str,
                        outcome: tuple[bool, str]) -> None:
        self._receipts.setdefault(c_addr, {})[inscription_id] = outcome

    # -- epoch processing ----------------------------------------------

    def _run_epoch(self, height: int) -> EpochReport:
        self.metrics["epochs"] += 1
        bundle = sorted((i for i, _ in self._pending),
                        key=lambda i: i.ordering_key)
        committed = True
        view = self._view
        message_count = 0
        total_message_count = 0
        fees_charged = 0
        fees_credited = 0
        active = self.validator_set.active()

        if bundle and not active:
            for inscription in bundle:
                self._record_outcome(inscription.c_addr,
                                     inscription.inscription_id,
                                     (False, "NoCommittee"))
            self._pending = []
        elif bundle:
            engine = ConsensusEngine(active, self.bus,
                                     fault_plan=self.fault_plan,
                                     max_views=self.config.max_views_per_epoch)
            engine.view = self._view
            digest = bundle_digest(bundle)
            proposal = tuple(i.inscription_id for i in bundle)
            outcome = engine.agree(self._epoch_index, digest, proposal)
            self._view = engine.view
            view = outcome.view
            message_count = outcome.message_count
            total_message_count = outcome.total_message_count
            self.metrics["messages_total"] += outcome.total_message_count
            if outcome.committed:
                proof = engine.multi_sign(digest)
                leader = engine.leader_of(outcome.view)
                fees_charged, fees_credited = self._execute_bundle(
                    bundle, proof, active, leader)
                self._pending = []
                self.metrics["bundles_committed"] += 1
            else:
                committed = False
                self.metrics["consensus_failures"] += 1
                logger.warning("epoch %d: no agreement after %d views, "
                               "bundle of %d retained", self._epoch_index,
                               outcome.views_used, len(bundle))

        receipt_txids = self._publish_receipts()
        penalties = self._settle_slashing()
        report = EpochReport(
            index=self._epoch_index, height=height, bundle_size=len(bundle),
            committed=committed, view=view, message_count=message_count,
            total_message_count=total_message_count,
            fees_charged=fees_charged, fees_credited=fees_credited,
            receipt_txids=receipt_txids, penalties=penalties)
        self.reports.append(report)
        self._epoch_index += 1
        return report

    def _execute_bundle(self, bundle: list[Inscription], proof: QuorumProof,
                        active: list[ValidatorRecord],
                        leader: str) -> tuple[int, int]:
        groups: dict[str, list[Inscription]] = {}
        for inscription in bundle:
            groups.setdefault(inscription.c_addr, []).append(inscription)
        charged = 0
        credited = 0
        for c_addr, group in groups.items():
            if not self.evm.has_contract(c_addr):
                for inscription in group:
                    self._record_outcome(c_addr, inscription.inscription_id,
                                         (False, "UnknownContract"))
                continue
            account = self.evm.contract(c_addr)
            for inscription in group:
                op_name = inscription.op.value
                if op_name not in account.interfaces:
                    reason = f"NoSuchInterface:{op_name}"
                    self.evm.record_rejection(c_addr,
                                              inscription.inscription_id, reason)
                    self._record_outcome(c_addr, inscription.inscription_id,
                                         (False, reason))
                    continue
                args = dict(inscription.fields)
                args["origin"] = inscription.origin
                args["inscription_id"] = inscription.inscription_id
                event = self.evm.invoke(c_addr, account.interfaces[op_name],
                                        args, proof)
                self._record_outcome(c_addr, inscription.inscription_id,
                                     (event.success, event.return_value))
                fee = int(self._fee_fraction * inscription.value)
                charged += fee
                credited += self._split_fee(c_addr, inscription.tick or "sat",
                                            fee, active, leader)
        self.metrics["fees_charged_total"] += charged
        self.metrics["fees_credited_total"] += credited
        return charged, credited

    def _split_fee(self, c_addr: str, tick: str, fee: int,
                   active: list[ValidatorRecord], leader: str) -> int:
        """Equal split, integer remainder to the leader. Returns the total
        actually credited, which must equal the fee."""
        if fee <= 0:
            return 0
        share = fee // len(active)
        remainder = fee - share * len(active)
        credited = 0
        for record in active:
            amount = share + (remainder if record.eth_addr == leader else 0)
            if amount:
                self.evm.credit_fee(c_addr, record.btc_addr, tick, amount)
                credited += amount
        return credited

    def _publish_receipts(self) -> tuple:
        txids = []
        for c_addr in list(self._receipts):
            events = self._receipts.pop(c_addr)
            payload = build_receipt_payload(events, c_addr=c_addr)
            tx = SimTransaction(
                inputs=(),
                outputs=(TxOutput(0, self.config.bridge_btc_addr, payload),))
            txid = self.chain.submit_transaction(tx)
            txids.append(txid)
            for inscription_id, (ok, ret) in events.items():
                if inscription_id in self._published_ids:
                    raise InvariantViolation(
                        f"second receipt for {inscription_id}")
                self._published_ids.add(inscription_id)
                self._settled[inscription_id] = (ok, ret, txid)
            self.metrics["receipts_published"] += 1
            self._receipt_log.append({
                "epoch": self._epoch_index,
                "submitted_at_height": self.chain.tip_height,
                "txid": txid,
                "c_addr": c_addr,
                "events": {k: [v[0], v[1]] for k, v in events.items()},
            })
        return tuple(txids)

    def _settle_slashing(self) -> dict:
        log = self.bus.log()
        evidence = audit_equivocation(log[self._audited_log_len:],
                                      self.validator_set.secrets())
        self._audited_log_len = len(log)
        penalties = apply_slashing(self.validator_set, evidence)
        for eth_addr, penalty in penalties.items():
            self.metrics["slashed_total"] += penalty
            record = self.validator_set.get(eth_addr)
            self._sync_deposit_entry(record)
        return penalties

    def _sync_deposit_entry(self, record: ValidatorRecord) -> None:
        for account in self.evm.contracts():
            if account.template is not ContractTemplate.DEPOSIT:
                continue
            entry = account.storage["validators"].get(record.eth_addr)
            if entry is not None:
                entry["deposit"] = record.deposit
                entry["status"] = record.status.value

    # -- results -------------------------------------------------------

    def receipt_for(self, inscription_id: str) -> Optional[tuple[bool, str, str]]:
        """(success, return_value, receipt txid) once settled, else None."""
        return self._settled.get(inscription_id)

    def receipt_log_lines(self) -> list[str]:
        return [json.dumps(entry, separators=(",", ":"), sort_keys=True)
                for entry in self._receipt_log]

    def pending_count(self) -> int:
        return len(self._pending)

    # -- invariants ----------------------------------------------------

    def audit(self) -> list[str]:
        """Run every cross-cutting soundness check; returns human-readable
        violations (empty list means the run is sound)."""
        problems: list[str] = []
        for account in self.evm.contracts():
            if account.template in (ContractTemplate.FT,
                                    ContractTemplate.STABLECOIN):
                try:
                    brc20.check_conservation(account.storage["registry"])
                except AssertionError as err:
                    problems.append(f"conservation: {account.c_addr}: {err}")
        if self.metrics["fees_charged_total"] != self.metrics["fees_credited_total"]:
            problems.append(
                "fees: charged {} != credited {}".format(
                    self.metrics["fees_charged_total"],
                    self.metrics["fees_credited_total"]))
        credited_in_maps = sum(
            amount
            for account in self.evm.contracts()
            for per_tick in account.balance_map.values()
            for amount in per_tick.values())
        if credited_in_maps != self.metrics["fees_credited_total"]:
            problems.append(
                "fees: balance maps hold {} but {} was credited".format(
                    credited_in_maps, self.metrics["fees_credited_total"]))
        if (self.metrics["consensus_failures"] == 0
                and self.validator_set.size() > 0):
            stale = [i.inscription_id for i, h in self._pending
                     if self._scanned_height - h >= 2 * self.config.epsilon]
            if stale:
                problems.append(f"liveness: unsettled past two epochs: {stale}")
        settled_ids = set(self._settled)
        pending_ids = {i.inscription_id for i, _ in self._pending}
        overlap = settled_ids & pending_ids
        if overlap:
            problems.append(f"settlement: both settled and pending: {sorted(overlap)}")
        return problems

    def check_invariants(self) -> None:
        problems = self.audit()
        if problems:
            raise InvariantViolation("; ".join(problems))
