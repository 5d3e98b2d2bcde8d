"""Wiring and driving of complete simulated runs.

``build_simulation`` stands up the chain, the contract platform, the
deposit contract and the initial committee (whose members register through
real inscriptions, same as anyone else). Workload schedules are computed
up front from the seed alone, so a given configuration always produces a
byte-identical run.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field
from typing import Optional

from .btcsim import BitcoinSim, TxOutput
from .bus import MessageBus
from .codec import Envelope, Op, Protocol, make_inscription_id, serialize_inscription
from .committee import (CommitteeConfig, FaultMode, ValidatorSet,
                        make_quorum_verifier)
from .config import RunConfig
from .evmsim import ContractTemplate, EvmSim, GasSchedule
from .orchestrator import Bridge, BridgeConfig, EpochReport

REGISTRATION_SIGNATURE = "registration(tick,max,eth_addr) return (status)"
DUST_VALUE = 546


def validator_identity(index: int) -> tuple[str, str]:
    """Deterministic (eth_addr, btc_addr) pair for a synthetic validator."""
    eth = "0x" + hashlib.sha256(f"validator-eth-{index}".encode()).hexdigest()[:40]
    btc = "bc1q" + hashlib.sha256(f"validator-btc-{index}".encode()).hexdigest()[:38]
    return eth, btc


def user_identity(name: str) -> str:
    return "bc1q" + hashlib.sha256(f"user-btc-{name}".encode()).hexdigest()[:38]


def submit_inscription(chain: BitcoinSim, sender: str, envelope: Envelope,
                       value: int = DUST_VALUE) -> str:
    """Wrap an envelope in a self-addressed output and queue the tx.
    Returns the inscription id (txid + output position)."""
    payload = serialize_inscription(envelope)
    tx = chain.build_transaction(sender, [TxOutput(value, sender, payload)])
    txid = chain.submit_transaction(tx)
    return make_inscription_id(txid, 0)


def registration_envelope(eth_addr: str, deposit: int, c_addr: str) -> Envelope:
    return Envelope(
        protocol=Protocol.MIDDLEWARE, op=Op.REGISTRATION,
        op_signature=REGISTRATION_SIGNATURE,
        fields={"tick": "eth", "max": str(deposit), "eth_addr": eth_addr},
        c_addr=c_addr)


@dataclass
class Simulation:
    config: RunConfig
    chain: BitcoinSim
    evm: EvmSim
    validator_set: ValidatorSet
    bridge: Bridge
    bus: MessageBus
    deposit_contract: str
    committee: list[dict] = field(default_factory=list)


def resolve_fault_plan(raw: dict, committee: list[dict]) -> dict[str, FaultMode]:
    """Fault plan keys may be committee indexes or full platform addresses."""
    plan: dict[str, FaultMode] = {}
    by_index = {str(i): member["eth_addr"] for i, member in enumerate(committee)}
    for key, mode in raw.items():
        key = str(key)
        if key.isdigit() and key not in by_index:
            raise ValueError(f"fault plan index {key} out of range "
                             f"(committee has {len(committee)} members)")
        plan[by_index.get(key, key)] = FaultMode(mode)
    return plan


def build_simulation(cfg: RunConfig,
                     committee: Optional[list[dict]] = None) -> Simulation:
    """Stand up a full run: chain, platform, deposit contract, committee.

    The committee defaults to ``committee_size`` synthetic members, each
    funded by faucet and registered through an actual inscription; two
    bootstrap blocks are mined so those registrations are on chain (though
    not yet final) when this returns.
    """
    cfg.validate()
    chain = BitcoinSim(block_interval=cfg.block_interval)
    gas = GasSchedule(fee_rate=cfg.fee_rate)
    evm = EvmSim(gas)
    committee_cfg = CommitteeConfig(
        deposit_threshold=cfg.deposit_threshold,
        penalty_rate=cfg.penalty_rate,
        min_committee_size=cfg.min_committee_size,
        max_views_per_epoch=cfg.max_views_per_epoch)
    validator_set = ValidatorSet(committee_cfg)
    evm.set_quorum_verifier(make_quorum_verifier(validator_set))
    bus = MessageBus(seed=cfg.seed)
    deposit_contract = evm.deploy_contract(ContractTemplate.DEPOSIT, "network")

    if committee is None:
        committee = []
        for index in range(cfg.committee_size):
            eth, btc = validator_identity(index)
            committee.append({"eth_addr": eth, "btc_addr": btc,
                              "deposit": cfg.deposit})

    fault_plan = resolve_fault_plan(cfg.fault_plan, committee)
    bridge_cfg = BridgeConfig(epsilon=cfg.epsilon,
                              finality_depth=cfg.finality_depth,
                              max_views_per_epoch=cfg.max_views_per_epoch)
    bridge = Bridge(chain, evm, validator_set, bus, bridge_cfg, fault_plan)

    if committee:
        for member in committee:
            chain.faucet(member["btc_addr"], 50_000)
        chain.mine_block()
        for member in committee:
            envelope = registration_envelope(member["eth_addr"],
                                             member["deposit"],
                                             deposit_contract)
            submit_inscription(chain, member["btc_addr"], envelope)
        chain.mine_block()

    return Simulation(config=cfg, chain=chain, evm=evm,
                      validator_set=validator_set, bridge=bridge, bus=bus,
                      deposit_contract=deposit_contract, committee=committee)


# -- synthetic workloads ----------------------------------------------

WORKLOAD_USERS = ("alice", "bob", "carol")

_EXTRA_TEMPLATE_TICKS = (
    (ContractTemplate.STABLECOIN, "usdm"),
    (ContractTemplate.NFT, "pixl"),
    (ContractTemplate.INSURANCE, "covr"),
    (ContractTemplate.LOAN, "lend"),
    (ContractTemplate.AUCTION, "gavl"),
    (ContractTemplate.DAO, "agor"),
)


def build_workload_schedule(sim: Simulation, cfg: RunConfig,
                            last_height: int) -> dict[int, list[tuple]]:
    """Per-height submission plan: height -> [(sender, envelope, value)].

    A pure function of the configuration seed and the simulation's
    deterministic addresses; never consults the epoch length, so the same
    seed produces the same arrivals whatever the epoch geometry.
    """
    if cfg.workload == "none":
        return {}
    rng = random.Random(cfg.seed ^ 0x5EED)
    users = [user_identity(name) for name in WORKLOAD_USERS]
    for user in users:
        # Several outputs, not one: concurrent submissions in one block
        # cannot share a coin, and change is unspendable until mined.
        for _ in range(8):
            sim.chain.faucet(user, 625_000)

    token_contract = sim.evm.deploy_contract(ContractTemplate.FT, "network")
    extra: list[tuple[str, str]] = []
    if cfg.workload == "mixed":
        for template, tick in _EXTRA_TEMPLATE_TICKS:
            extra.append((sim.evm.deploy_contract(template, "network"), tick))

    schedule: dict[int, list[tuple]] = {}
    first = sim.chain.tip_height + 2  # height 1 mines the faucet outputs
    if first > last_height:
        return schedule

    def deploy_env(c_addr: str, tick: str) -> Envelope:
        return Envelope(protocol=Protocol.BRC20, op=Op.DEPLOY,
                        fields={"tick": tick, "max": "21000000", "lim": "1000"},
                        c_addr=c_addr)

    schedule[first] = [(users[0], deploy_env(token_contract, "ordi"), 10_000)]
    for offset, (c_addr, tick) in enumerate(extra):
        height = first + 1 + offset
        if height <= last_height:
            schedule.setdefault(height, []).append(
                (users[0], deploy_env(c_addr, tick), 10_000))

    for height in range(first + 1, last_height + 1):
        if rng.random() >= 0.5:
            continue
        sender = users[rng.randrange(len(users))]
        value = rng.randrange(2_000, 12_000)
        if rng.random() < 0.2:
            receiver = users[rng.randrange(len(users))]
            envelope = Envelope(
                protocol=Protocol.BRC20, op=Op.TRANSFER,
                fields={"tick": "ordi", "amt": str(rng.randint(1, 400)),
                        "to": receiver},
                c_addr=token_contract)
        else:
            envelope = Envelope(
                protocol=Protocol.BRC20, op=Op.MINT,
                fields={"tick": "ordi", "amt": str(rng.randint(1, 1000))},
                c_addr=token_contract)
        schedule.setdefault(height, []).append((sender, envelope, value))
    return schedule


@dataclass
class RunResult:
    config: RunConfig
    metrics: dict
    reports: list[EpochReport]
    problems: list[str]
    receipt_lines: list[str]
    simulation: Simulation

    @property
    def ok(self) -> bool:
        return not self.problems

    def summary_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "config_digest": self.config.digest(),
            "final_height": self.simulation.chain.tip_height,
            "metrics": dict(self.metrics),
            "problems": list(self.problems),
            "epochs": [
                {
                    "index": r.index,
                    "height": r.height,
                    "bundle_size": r.bundle_size,
                    "committed": r.committed,
                    "view": r.view,
                    "messages": r.message_count,
                    "fees_charged": r.fees_charged,
                    "fees_credited": r.fees_credited,
                    "receipts": list(r.receipt_txids),
                    "penalties": dict(r.penalties),
                }
                for r in self.reports
            ],
        }


def run_bridge_workload(cfg: RunConfig) -> RunResult:
    """Build a simulation, drive it for ``cfg.blocks`` blocks under the
    configured workload, and audit the outcome."""
    sim = build_simulation(cfg)
    last_height = sim.chain.tip_height + cfg.blocks
    schedule = build_workload_schedule(sim, cfg, last_height)
    reports: list[EpochReport] = []
    while sim.chain.tip_height < last_height:
        for sender, envelope, value in schedule.get(sim.chain.tip_height + 1, []):
            submit_inscription(sim.chain, sender, envelope, value)
        _, produced = sim.bridge.step()
        reports.extend(produced)
    problems = sim.bridge.audit()
    return RunResult(config=cfg, metrics=dict(sim.bridge.metrics),
                     reports=reports, problems=problems,
                     receipt_lines=sim.bridge.receipt_log_lines(),
                     simulation=sim)
