"""Declarative scenario files: a committee, contracts, users and a script
of inscriptions at given heights, with expectations checked at the end.

The file format is JSON. Heights are absolute chain heights; the first
two blocks of a run with a committee are taken by funding and committee
registration, and user funding lands in the block after that, so the
earliest useful step height is 4.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .codec import Envelope, Op, Protocol
from .config import ConfigError, RunConfig
from .evmsim import ContractTemplate
from .orchestrator import EpochReport
from .simulation import (Simulation, build_simulation, submit_inscription,
                         user_identity, validator_identity)


class ScenarioError(ValueError):
    pass


_TOP_KEYS = {"name", "config", "contracts", "users", "committee", "steps",
             "run_until_height", "expect"}


@dataclass
class StepResult:
    height: int
    inscription_id: str
    settled: bool
    success: Optional[bool]
    return_value: Optional[str]
    receipt_txid: Optional[str]
    receipt_height: Optional[int]


@dataclass
class ScenarioResult:
    name: str
    problems: list[str]
    metrics: dict
    reports: list[EpochReport]
    steps: list[StepResult]
    receipt_lines: list[str]
    contracts: dict = field(default_factory=dict)
    simulation: Optional[Simulation] = None

    @property
    def ok(self) -> bool:
        return not self.problems

    def summary_dict(self) -> dict:
        return {
            "name": self.name,
            "ok": self.ok,
            "problems": list(self.problems),
            "metrics": dict(self.metrics),
            "contracts": dict(self.contracts),
            "steps": [
                {
                    "height": s.height,
                    "inscription_id": s.inscription_id,
                    "settled": s.settled,
                    "success": s.success,
                    "return_value": s.return_value,
                    "receipt_txid": s.receipt_txid,
                    "receipt_height": s.receipt_height,
                }
                for s in self.steps
            ],
        }


def load_scenario(path: str | Path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as err:
        raise ScenarioError(f"cannot read {path}: {err}") from err
    except json.JSONDecodeError as err:
        raise ScenarioError(f"{path} is not valid JSON: {err}") from err
    if not isinstance(doc, dict):
        raise ScenarioError("scenario must be a JSON object")
    return doc


def _check_shape(doc: dict) -> None:
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ScenarioError(f"unknown scenario keys: {sorted(unknown)}")
    if "run_until_height" not in doc:
        raise ScenarioError("scenario needs run_until_height")
    if not isinstance(doc.get("steps", []), list):
        raise ScenarioError("steps must be a list")


def _build_envelope(step: dict, contracts: dict[str, str]) -> Envelope:
    raw = step.get("envelope")
    if not isinstance(raw, dict):
        raise ScenarioError(f"step at height {step.get('height')}: no envelope")
    try:
        protocol = Protocol(raw["p"])
        op = Op(raw["op"])
    except (KeyError, ValueError) as err:
        raise ScenarioError(f"bad envelope protocol/op: {err}") from err
    c_addr = None
    if "contract" in step:
        label = step["contract"]
        if label not in contracts:
            raise ScenarioError(f"unknown contract label {label!r}")
        c_addr = contracts[label]
    elif "c_addr" in step:
        c_addr = step["c_addr"]
    fields = {k: v for k, v in raw.items()
              if k not in ("p", "op", "op_signature")}
    return Envelope(protocol=protocol, op=op,
                    op_signature=raw.get("op_signature"),
                    fields=fields, c_addr=c_addr)


def run_scenario(doc: dict, keep_simulation: bool = False) -> ScenarioResult:
    _check_shape(doc)
    name = doc.get("name", "unnamed")
    try:
        cfg = RunConfig.from_dict(dict(doc.get("config", {})))
    except (ConfigError, TypeError) as err:
        raise ScenarioError(f"bad config: {err}") from err

    committee = []
    for index, member in enumerate(doc.get("committee", [])):
        if "eth_addr" in member and "btc_addr" in member:
            eth, btc = member["eth_addr"], member["btc_addr"]
        else:
            eth, btc = validator_identity(index)
        committee.append({"eth_addr": eth, "btc_addr": btc,
                          "deposit": int(member.get("deposit", cfg.deposit))})

    sim = build_simulation(cfg, committee=committee)

    contracts = {"deposit": sim.deposit_contract}
    for entry in doc.get("contracts", []):
        label = entry.get("label")
        if not label or label in contracts:
            raise ScenarioError(f"missing or duplicate contract label {label!r}")
        try:
            template = ContractTemplate(entry["template"])
        except (KeyError, ValueError) as err:
            raise ScenarioError(f"bad template for {label!r}: {err}") from err
        contracts[label] = sim.evm.deploy_contract(template,
                                                   entry.get("owner", "network"))

    addresses: dict[str, str] = {}
    for user in doc.get("users", []):
        user_name = user.get("name")
        if not user_name:
            raise ScenarioError("every user needs a name")
        address = user.get("address") or user_identity(user_name)
        addresses[user_name] = address
        funding = int(user.get("funding", 1_000_000))
        # Four coins per user so several same-height steps can each spend
        # a mined output.
        chunk, extra = divmod(funding, 4)
        for i in range(4):
            amount = chunk + (extra if i == 0 else 0)
            if amount > 0:
                sim.chain.faucet(address, amount)

    funding_height = sim.chain.tip_height + 1
    steps = sorted(doc.get("steps", []), key=lambda s: int(s.get("height", 0)))
    by_height: dict[int, list[tuple[int, dict]]] = {}
    for index, step in enumerate(steps):
        height = int(step.get("height", 0))
        if height <= funding_height:
            raise ScenarioError(
                f"step at height {height} collides with setup blocks "
                f"(first usable height is {funding_height + 1})")
        by_height.setdefault(height, []).append((index, step))

    run_until = int(doc["run_until_height"])
    if steps and run_until < max(by_height):
        raise ScenarioError("run_until_height ends before the last step")

    submitted: dict[int, tuple[int, str]] = {}
    reports: list[EpochReport] = []
    while sim.chain.tip_height < run_until:
        next_height = sim.chain.tip_height + 1
        for index, step in by_height.get(next_height, []):
            sender = step.get("from")
            address = addresses.get(sender, sender)
            if not address:
                raise ScenarioError(f"step {index}: no sender")
            envelope = _build_envelope(step, contracts)
            inscription_id = submit_inscription(
                sim.chain, address, envelope, int(step.get("value", 546)))
            submitted[index] = (next_height, inscription_id)
        _, produced = sim.bridge.step()
        reports.extend(produced)

    step_results: list[StepResult] = []
    for index in range(len(steps)):
        height, inscription_id = submitted[index]
        settled = sim.bridge.receipt_for(inscription_id)
        receipt_height = None
        if settled is not None:
            confirmations = sim.chain.confirmations(settled[2])
            if confirmations > 0:
                receipt_height = sim.chain.tip_height - confirmations + 1
        step_results.append(StepResult(
            height=height, inscription_id=inscription_id,
            settled=settled is not None,
            success=settled[0] if settled else None,
            return_value=settled[1] if settled else None,
            receipt_txid=settled[2] if settled else None,
            receipt_height=receipt_height))

    problems = sim.bridge.audit()
    problems.extend(_check_expectations(doc.get("expect", {}), sim,
                                        step_results))
    return ScenarioResult(
        name=name, problems=problems, metrics=dict(sim.bridge.metrics),
        reports=reports, steps=step_results,
        receipt_lines=sim.bridge.receipt_log_lines(), contracts=contracts,
        simulation=sim if keep_simulation else None)


def _check_expectations(expect: dict, sim: Simulation,
                        step_results: list[StepResult]) -> list[str]:
    problems: list[str] = []
    if expect.get("stall"):
        if sim.bridge.metrics["consensus_failures"] == 0:
            problems.append("expected a stall but every epoch committed")
    for item in expect.get("receipts", []):
        index = int(item.get("step", -1))
        if not 0 <= index < len(step_results):
            problems.append(f"expectation names unknown step {index}")
            continue
        result = step_results[index]
        if not result.settled:
            problems.append(f"step {index}: no receipt")
            continue
        if "success" in item and bool(item["success"]) != result.success:
            problems.append(
                f"step {index}: success={result.success} "
                f"(wanted {item['success']}; got {result.return_value!r})")
        if "within_blocks" in item:
            bound = int(item["within_blocks"])
            if result.receipt_height is None:
                problems.append(f"step {index}: receipt not mined")
            elif result.receipt_height - result.height > bound:
                problems.append(
                    f"step {index}: receipt after "
                    f"{result.receipt_height - result.height} blocks "
                    f"(bound {bound})")
    return problems


def run_scenario_file(path: str | Path,
                      keep_simulation: bool = False) -> ScenarioResult:
    return run_scenario(load_scenario(path), keep_simulation=keep_simulation)
