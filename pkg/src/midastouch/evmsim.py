"""Simulated account-based contract platform.

Contracts are organized by functionality template, each with a fixed
interface table and a gas cost from the schedule. All state mutation goes
through ``invoke`` behind a quorum check; the one sanctioned exception is
the validator's own deposit into a Deposit contract, which happens before
any committee exists.

Per-contract execution is serialized (one event sequence per contract);
distinct contracts are independent state islands.
"""

from __future__ import annotations

import copy
import hashlib
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

from . import brc20
from .signing import QuorumProof


class EvmError(Exception):
    pass


class UnknownContract(EvmError):
    pass


class UnknownTemplate(EvmError):
    pass


class NoSuchInterface(EvmError):
    pass


class QuorumNotMet(EvmError):
    pass


class WrongTemplate(EvmError):
    pass


class TemplateFailure(Exception):
    """Internal: a template-level failure, recorded as a success=false event."""


class ContractTemplate(str, Enum):
    DEPOSIT = "Deposit"
    FT = "FT"
    STABLECOIN = "Stablecoin"
    NFT = "NFT"
    INSURANCE = "Insurance"
    LOAN = "Loan"
    AUCTION = "Auction"
    DAO = "DAO"


# Interface tables. "deploy" doubles as the generic instantiation entry for
# every non-Deposit template, so it can be reached from an inscription; the
# remaining names are reachable through direct invocation.
TEMPLATE_INTERFACES = {
    ContractTemplate.DEPOSIT: ("registration",),
    ContractTemplate.FT: ("deploy", "mint", "transfer"),
    ContractTemplate.STABLECOIN: ("deploy", "mint", "transfer", "peg"),
    ContractTemplate.NFT: ("deploy", "mint", "transfer"),
    ContractTemplate.INSURANCE: ("deploy", "policy", "claim"),
    ContractTemplate.LOAN: ("deploy", "borrow", "repay"),
    ContractTemplate.AUCTION: ("deploy", "bid", "settle"),
    ContractTemplate.DAO: ("deploy", "propose", "vote"),
}

DEFAULT_GAS_COSTS = {
    ContractTemplate.DEPOSIT: 30,
    ContractTemplate.FT: 21,
    ContractTemplate.STABLECOIN: 34,
    ContractTemplate.NFT: 55,
    ContractTemplate.LOAN: 68,
    ContractTemplate.AUCTION: 80,
    ContractTemplate.INSURANCE: 92,
    ContractTemplate.DAO: 120,
}


@dataclass(frozen=True)
class GasSchedule:
    """Abstract gas units per template plus the bridge fee fraction."""

    base_costs: dict = field(default_factory=lambda: dict(DEFAULT_GAS_COSTS))
    fee_rate: float = 0.05

    def validate(self) -> None:
        c = self.base_costs
        t = ContractTemplate
        ok = (c[t.FT] < c[t.STABLECOIN] < c[t.NFT] <= c[t.LOAN] <= c[t.AUCTION]
              < c[t.INSURANCE] <= c[t.DAO])
        if not ok:
            raise ValueError("gas costs must respect the template complexity order")
        if not 0 <= self.fee_rate < 1:
            raise ValueError("fee rate must lie in [0, 1)")

    def cost(self, template: ContractTemplate) -> int:
        return self.base_costs[template]


@dataclass(frozen=True)
class Event:
    inscription_id: str
    success: bool
    return_value: str
    gas_used: int
    seq: int


@dataclass
class ContractAccount:
    c_addr: str
    template: ContractTemplate
    owner: str
    interfaces: dict  # name -> signature text
    storage: dict
    balance_map: dict = field(default_factory=dict)  # btc_addr -> tick -> amount
    events: list = field(default_factory=list)
    next_seq: int = 1

    def get_interfaces(self) -> set[str]:
        return set(self.interfaces)


def _signature_text(name: str) -> str:
    return f"{name}(...) return (...)"


def interface_name(func_signature: str) -> str:
    """Leading identifier of a signature text: 'deploy(...) return (...)' -> 'deploy'."""
    return func_signature.split("(", 1)[0].strip()


def _init_storage(template: ContractTemplate) -> dict:
    if template is ContractTemplate.DEPOSIT:
        return {"validators": {}}
    if template in (ContractTemplate.FT, ContractTemplate.STABLECOIN):
        store: dict = {"registry": {}}
        if template is ContractTemplate.STABLECOIN:
            store["pegs"] = {}
        return store
    if template is ContractTemplate.NFT:
        return {"collections": {}}
    if template is ContractTemplate.INSURANCE:
        return {"products": {}, "policies": 0, "claims": 0}
    if template is ContractTemplate.LOAN:
        return {"products": {}, "loans": {}}
    if template is ContractTemplate.AUCTION:
        return {"auctions": {}}
    if template is ContractTemplate.DAO:
        return {"spaces": {}}
    raise UnknownTemplate(str(template))


def _require(args: dict, *names: str) -> list:
    vals = []
    for name in names:
        if name not in args or args[name] is None:
            raise TemplateFailure(f"MissingField:{name}")
        vals.append(args[name])
    return vals


def _as_amount(raw) -> int:
    try:
        value = int(raw)
    except (TypeError, ValueError):
        raise TemplateFailure("BadAmount") from None
    if value < 0:
        raise TemplateFailure("BadAmount")
    return value


class EvmSim:
    """Registry of simulated contracts with quorum-gated dispatch."""

    def __init__(self, gas_schedule: Optional[GasSchedule] = None,
                 quorum_verifier: Optional[Callable[[QuorumProof], bool]] = None):
        self.gas_schedule = gas_schedule or GasSchedule()
        self.gas_schedule.validate()
        self._quorum_verifier = quorum_verifier
        self._contracts: dict[str, ContractAccount] = {}
        self._deploy_count = 0

    def set_quorum_verifier(self, verifier: Callable[[QuorumProof], bool]) -> None:
        self._quorum_verifier = verifier

    # -- registry ------------------------------------------------------

    def deploy_contract(self, template: ContractTemplate, owner: str) -> str:
        if not isinstance(template, ContractTemplate):
            raise UnknownTemplate(str(template))
        self._deploy_count += 1
        seed = f"{template.value}:{owner}:{self._deploy_count}"
        c_addr = "0x" + hashlib.sha256(seed.encode()).hexdigest()[:40]
        account = ContractAccount(
            c_addr=c_addr,
            template=template,
            owner=owner,
            interfaces={n: _signature_text(n) for n in TEMPLATE_INTERFACES[template]},
            storage=_init_storage(template),
        )
        self._contracts[c_addr] = account
        return c_addr

    def contract(self, c_addr: str) -> ContractAccount:
        try:
            return self._contracts[c_addr]
        except KeyError:
            raise UnknownContract(c_addr) from None

    def has_contract(self, c_addr: str) -> bool:
        return c_addr in self._contracts

    def contracts(self) -> list[ContractAccount]:
        return list(self._contracts.values())

    def get_state(self, c_addr: str) -> dict:
        return copy.deepcopy(self.contract(c_addr).storage)

    def get_balance(self, c_addr: str) -> dict:
        return copy.deepcopy(self.contract(c_addr).balance_map)

    # -- execution -----------------------------------------------------

    def invoke(self, c_addr: str, func_signature: str, args: dict,
               quorum_proof: QuorumProof) -> Event:
        """Run one interface function under multi-signature validation.

        Template-level failures are not exceptions: they are recorded
        outcomes (success=false events). Only dispatch and quorum problems
        raise.
        """
        account = self.contract(c_addr)
        name = interface_name(func_signature)
        if name not in account.interfaces:
            raise NoSuchInterface(f"{name!r} not in {sorted(account.interfaces)}")
        if self._quorum_verifier is None or not self._quorum_verifier(quorum_proof):
            raise QuorumNotMet(f"invoke of {name!r} on {c_addr}")
        gas = self.gas_schedule.cost(account.template)
        inscription_id = args.get("inscription_id", "")
        try:
            ret = self._execute(account, name, args)
            return self._append_event(account, inscription_id, True, ret, gas)
        except TemplateFailure as fail:
            return self._append_event(account, inscription_id, False, str(fail), gas)

    def record_rejection(self, c_addr: str, inscription_id: str, reason: str) -> Event:
        """Record a dispatch-level failure (no execution, no gas) as an event."""
        account = self.contract(c_addr)
        return self._append_event(account, inscription_id, False, reason, 0)

    def register_validator_onchain(self, deposit_contract: str, eth_addr: str,
                                   btc_addr: str, deposit: int) -> Event:
        """Direct deposit by a would-be validator; the pre-committee bootstrap path."""
        account = self.contract(deposit_contract)
        if account.template is not ContractTemplate.DEPOSIT:
            raise WrongTemplate(f"{deposit_contract} is {account.template.value}")
        gas = self.gas_schedule.cost(account.template)
        ref = f"deposit:{eth_addr}"
        validators = account.storage["validators"]
        if eth_addr in validators:
            return self._append_event(account, ref, False, "AlreadyRegistered", gas)
        validators[eth_addr] = {"btc_addr": btc_addr, "deposit": int(deposit)}
        return self._append_event(account, ref, True, f"registered {eth_addr}", gas)

    def get_deposit(self, deposit_contract: str, eth_addr: str) -> int:
        account = self.contract(deposit_contract)
        if account.template is not ContractTemplate.DEPOSIT:
            raise WrongTemplate(f"{deposit_contract} is {account.template.value}")
        entry = account.storage["validators"].get(eth_addr)
        return int(entry["deposit"]) if entry else 0

    def credit_fee(self, c_addr: str, btc_addr: str, tick: str, amount: int) -> None:
        """Add a validator's fee share to the contract's address balance map."""
        account = self.contract(c_addr)
        per_addr = account.balance_map.setdefault(btc_addr, {})
        per_addr[tick] = per_addr.get(tick, 0) + amount

    def emitted_events(self, c_addr: str, since_seq: int = 0) -> list[Event]:
        return [e for e in self.contract(c_addr).events if e.seq > since_seq]

    def _append_event(self, account: ContractAccount, inscription_id: str,
                      success: bool, return_value: str, gas: int) -> Event:
        event = Event(inscription_id=inscription_id, success=success,
                      return_value=return_value, gas_used=gas, seq=account.next_seq)
        account.next_seq += 1
        account.events.append(event)
        return event

    # -- template logic ------------------------------------------------

    def _execute(self, account: ContractAccount, name: str, args: dict) -> str:
        template = account.template
        if template is ContractTemplate.DEPOSIT:
            return self._run_deposit(account, name, args)
        if template in (ContractTemplate.FT, ContractTemplate.STABLECOIN):
            return self._run_token(account, name, args)
        if template is ContractTemplate.NFT:
            return self._run_nft(account, name, args)
        return self._run_stub(account, name, args)

    def _run_deposit(self, account: ContractAccount, name: str, args: dict) -> str:
        eth_addr, = _require(args, "eth_addr")
        validators = account.storage["validators"]
        if eth_addr in validators:
            raise TemplateFailure("AlreadyRegistered")
        validators[eth_addr] = {"btc_addr": args.get("origin", ""), "deposit": 0}
        return f"registered {eth_addr}"

    def _run_token(self, account: ContractAccount, name: str, args: dict) -> str:
        registry = account.storage["registry"]
        try:
            if name == "deploy":
                tick, max_s, lim = _require(args, "tick", "max", "lim")
                account.storage["registry"] = brc20.apply_deploy(
                    registry, tick, _as_amount(max_s), _as_amount(lim))
                return f"deployed {tick}"
            if name == "mint":
                tick, amt = _require(args, "tick", "amt")
                account.storage["registry"] = brc20.apply_mint(
                    registry, tick, args.get("origin", ""), _as_amount(amt))
                return f"minted {amt} {tick}"
            if name == "transfer":
                tick, amt, to = _require(args, "tick", "amt", "to")
                account.storage["registry"] = brc20.apply_transfer(
                    registry, tick, args.get("origin", ""), to, _as_amount(amt))
                return f"transferred {amt} {tick}"
            if name == "peg":
                tick, target = _require(args, "tick", "to")
                if tick not in registry:
                    raise TemplateFailure("UnknownTick")
                account.storage["pegs"][tick] = target
                return f"pegged {tick} to {target}"
        except brc20.Brc20Error as err:
            raise TemplateFailure(type(err).__name__) from err
        raise TemplateFailure(f"Unhandled:{name}")

    def _run_nft(self, account: ContractAccount, name: str, args: dict) -> str:
        collections = account.storage["collections"]
        if name == "deploy":
            tick, max_s = _require(args, "tick", "max")
            if tick in collections:
                raise TemplateFailure("DuplicateTick")
            collections[tick] = {"max_items": _as_amount(max_s), "next_id": 1,
                                 "owners": {}}
            return f"deployed {tick}"
        tick, = _require(args, "tick")
        if tick not in collections:
            raise TemplateFailure("UnknownTick")
        coll = collections[tick]
        if name == "mint":
            if coll["next_id"] > coll["max_items"]:
                raise TemplateFailure("ExceedsMaxSupply")
            item = coll["next_id"]
            coll["next_id"] += 1
            coll["owners"][str(item)] = args.get("origin", "")
            return f"minted {tick}#{item}"
        if name == "transfer":
            amt, to = _require(args, "amt", "to")
            item = str(_as_amount(amt))
            if coll["owners"].get(item) != args.get("origin", ""):
                raise TemplateFailure("NotOwner")
            coll["owners"][item] = to
            return f"transferred {tick}#{item}"
        raise TemplateFailure(f"Unhandled:{name}")

    def _run_stub(self, account: ContractAccount, name: str, args: dict) -> str:
        """Counters and maps for the non-token templates; enough to consume gas."""
        store = account.storage
        template = account.template
        if name == "deploy":
            key = {"Insurance": "products", "Loan": "products",
                   "Auction": "auctions", "DAO": "spaces"}[template.value]
            tick, = _require(args, "tick")
            if tick in store[key]:
                raise TemplateFailure("DuplicateTick")
            store[key][tick] = {"created_by": args.get("origin", "")}
            if template is ContractTemplate.AUCTION:
                store[key][tick]["bids"] = {}
            if template is ContractTemplate.DAO:
                store[key][tick]["yes"] = 0
                store[key][tick]["no"] = 0
            return f"deployed {tick}"
        if template is ContractTemplate.INSURANCE:
            if name == "policy":
                store["policies"] += 1
                return f"policy #{store['policies']}"
            if name == "claim":
                if store["policies"] <= store["claims"]:
                    raise TemplateFailure("NoOpenPolicy")
                store["claims"] += 1
                return f"claim #{store['claims']}"
        if template is ContractTemplate.LOAN:
            origin = args.get("origin", "")
            if name == "borrow":
                amt = _as_amount(_require(args, "amt")[0])
                store["loans"][origin] = store["loans"].get(origin, 0) + amt
                return f"borrowed {amt}"
            if name == "repay":
                amt = _as_amount(_require(args, "amt")[0])
                owed = store["loans"].get(origin, 0)
                if amt > owed:
                    raise TemplateFailure("Overpayment")
                store["loans"][origin] = owed - amt
                return f"repaid {amt}"
        if template is ContractTemplate.AUCTION:
            tick, = _require(args, "tick")
            if tick not in store["auctions"]:
                raise TemplateFailure("UnknownTick")
            auction = store["auctions"][tick]
            if name == "bid":
                amt = _as_amount(_require(args, "amt")[0])
                origin = args.get("origin", "")
                auction["bids"][origin] = max(auction["bids"].get(origin, 0), amt)
                return f"bid {amt}"
            if name == "settle":
                if not auction["bids"]:
                    raise TemplateFailure("NoBids")
                winner = max(sorted(auction["bids"]), key=lambda a: auction["bids"][a])
                auction["winner"] = winner
                return f"settled to {winner}"
        if template is ContractTemplate.DAO:
            tick, = _require(args, "tick")
            if tick not in store["spaces"]:
                raise TemplateFailure("UnknownTick")
            space = store["spaces"][tick]
            if name == "propose":
                space["yes"] = 0
                space["no"] = 0
                return f"proposal open in {tick}"
            if name == "vote":
                choice = args.get("to", "yes")
                if choice not in ("yes", "no"):
                    raise TemplateFailure("BadVote")
                space[choice] += 1
                return f"voted {choice}"
        raise TemplateFailure(f"Unhandled:{name}")
