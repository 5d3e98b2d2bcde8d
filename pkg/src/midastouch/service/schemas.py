"""Request and response models for the HTTP service."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field

from ..config import RunConfig

FaultModeName = Literal["honest", "silent", "equivocating"]


class RunRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    seed: int = Field(default=0, ge=0)
    epsilon: int = Field(default=6, ge=1)
    committee_size: int = Field(default=4, ge=0)
    deposit: int = Field(default=32, ge=0)
    deposit_threshold: int = Field(default=32, ge=1)
    penalty_rate: float = Field(default=0.5, gt=0, le=1)
    fee_rate: float = Field(default=0.05, ge=0, lt=1)
    finality_depth: int = Field(default=6, ge=1)
    block_interval: int = Field(default=600, ge=1)
    blocks: int = Field(default=40, ge=0)
    workload: Literal["none", "token", "mixed"] = "token"
    fault_plan: dict[str, FaultModeName] = Field(default_factory=dict)
    min_committee_size: int = Field(default=4, ge=1)
    max_views_per_epoch: int = Field(default=16, ge=1)

    def to_config(self) -> RunConfig:
        return RunConfig.from_dict(self.model_dump())


class EpochModel(BaseModel):
    index: int
    height: int
    bundle_size: int
    committed: bool
    view: int
    messages: int
    fees_charged: int
    fees_credited: int
    receipts: list[str]
    penalties: dict[str, int]


class RunResponse(BaseModel):
    ok: bool
    config_digest: str
    final_height: int
    metrics: dict[str, int]
    problems: list[str]
    epochs: list[EpochModel]
    receipt_lines: list[str]


class ContractSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    label: str
    template: str
    owner: str = "network"


class UserSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str
    address: Optional[str] = None
    funding: int = Field(default=1_000_000, ge=0)


class CommitteeMemberSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    eth_addr: Optional[str] = None
    btc_addr: Optional[str] = None
    deposit: Optional[int] = None


class StepSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    height: int = Field(ge=1)
    sender: str = Field(alias="from")
    contract: Optional[str] = None
    c_addr: Optional[str] = None
    value: int = Field(default=546, ge=0)
    envelope: dict


class ReceiptExpectSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    step: int
    success: Optional[bool] = None
    within_blocks: Optional[int] = None


class ExpectSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    stall: bool = False
    receipts: list[ReceiptExpectSpec] = Field(default_factory=list)


class ScenarioRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str = "unnamed"
    config: dict = Field(default_factory=dict)
    contracts: list[ContractSpec] = Field(default_factory=list)
    users: list[UserSpec] = Field(default_factory=list)
    committee: list[CommitteeMemberSpec] = Field(default_factory=list)
    steps: list[StepSpec] = Field(default_factory=list)
    run_until_height: int = Field(ge=1)
    expect: Optional[ExpectSpec] = None

    def to_document(self) -> dict:
        doc: dict = {
            "name": self.name,
            "config": dict(self.config),
            "contracts": [c.model_dump() for c in self.contracts],
            "users": [u.model_dump(exclude_none=True) for u in self.users],
            "committee": [m.model_dump(exclude_none=True)
                          for m in self.committee],
            "steps": [],
            "run_until_height": self.run_until_height,
        }
        for step in self.steps:
            body = step.model_dump(by_alias=True, exclude_none=True)
            doc["steps"].append(body)
        if self.expect is not None:
            doc["expect"] = self.expect.model_dump(exclude_none=True)
        return doc


class StepResultModel(BaseModel):
    height: int
    inscription_id: str
    settled: bool
    success: Optional[bool]
    return_value: Optional[str]
    receipt_txid: Optional[str]
    receipt_height: Optional[int]


class ScenarioResponse(BaseModel):
    name: str
    ok: bool
    problems: list[str]
    metrics: dict[str, int]
    contracts: dict[str, str]
    steps: list[StepResultModel]
    receipt_lines: list[str]


class ScalabilityRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    seed: int = Field(default=0, ge=0)
    max_n: int = Field(default=20, ge=1, le=64)


class GasSurveyRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    seed: int = Field(default=0, ge=0)


class EpsilonSweepRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    seeds: list[int] = Field(default_factory=lambda: list(range(10)))
    epsilons: list[int] = Field(default_factory=lambda: [1, 2, 5, 10, 20])
    span: int = Field(default=500, ge=20)


class ExperimentResponse(BaseModel):
    columns: list[str]
    rows: list[dict]
    csv_text: str


class SessionCreateRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    config: RunRequest = Field(default_factory=RunRequest)


class SessionInfo(BaseModel):
    session_id: str
    config_digest: str
    tip_height: int
    committee_size: int
    deposit_contract: str
    epochs_run: int


class FaucetRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    address: str
    amount: int = Field(ge=1)


class FaucetResponse(BaseModel):
    txid: str


class ContractCreateRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    template: str
    owner: str = "network"


class ContractCreateResponse(BaseModel):
    c_addr: str
    template: str


class ContractInfo(BaseModel):
    c_addr: str
    template: str
    owner: str
    interfaces: list[str]
    event_count: int
    storage: dict
    balance_map: dict


class InscriptionRequest(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    sender: str = Field(alias="from")
    value: int = Field(default=546, ge=0)
    envelope: dict


class InscriptionResponse(BaseModel):
    inscription_id: str
    txid: str


class MineRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    count: int = Field(default=1, ge=1, le=10_000)


class MineResponse(BaseModel):
    tip_height: int
    epochs: list[EpochModel]


class ReceiptEntry(BaseModel):
    epoch: int
    submitted_at_height: int
    txid: str
    c_addr: str
    events: dict[str, list]


class SessionStateResponse(BaseModel):
    info: SessionInfo
    metrics: dict[str, int]
    problems: list[str]
    validators: list[dict]
