"""FastAPI application exposing the simulator.

One-shot endpoints (/run, /scenario, /experiments/*) build a fresh
simulation per request. Sessions hold a live simulation across requests
so a client can faucet, inscribe and mine interactively; they live in
process memory and die with the server.
"""

from __future__ import annotations

import io
import csv as csv_module
import itertools
import json

from fastapi import FastAPI, HTTPException

from .. import __version__, experiments
from ..btcsim import ChainError
from ..codec import parse_inscription
from ..config import ConfigError
from ..evmsim import ContractTemplate, EvmError
from ..scenario import ScenarioError, run_scenario
from ..simulation import (Simulation, build_simulation, run_bridge_workload,
                          submit_inscription)
from . import schemas


def _epoch_models(reports) -> list[schemas.EpochModel]:
    return [
        schemas.EpochModel(
            index=r.index, height=r.height, bundle_size=r.bundle_size,
            committed=r.committed, view=r.view, messages=r.message_count,
            fees_charged=r.fees_charged, fees_credited=r.fees_credited,
            receipts=list(r.receipt_txids),
            penalties={k: int(v) for k, v in r.penalties.items()})
        for r in reports
    ]


def _csv_text(columns, rows) -> str:
    buffer = io.StringIO()
    writer = csv_module.DictWriter(buffer, fieldnames=list(columns))
    writer.writeheader()
    writer.writerows(rows)
    return buffer.getvalue()


def _experiment_response(columns, rows) -> schemas.ExperimentResponse:
    return schemas.ExperimentResponse(columns=list(columns), rows=rows,
                                      csv_text=_csv_text(columns, rows))


class _Session:
    def __init__(self, session_id: str, sim: Simulation):
        self.session_id = session_id
        self.sim = sim
        self.epochs_run = 0

    def info(self) -> schemas.SessionInfo:
        return schemas.SessionInfo(
            session_id=self.session_id,
            config_digest=self.sim.config.digest(),
            tip_height=self.sim.chain.tip_height,
            committee_size=self.sim.validator_set.size(),
            deposit_contract=self.sim.deposit_contract,
            epochs_run=self.epochs_run)


def create_app() -> FastAPI:
    app = FastAPI(title="midastouch", version=__version__)
    sessions: dict[str, _Session] = {}
    session_ids = itertools.count(1)

    def get_session(session_id: str) -> _Session:
        session = sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404,
                                detail=f"no session {session_id!r}")
        return session

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "version": __version__}

    @app.post("/run", response_model=schemas.RunResponse)
    def run(request: schemas.RunRequest) -> schemas.RunResponse:
        try:
            result = run_bridge_workload(request.to_config())
        except ConfigError as err:
            raise HTTPException(status_code=400, detail=str(err)) from err
        summary = result.summary_dict()
        return schemas.RunResponse(
            ok=result.ok, config_digest=summary["config_digest"],
            final_height=summary["final_height"], metrics=summary["metrics"],
            problems=summary["problems"],
            epochs=_epoch_models(result.reports),
            receipt_lines=result.receipt_lines)

    @app.post("/scenario", response_model=schemas.ScenarioResponse)
    def scenario(request: schemas.ScenarioRequest) -> schemas.ScenarioResponse:
        try:
            result = run_scenario(request.to_document())
        except (ScenarioError, ConfigError) as err:
            raise HTTPException(status_code=400, detail=str(err)) from err
        summary = result.summary_dict()
        return schemas.ScenarioResponse(
            name=result.name, ok=result.ok, problems=result.problems,
            metrics=result.metrics, contracts=result.contracts,
            steps=[schemas.StepResultModel(**s) for s in summary["steps"]],
            receipt_lines=result.receipt_lines)

    @app.post("/experiments/scalability",
              response_model=schemas.ExperimentResponse)
    def scalability(request: schemas.ScalabilityRequest):
        rows = experiments.scalability_rows(seed=request.seed,
                                            max_n=request.max_n)
        return _experiment_response(experiments.SCALABILITY_COLUMNS, rows)

    @app.post("/experiments/gas", response_model=schemas.ExperimentResponse)
    def gas(request: schemas.GasSurveyRequest):
        rows = experiments.gas_survey_rows(seed=request.seed)
        return _experiment_response(experiments.GAS_COLUMNS, rows)

    @app.post("/experiments/epsilon",
              response_model=schemas.ExperimentResponse)
    def epsilon(request: schemas.EpsilonSweepRequest):
        try:
            rows = experiments.epsilon_sweep_rows(
                seeds=request.seeds, epsilons=tuple(request.epsilons),
                span=request.span)
        except ValueError as err:
            raise HTTPException(status_code=400, detail=str(err)) from err
        return _experiment_response(experiments.EPSILON_COLUMNS, rows)

    # -- sessions ------------------------------------------------------

    @app.post("/sessions", response_model=schemas.SessionInfo)
    def create_session(request: schemas.SessionCreateRequest):
        try:
            sim = build_simulation(request.config.to_config())
        except ConfigError as err:
            raise HTTPException(status_code=400, detail=str(err)) from err
        session_id = f"s{next(session_ids)}"
        sessions[session_id] = _Session(session_id, sim)
        return sessions[session_id].info()

    @app.get("/sessions", response_model=list[schemas.SessionInfo])
    def list_sessions():
        return [session.info() for session in sessions.values()]

    @app.get("/sessions/{session_id}",
             response_model=schemas.SessionStateResponse)
    def session_state(session_id: str):
        session = get_session(session_id)
        sim = session.sim
        validators = [
            {"eth_addr": r.eth_addr, "btc_addr": r.btc_addr,
             "deposit": r.deposit, "status": r.status.value}
            for r in sim.validator_set.all_records()
        ]
        return schemas.SessionStateResponse(
            info=session.info(), metrics=dict(sim.bridge.metrics),
            problems=sim.bridge.audit(), validators=validators)

    @app.delete("/sessions/{session_id}")
    def delete_session(session_id: str) -> dict:
        get_session(session_id)
        del sessions[session_id]
        return {"deleted": session_id}

    @app.post("/sessions/{session_id}/faucet",
              response_model=schemas.FaucetResponse)
    def faucet(session_id: str, request: schemas.FaucetRequest):
        session = get_session(session_id)
        txid = session.sim.chain.faucet(request.address, request.amount)
        return schemas.FaucetResponse(txid=txid)

    @app.post("/sessions/{session_id}/contracts",
              response_model=schemas.ContractCreateResponse)
    def create_contract(session_id: str,
                        request: schemas.ContractCreateRequest):
        session = get_session(session_id)
        try:
            template = ContractTemplate(request.template)
        except ValueError as err:
            raise HTTPException(status_code=400,
                                detail=f"unknown template "
                                       f"{request.template!r}") from err
        c_addr = session.sim.evm.deploy_contract(template, request.owner)
        return schemas.ContractCreateResponse(c_addr=c_addr,
                                              template=template.value)

    @app.get("/sessions/{session_id}/contracts",
             response_model=list[schemas.ContractInfo])
    def list_contracts(session_id: str):
        session = get_session(session_id)
        out = []
        for account in session.sim.evm.contracts():
            out.append(schemas.ContractInfo(
                c_addr=account.c_addr, template=account.template.value,
                owner=account.owner,
                interfaces=sorted(account.interfaces),
                event_count=len(account.events),
                storage=session.sim.evm.get_state(account.c_addr),
                balance_map=session.sim.evm.get_balance(account.c_addr)))
        return out

    @app.post("/sessions/{session_id}/inscriptions",
              response_model=schemas.InscriptionResponse)
    def inscribe(session_id: str, request: schemas.InscriptionRequest):
        session = get_session(session_id)
        envelope = parse_inscription(json.dumps(request.envelope))
        if envelope is None:
            raise HTTPException(status_code=400,
                                detail="envelope is not well formed")
        try:
            inscription_id = submit_inscription(
                session.sim.chain, request.sender, envelope, request.value)
        except ChainError as err:
            raise HTTPException(status_code=400, detail=str(err)) from err
        txid = inscription_id.rsplit("i", 1)[0]
        return schemas.InscriptionResponse(inscription_id=inscription_id,
                                           txid=txid)

    @app.post("/sessions/{session_id}/blocks",
              response_model=schemas.MineResponse)
    def mine(session_id: str, request: schemas.MineRequest):
        session = get_session(session_id)
        reports = []
        try:
            for _ in range(request.count):
                _, produced = session.sim.bridge.step()
                reports.extend(produced)
        except EvmError as err:
            raise HTTPException(status_code=500, detail=str(err)) from err
        session.epochs_run += len(reports)
        return schemas.MineResponse(tip_height=session.sim.chain.tip_height,
                                    epochs=_epoch_models(reports))

    @app.get("/sessions/{session_id}/receipts",
             response_model=list[schemas.ReceiptEntry])
    def receipts(session_id: str):
        session = get_session(session_id)
        return [schemas.ReceiptEntry(**json.loads(line))
                for line in session.sim.bridge.receipt_log_lines()]

    return app
