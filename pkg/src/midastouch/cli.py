"""Command line front end.

Every subcommand is a thin client of the HTTP service: by default the
app is mounted in-process, with --server pointing the same calls at a
remote instance. Exit status is 0 for a sound run, 1 when invariants or
expectations were violated, 2 for usage and transport errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import httpx

from .config import ConfigError, RunConfig

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_USAGE = 2


def _client(server: str | None) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=600.0)
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        from fastapi.testclient import TestClient

    from .service import create_app
    return TestClient(create_app())


def _post(client: httpx.Client, path: str, payload: dict) -> dict:
    response = client.post(path, json=payload)
    if response.status_code != 200:
        try:
            detail = response.json().get("detail", response.text)
        except ValueError:
            detail = response.text
        raise SystemExit(f"error: {path} -> {response.status_code}: {detail}")
    return response.json()


def _load_fault_plan(raw: str | None) -> dict:
    if not raw:
        return {}
    path = Path(raw)
    try:
        text = path.read_text() if path.exists() else raw
        plan = json.loads(text)
    except (OSError, json.JSONDecodeError) as err:
        raise SystemExit(f"error: bad fault plan {raw!r}: {err}")
    if not isinstance(plan, dict):
        raise SystemExit("error: fault plan must be a JSON object")
    return plan


def _write_json(path: str | None, payload: dict) -> None:
    if path:
        Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True)
                              + "\n")


def _write_receipts(path: str | None, lines: list[str]) -> None:
    if path:
        Path(path).write_text("".join(line + "\n" for line in lines))


def cmd_run(args: argparse.Namespace) -> int:
    payload: dict = {}
    if args.config:
        try:
            payload = RunConfig.from_file(args.config).to_dict()
        except ConfigError as err:
            raise SystemExit(f"error: {err}")
    overrides = {
        "seed": args.seed,
        "epsilon": args.epsilon,
        "committee_size": args.committee_size,
        "fee_rate": args.fee_rate,
        "blocks": args.blocks,
        "workload": args.workload,
    }
    payload.update({k: v for k, v in overrides.items() if v is not None})
    if args.fault_plan:
        payload["fault_plan"] = _load_fault_plan(args.fault_plan)

    with _client(args.server) as client:
        body = _post(client, "/run", payload)

    print(f"run {body['config_digest']}: height {body['final_height']}, "
          f"{len(body['epochs'])} epochs, "
          f"{body['metrics']['receipts_published']} receipts, "
          f"{body['metrics']['messages_total']} messages")
    for line in body["problems"]:
        print(f"violation: {line}")
    _write_json(args.out, body)
    _write_receipts(args.receipts, body["receipt_lines"])
    return EXIT_OK if body["ok"] else EXIT_VIOLATION


def cmd_experiment(args: argparse.Namespace) -> int:
    if args.kind == "scalability":
        path = "/experiments/scalability"
        payload: dict = {"seed": args.seed or 0, "max_n": args.max_n}
    elif args.kind == "gas":
        path = "/experiments/gas"
        payload = {"seed": args.seed or 0}
    else:
        try:
            seeds = [int(s) for s in args.seeds.split(",") if s != ""]
        except ValueError:
            raise SystemExit(f"error: bad --seeds {args.seeds!r}")
        path = "/experiments/epsilon"
        payload = {"seeds": seeds}

    with _client(args.server) as client:
        body = _post(client, path, payload)

    out = Path(args.out)
    if out.parent and not out.parent.exists():
        out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(body["csv_text"])
    print(f"{args.kind}: {len(body['rows'])} rows -> {out}")
    return EXIT_OK


def cmd_scenario(args: argparse.Namespace) -> int:
    try:
        document = json.loads(Path(args.file).read_text())
    except (OSError, json.JSONDecodeError) as err:
        raise SystemExit(f"error: cannot load scenario {args.file}: {err}")

    with _client(args.server) as client:
        body = _post(client, "/scenario", document)

    status = "ok" if body["ok"] else "FAILED"
    print(f"scenario {body['name']!r}: {status}, "
          f"{len(body['steps'])} steps, "
          f"{body['metrics']['receipts_published']} receipts")
    for step in body["steps"]:
        mark = "+" if step["success"] else "-"
        print(f"  {mark} h{step['height']} {step['inscription_id'][:20]}... "
              f"{step['return_value']}")
    for line in body["problems"]:
        print(f"violation: {line}")
    _write_json(args.out, body)
    _write_receipts(args.receipts, body["receipt_lines"])
    return EXIT_OK if body["ok"] else EXIT_VIOLATION


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app
    uvicorn.run(create_app(), host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="midastouch",
        description="inscription-driven contract middleware simulator")
    parser.add_argument("--server", metavar="URL",
                        help="talk to a running service instead of in-process")
    commands = parser.add_subparsers(dest="command", required=True)

    run_p = commands.add_parser("run", help="drive a configured bridge run")
    run_p.add_argument("--config", metavar="FILE", help="JSON run config")
    run_p.add_argument("--seed", type=int)
    run_p.add_argument("--epsilon", type=int, help="epoch length in blocks")
    run_p.add_argument("--committee-size", type=int, dest="committee_size")
    run_p.add_argument("--fee-rate", type=float, dest="fee_rate")
    run_p.add_argument("--fault-plan", dest="fault_plan", metavar="JSON",
                       help="JSON file or literal mapping validator -> mode")
    run_p.add_argument("--blocks", type=int)
    run_p.add_argument("--workload", choices=["none", "token", "mixed"])
    run_p.add_argument("--out", metavar="FILE", help="write full result JSON")
    run_p.add_argument("--receipts", metavar="FILE",
                       help="write receipt log lines")
    run_p.set_defaults(func=cmd_run)

    exp_p = commands.add_parser("experiment", help="produce measurement CSVs")
    exp_p.add_argument("kind", choices=["scalability", "gas", "epsilon"])
    exp_p.add_argument("--out", required=True, metavar="CSV")
    exp_p.add_argument("--seed", type=int)
    exp_p.add_argument("--max-n", type=int, default=20, dest="max_n")
    exp_p.add_argument("--seeds", default="0,1,2,3,4,5,6,7,8,9",
                       help="comma separated seeds for the epsilon sweep")
    exp_p.set_defaults(func=cmd_experiment)

    scen_p = commands.add_parser("scenario", help="run a scenario file")
    scen_p.add_argument("file", metavar="FILE")
    scen_p.add_argument("--out", metavar="FILE", help="write result JSON")
    scen_p.add_argument("--receipts", metavar="FILE",
                        help="write receipt log lines")
    scen_p.set_defaults(func=cmd_scenario)

    serve_p = commands.add_parser("serve", help="run the HTTP service")
    serve_p.add_argument("--host", default="127.0.0.1")
    serve_p.add_argument("--port", type=int, default=8000)
    serve_p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SystemExit as err:
        if isinstance(err.code, str):
            print(err.code, file=sys.stderr)
            return EXIT_USAGE
        raise
    except httpx.HTTPError as err:
        print(f"error: transport failure: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
