"""Inscription envelope grammar.

Envelopes are canonical JSON objects embedded in the script region of a
transaction output: a protocol tag ``p``, an operation ``op``, and a flat
set of string fields (the receipt ``events`` map is the one nested value,
depth 2).  Parsing is total: malformed bytes map to ``None``, never an
exception.  Serialization is canonical, so parse/serialize round-trips are
byte-exact on canonical payloads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, NamedTuple, Optional


class Protocol(str, Enum):
    BRC20 = "brc-20"
    MIDDLEWARE = "middleware"


class Op(str, Enum):
    DEPLOY = "deploy"
    MINT = "mint"
    TRANSFER = "transfer"
    REGISTRATION = "registration"
    RECEIPT = "receipt"


# Which operations each protocol admits. Off-table pairs are rejected.
VALID_OPS = {
    Protocol.BRC20: frozenset({Op.DEPLOY, Op.MINT, Op.TRANSFER}),
    Protocol.MIDDLEWARE: frozenset({Op.REGISTRATION, Op.RECEIPT}),
}

# Fields that must be present (beyond p/op) for the envelope to be well formed.
REQUIRED_FIELDS = {
    (Protocol.BRC20, Op.DEPLOY): ("tick", "max", "lim"),
    (Protocol.BRC20, Op.MINT): ("tick", "amt"),
    (Protocol.BRC20, Op.TRANSFER): ("tick", "amt"),
    (Protocol.MIDDLEWARE, Op.REGISTRATION): ("tick", "max", "eth_addr"),
    (Protocol.MIDDLEWARE, Op.RECEIPT): ("events",),
}

# Decimal integer strings on the wire, arbitrary precision internally.
NUMERIC_FIELDS = frozenset({"max", "lim", "amt"})

# Canonical emission order for known fields; unknown fields follow in
# their original (insertion) order.
FIELD_ORDER = ("tick", "max", "lim", "amt", "c_addr", "eth_addr", "to", "events")


class EnvelopeError(ValueError):
    """Raised when an envelope violates an invariant; message names the rule."""


@dataclass(frozen=True)
class Envelope:
    """The payload content of an inscription, without chain context."""

    protocol: Protocol
    op: Op
    op_signature: Optional[str] = None
    fields: dict = field(default_factory=dict)
    c_addr: Optional[str] = None

    @property
    def tick(self) -> Optional[str]:
        return self.fields.get("tick")

    def int_field(self, name: str) -> int:
        """Decimal value of a numeric field. Raises KeyError if absent."""
        return int(self.fields[name])

    @property
    def events(self) -> dict[str, tuple[bool, str]]:
        """Parsed receipt events map; empty for non-receipt envelopes."""
        raw = self.fields.get("events") or {}
        return {k: (bool(v[0]), str(v[1])) for k, v in raw.items()}


class OrderingKey(NamedTuple):
    """Total order over inscriptions: timestamp first, block position breaks ties."""

    timestamp: int
    block_height: int
    tx_index: int
    output_index: int


@dataclass(frozen=True)
class Inscription:
    """An envelope plus the chain context of the output that carried it."""

    envelope: Envelope
    inscription_id: str
    value: int
    origin: str
    ordering_key: OrderingKey

    @property
    def protocol(self) -> Protocol:
        return self.envelope.protocol

    @property
    def op(self) -> Op:
        return self.envelope.op

    @property
    def op_signature(self) -> Optional[str]:
        return self.envelope.op_signature

    @property
    def fields(self) -> dict:
        return self.envelope.fields

    @property
    def c_addr(self) -> Optional[str]:
        return self.envelope.c_addr

    @property
    def tick(self) -> Optional[str]:
        return self.envelope.tick


def make_inscription_id(txid: str, output_index: int) -> str:
    return f"{txid}i{output_index}"


def _is_decimal(s: object) -> bool:
    return isinstance(s, str) and len(s) > 0 and all("0" <= c <= "9" for c in s)


def _valid_events(raw: object) -> bool:
    if not isinstance(raw, dict) or not raw:
        return False
    for key, val in raw.items():
        if not isinstance(key, str):
            return False
        if not isinstance(val, list) or len(val) != 2:
            return False
        if not isinstance(val[0], bool) or not isinstance(val[1], str):
            return False
    return True


def parse_inscription(payload: bytes | str | None) -> Optional[Envelope]:
    """Parse one output payload into an envelope, or None if malformed.

    Never raises on bad bytes: any payload that is not a well-formed
    envelope for a known (protocol, op) pair yields None.
    """
    if payload is None:
        return None
    if isinstance(payload, bytes):
        try:
            payload = payload.decode("utf-8")
        except UnicodeDecodeError:
            return None
    try:
        obj = json.loads(payload)
    except (json.JSONDecodeError, RecursionError):
        return None
    if not isinstance(obj, dict):
        return None

    try:
        protocol = Protocol(obj.get("p"))
        op = Op(obj.get("op"))
    except ValueError:
        return None
    if op not in VALID_OPS[protocol]:
        return None

    op_signature = obj.get("op_signature")
    if op_signature is not None and not isinstance(op_signature, str):
        return None
    if op is Op.RECEIPT and op_signature is not None:
        # A receipt forwards events; it carries no operation of its own.
        return None

    c_addr = obj.get("c_addr")
    if c_addr is not None and not isinstance(c_addr, str):
        return None

    fields: dict = {}
    for key, val in obj.items():
        if key in ("p", "op", "op_signature", "c_addr"):
            continue
        if key == "events":
            if not _valid_events(val):
                return None
            fields[key] = {k: [v[0], v[1]] for k, v in val.items()}
            continue
        if not isinstance(key, str) or not isinstance(val, str):
            return None
        if key in NUMERIC_FIELDS and not _is_decimal(val):
            return None
        fields[key] = val

    for name in REQUIRED_FIELDS[(protocol, op)]:
        if name not in fields:
            return None
    if op is Op.REGISTRATION and c_addr is None:
        return None

    return Envelope(protocol=protocol, op=op, op_signature=op_signature,
                    fields=fields, c_addr=c_addr)


def validate_envelope(env: Envelope) -> None:
    """Check all envelope invariants; raise EnvelopeError naming the violated rule."""
    if not isinstance(env.protocol, Protocol) or not isinstance(env.op, Op):
        raise EnvelopeError("unknown protocol or op")
    if env.op not in VALID_OPS[env.protocol]:
        raise EnvelopeError(
            f"op {env.op.value!r} not valid under protocol {env.protocol.value!r}")
    if env.op is Op.RECEIPT and env.op_signature is not None:
        raise EnvelopeError("receipt envelopes carry no op_signature")
    for name in REQUIRED_FIELDS[(env.protocol, env.op)]:
        if name not in env.fields:
            raise EnvelopeError(f"missing required field {name!r}")
    if env.op is Op.REGISTRATION and env.c_addr is None:
        raise EnvelopeError("registration requires c_addr")
    for name in NUMERIC_FIELDS:
        if name in env.fields and not _is_decimal(env.fields[name]):
            raise EnvelopeError(f"field {name!r} must be a decimal integer string")
    if "events" in env.fields and not _valid_events(env.fields["events"]):
        raise EnvelopeError("events must be a non-empty map of id -> [flag, value]")


def serialize_inscription(env: Envelope) -> bytes:
    """Canonical bytes for a valid envelope; inverse of parse_inscription."""
    validate_envelope(env)
    out: dict = {"p": env.protocol.value, "op": env.op.value}
    if env.op_signature is not None:
        out["op_signature"] = env.op_signature
    remaining = dict(env.fields)
    for name in FIELD_ORDER:
        if name == "c_addr":
            if env.c_addr is not None:
                out["c_addr"] = env.c_addr
            continue
        if name in remaining:
            out[name] = remaining.pop(name)
    out.update(remaining)
    return json.dumps(out, separators=(",", ":")).encode("utf-8")


def build_receipt_payload(events: Mapping[str, tuple[bool, str]],
                          c_addr: Optional[str] = None) -> bytes:
    """Receipt envelope attesting per-inscription outcomes.

    Rejects an empty map: a receipt must attest at least one event.
    """
    if not events:
        raise EnvelopeError("a receipt must attest at least one event")
    encoded = {ins_id: [bool(ok), str(ret)] for ins_id, (ok, ret) in events.items()}
    env = Envelope(protocol=Protocol.MIDDLEWARE, op=Op.RECEIPT,
                   fields={"events": encoded}, c_addr=c_addr)
    return serialize_inscription(env)
