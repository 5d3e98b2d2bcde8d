"""Validator committee: registration, three-phase agreement, slashing.

The committee agrees on inscription bundles with a pre-prepare / prepare /
commit exchange. Replicas re-broadcast the pre-prepare once on first
acceptance, so each of the three phases costs one message from every
validator to every other validator and a committed fault-free round totals
3*n*(n-1) sends.

Every validator scans the same simulated chain, so each one knows the
digest it is willing to accept before the round starts; a leader proposing
anything else is ignored and rotated out by view change. Committees below
the minimum size degrade to a single central signer and exchange no
messages at all.

Equivocation is judged from the bus log after the fact: two validly signed
messages from one sender for the same phase, view, and sequence with
different digests. Offenders lose a fixed fraction of their deposit and
drop out of future committees once below the threshold.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Callable, Optional

from .bus import Delivery, MessageBus
from .signing import QuorumProof, derive_secret, sign, verify

logger = logging.getLogger(__name__)


class CommitteeError(Exception):
    pass


class DuplicateValidator(CommitteeError):
    pass


class InsufficientDeposit(CommitteeError):
    pass


class ValidatorStatus(str, Enum):
    ACTIVE = "active"
    SLASHED = "slashed"


class FaultMode(str, Enum):
    HONEST = "honest"
    SILENT = "silent"
    EQUIVOCATING = "equivocating"


class Phase(str, Enum):
    PRE_PREPARE = "pre-prepare"
    PREPARE = "prepare"
    COMMIT = "commit"


def fault_threshold(n: int) -> int:
    return (n - 1) // 3


def quorum_size(n: int) -> int:
    return 2 * fault_threshold(n) + 1


@dataclass(frozen=True)
class CommitteeConfig:
    deposit_threshold: int = 32
    penalty_rate: float = 0.5
    min_committee_size: int = 4
    max_views_per_epoch: int = 16

    def validate(self) -> None:
        if self.deposit_threshold <= 0:
            raise ValueError("deposit threshold must be positive")
        if not 0 < self.penalty_rate <= 1:
            raise ValueError("penalty rate must lie in (0, 1]")


@dataclass
class ValidatorRecord:
    eth_addr: str
    btc_addr: str
    deposit: int
    status: ValidatorStatus = ValidatorStatus.ACTIVE
    secret: bytes = b""

    def __post_init__(self):
        if not self.secret:
            self.secret = derive_secret(self.btc_addr, self.eth_addr)


class ValidatorSet:
    """Registration-ordered roster with deposit accounting."""

    def __init__(self, config: Optional[CommitteeConfig] = None):
        self.config = config or CommitteeConfig()
        self.config.validate()
        self._records: dict[str, ValidatorRecord] = {}

    def register(self, eth_addr: str, btc_addr: str, deposit: int) -> ValidatorRecord:
        if eth_addr in self._records:
            raise DuplicateValidator(eth_addr)
        if deposit < self.config.deposit_threshold:
            raise InsufficientDeposit(
                f"{deposit} < {self.config.deposit_threshold}")
        record = ValidatorRecord(eth_addr=eth_addr, btc_addr=btc_addr,
                                 deposit=int(deposit))
        self._records[eth_addr] = record
        return record

    def get(self, eth_addr: str) -> Optional[ValidatorRecord]:
        return self._records.get(eth_addr)

    def all_records(self) -> list[ValidatorRecord]:
        return list(self._records.values())

    def active(self) -> list[ValidatorRecord]:
        return [r for r in self._records.values()
                if r.status is ValidatorStatus.ACTIVE]

    def size(self) -> int:
        return len(self.active())

    def is_central_mode(self) -> bool:
        return self.size() < self.config.min_committee_size

    def quorum_size(self) -> int:
        if self.is_central_mode():
            return 1
        return quorum_size(self.size())

    def secrets(self) -> dict[str, bytes]:
        return {r.eth_addr: r.secret for r in self._records.values()}

    def slash(self, eth_addr: str) -> int:
        """Deduct the penalty fraction; eject when below the threshold."""
        record = self._records[eth_addr]
        if record.status is not ValidatorStatus.ACTIVE:
            return 0
        penalty = int(Fraction(str(self.config.penalty_rate)) * record.deposit)
        record.deposit -= penalty
        if record.deposit < self.config.deposit_threshold:
            record.status = ValidatorStatus.SLASHED
        logger.info("slashed %s by %d, deposit now %d (%s)", eth_addr, penalty,
                    record.deposit, record.status.value)
        return penalty


@dataclass(frozen=True)
class ConsensusMessage:
    phase: Phase
    view: int
    sequence: int
    digest: str
    sender: str
    signature: str
    bundle: Optional[tuple] = None

    def signing_payload(self) -> str:
        return f"{self.phase.value}|{self.view}|{self.sequence}|{self.digest}"


@dataclass(frozen=True)
class RoundOutcome:
    view: int
    digest: str
    committed: bool
    deciders: tuple
    message_count: int
    total_message_count: int
    views_used: int


@dataclass(frozen=True)
class EquivocationEvidence:
    offender: str
    view: int
    sequence: int
    phase: Phase
    digest_a: str
    digest_b: str


@dataclass
class _NodeState:
    accepted: Optional[str] = None
    echoed: bool = False
    prepared: bool = False
    committed: bool = False
    decided: Optional[str] = None
    prepare_votes: dict = field(default_factory=dict)  # digest -> set of senders
    commit_votes: dict = field(default_factory=dict)


def _tampered_digest(digest: str) -> str:
    return hashlib.sha256(f"forged:{digest}".encode()).hexdigest()


def _tampered_bundle(proposal: tuple) -> tuple:
    if len(proposal) > 1:
        return tuple(reversed(proposal))
    return proposal + ("forged",)


class ConsensusEngine:
    """Drives agreement rounds for one committee over a shared bus.

    The engine simulates every validator in-process. Fault modes: a silent
    validator has all outbound traffic dropped by the bus; an equivocating
    one alternates between the canonical digest and a forged one per
    recipient, in every phase, leaving signed contradictions in the log.
    """

    def __init__(self, validators: list[ValidatorRecord], bus: MessageBus,
                 fault_plan: Optional[dict[str, FaultMode]] = None,
                 max_views: int = 16):
        if not validators:
            raise CommitteeError("empty committee")
        self.validators = list(validators)
        self.bus = bus
        self.fault_plan = dict(fault_plan or {})
        self.max_views = max_views
        self.view = 0
        self._secrets = {r.eth_addr: r.secret for r in validators}
        self._order = [r.eth_addr for r in validators]
        for eth in self._order:
            if self.fault_plan.get(eth, FaultMode.HONEST) is FaultMode.SILENT:
                bus.silence(eth)

    @property
    def size(self) -> int:
        return len(self._order)

    def mode_of(self, eth_addr: str) -> FaultMode:
        return self.fault_plan.get(eth_addr, FaultMode.HONEST)

    def leader_of(self, view: int) -> str:
        return self._order[view % self.size]

    def honest(self) -> list[str]:
        return [e for e in self._order if self.mode_of(e) is FaultMode.HONEST]

    # -- round driving -------------------------------------------------

    def agree(self, sequence: int, digest: str, proposal: tuple) -> RoundOutcome:
        """Run rounds, rotating the leader on failure, until the committee
        commits or the view budget runs out."""
        if self.size < 4:
            # Central mode: one entity, no exchange.
            return RoundOutcome(view=self.view, digest=digest, committed=True,
                                deciders=tuple(self._order), message_count=0,
                                total_message_count=0, views_used=1)
        total = 0
        outcome = None
        for attempt in range(self.max_views):
            outcome = self._run_round(self.view, sequence, digest, proposal)
            total += outcome.message_count
            if outcome.committed:
                break
            self.view += 1
            logger.info("view change to %d after failed round (seq %d)",
                        self.view, sequence)
        assert outcome is not None
        return RoundOutcome(view=outcome.view, digest=outcome.digest,
                            committed=outcome.committed,
                            deciders=outcome.deciders,
                            message_count=outcome.message_count,
                            total_message_count=total,
                            views_used=attempt + 1)

    def _run_round(self, view: int, sequence: int, digest: str,
                   proposal: tuple) -> RoundOutcome:
        sent_before = self.bus.sent_count
        states = {eth: _NodeState() for eth in self._order}
        leader = self.leader_of(view)

        self._send_phase(leader, Phase.PRE_PREPARE, view, sequence, digest,
                         proposal)
        state = states[leader]
        state.accepted = digest
        self._count_own(state, "prepare", leader, digest)
        self._send_phase(leader, Phase.PREPARE, view, sequence, digest, None)
        state.prepared = True
        self._advance(leader, states[leader], view, sequence, digest)

        while True:
            delivery = self.bus.pop()
            if delivery is None:
                break
            message = delivery.payload
            if not isinstance(message, ConsensusMessage):
                continue
            if message.view != view or message.sequence != sequence:
                continue
            self._receive(delivery.recipient, message, states, view, sequence,
                          digest, proposal)

        deciders = tuple(e for e in self._order if states[e].decided == digest)
        committed = all(states[e].decided == digest for e in self.honest())
        count = self.bus.sent_count - sent_before
        return RoundOutcome(view=view, digest=digest, committed=committed,
                            deciders=deciders, message_count=count,
                            total_message_count=count, views_used=1)

    def _receive(self, node: str, message: ConsensusMessage, states: dict,
                 view: int, sequence: int, digest: str, proposal: tuple) -> None:
        secret = self._secrets.get(message.sender)
        if secret is None or not verify(secret, message.signing_payload(),
                                        message.signature):
            return
        state = states[node]
        if message.phase is Phase.PRE_PREPARE:
            if (state.accepted is None and message.digest == digest
                    and message.bundle == proposal):
                state.accepted = digest
                if not state.echoed and node != self.leader_of(view):
                    state.echoed = True
                    self._send_phase(node, Phase.PRE_PREPARE, view, sequence,
                                     digest, proposal)
                if not state.prepared:
                    state.prepared = True
                    self._count_own(state, "prepare", node, digest)
                    self._send_phase(node, Phase.PREPARE, view, sequence,
                                     digest, None)
        elif message.phase is Phase.PREPARE:
            state.prepare_votes.setdefault(message.digest, set()).add(
                message.sender)
        elif message.phase is Phase.COMMIT:
            state.commit_votes.setdefault(message.digest, set()).add(
                message.sender)
        self._advance(node, state, view, sequence, digest)

    def _advance(self, node: str, state: _NodeState, view: int, sequence: int,
                 digest: str) -> None:
        quorum = quorum_size(self.size)
        if (state.accepted and not state.committed
                and len(state.prepare_votes.get(digest, ())) >= quorum):
            state.committed = True
            self._count_own(state, "commit", node, digest)
            self._send_phase(node, Phase.COMMIT, view, sequence, digest, None)
        if (state.accepted and state.decided is None
                and len(state.commit_votes.get(digest, ())) >= quorum):
            state.decided = digest

    def _count_own(self, state: _NodeState, kind: str, node: str,
                   digest: str) -> None:
        votes = state.prepare_votes if kind == "prepare" else state.commit_votes
        votes.setdefault(digest, set()).add(node)

    def _send_phase(self, sender: str, phase: Phase, view: int, sequence: int,
                    digest: str, proposal: Optional[tuple]) -> None:
        """Broadcast one phase message; equivocators fork the digest by
        recipient parity."""
        secret = self._secrets[sender]
        equivocating = self.mode_of(sender) is FaultMode.EQUIVOCATING
        recipients = [e for e in self._order if e != sender]
        for index, recipient in enumerate(recipients):
            if equivocating and index % 2 == 1:
                digest_out = _tampered_digest(digest)
                bundle_out = (_tampered_bundle(proposal)
                              if proposal is not None else None)
            else:
                digest_out = digest
                bundle_out = proposal
            message = ConsensusMessage(
                phase=phase, view=view, sequence=sequence, digest=digest_out,
                sender=sender, signature="", bundle=bundle_out)
            signed = ConsensusMessage(
                phase=phase, view=view, sequence=sequence, digest=digest_out,
                sender=sender, signature=sign(secret, message.signing_payload()),
                bundle=bundle_out)
            self.bus.send(sender, recipient, signed)

    # -- multi-signature -----------------------------------------------

    def multi_sign(self, digest: str) -> QuorumProof:
        """Collect partial signatures over the agreed digest. Silent
        validators contribute nothing; committees below the minimum size
        produce a single central signature."""
        if self.size < 4:
            leader = self.leader_of(self.view)
            return QuorumProof(digest=digest, signatures={
                leader: sign(self._secrets[leader], digest)})
        signatures = {}
        for eth in self._order:
            if self.mode_of(eth) is FaultMode.SILENT:
                continue
            signatures[eth] = sign(self._secrets[eth], digest)
        return QuorumProof(digest=digest, signatures=signatures)


def make_quorum_verifier(validator_set: ValidatorSet) -> Callable[[QuorumProof], bool]:
    """Closure checking that a proof carries enough valid signatures from
    currently active validators."""

    def verify_proof(proof: QuorumProof) -> bool:
        if not isinstance(proof, QuorumProof) or not proof.digest:
            return False
        valid = 0
        for record in validator_set.active():
            signature = proof.signatures.get(record.eth_addr)
            if signature and verify(record.secret, proof.digest, signature):
                valid += 1
        return valid >= validator_set.quorum_size()

    return verify_proof


def audit_equivocation(log: list[Delivery],
                       secrets: dict[str, bytes]) -> list[EquivocationEvidence]:
    """Scan a bus log for signed contradictions.

    Only messages with valid signatures count; a forgery proves nothing
    about the named sender.
    """
    seen: dict[tuple, dict[str, ConsensusMessage]] = {}
    evidence: list[EquivocationEvidence] = []
    flagged: set[tuple] = set()
    for delivery in log:
        message = delivery.payload
        if not isinstance(message, ConsensusMessage):
            continue
        secret = secrets.get(message.sender)
        if secret is None or not verify(secret, message.signing_payload(),
                                        message.signature):
            continue
        key = (message.sender, message.view, message.sequence, message.phase)
        variants = seen.setdefault(key, {})
        variants.setdefault(message.digest, message)
        if len(variants) > 1 and key not in flagged:
            flagged.add(key)
            digest_a, digest_b = sorted(variants)[:2]
            evidence.append(EquivocationEvidence(
                offender=message.sender, view=message.view,
                sequence=message.sequence, phase=message.phase,
                digest_a=digest_a, digest_b=digest_b))
    return evidence


def apply_slashing(validator_set: ValidatorSet,
                   evidence: list[EquivocationEvidence]) -> dict[str, int]:
    """One penalty per offender however many contradictions they signed."""
    penalties: dict[str, int] = {}
    for item in evidence:
        if item.offender in penalties:
            continue
        penalty = validator_set.slash(item.offender)
        if penalty:
            penalties[item.offender] = penalty
    return penalties
