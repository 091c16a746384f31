import os

import pytest

from drive import cast, pump, run
from fairdraw import codec, crypto
from fairdraw.codec import (
    AbortNotice,
    CommitAggregate,
    CounterSignedAnnounce,
    DrawAnnounce,
    GuarantorCommit,
    GuarantorHashAggregate,
    GuarantorReveal,
    GuarantorSecret,
    InitiatorCommit,
    InitiatorReveal,
    RevealAggregate,
    SignatureBlock,
    decode,
)
from fairdraw.model import Cause
from fairdraw.permutation import Permutation
from fairdraw.protocol import Guarantor, Initiator, ProtocolError, compute_result, secret_encodings
from fairdraw.register import DrawTranscript, verify_transcript


def sig_ok(roster, s, signer):
    return crypto.verify(roster.scheme, roster.public_key(signer), codec.signing_payload(s, signer), s.sig.signature)


def test_compute_result_hand_examples():
    assert compute_result(1, [Permutation((2, 0, 1))]) == 0
    # phi2(2) = 1, phi1(1) = 2
    assert compute_result(2, [Permutation((1, 2, 0)), Permutation((2, 0, 1))]) == 2


def test_honest_draw_agrees(ed_keys):
    roster, init, gs = cast(ed_keys)
    parties = run(init, gs, 10)
    results = {p.result for p in parties.values()}
    assert len(results) == 1 and 0 <= init.result < 10
    blobs = {p.transcript.to_bytes() for p in parties.values()}
    assert len(blobs) == 1
    assert verify_transcript(blobs.pop(), roster).result == init.result
    # the result is the composition of what was revealed
    perms = [gs[g].perm for g in roster.guarantors]
    assert init.result == compute_result(init.number, perms)


def test_start_announce(ed_keys):
    roster, init, gs = cast(ed_keys)
    announce = init.start(10)
    assert (announce.k, announce.draw_no) == (10, 1)
    assert sig_ok(roster, announce, "alice")
    with pytest.raises(ProtocolError):
        init.start(10)
    _, init2, _ = cast(ed_keys)
    with pytest.raises(ValueError):
        init2.start(0)


def test_successive_draws_increment(ed_keys):
    roster, init, gs = cast(ed_keys)
    run(init, gs, 5)
    run(init, gs, 5)
    assert init.draw_no == 2 and all(g.draw_no == 2 for g in gs.values())
    assert [e.draw_no for e in init.register.entries] == [1, 2]


def test_k1_gives_zero(ed_keys):
    roster, init, gs = cast(ed_keys)
    run(init, gs, 1)
    assert init.result == 0 and all(g.result == 0 for g in gs.values())
    assert init.number == 0 and init.commitment.hash != crypto.sha3(b"")


def test_guarantor_countersigns_unchanged(ed_keys):
    roster, init, gs = cast(ed_keys)
    bob = gs["bob"]
    bob.begin_draw()
    announce = init.start(4)
    bob.receive("alice", codec.encode(announce))
    (to, data), = bob.outbox
    reply = decode(data, CounterSignedAnnounce)
    assert to == "alice" and reply.inner == announce
    assert codec.encode(reply.inner) == codec.encode(announce)
    assert sig_ok(roster, reply, "bob")


def test_guarantor_rejects_stale_draw_number(ed_keys):
    roster, init, gs = cast(ed_keys)
    run(init, gs, 3)
    bob = gs["bob"]
    bob.begin_draw()
    stale = init.sign(DrawAnnounce(3, 1))
    bob.receive("alice", codec.encode(stale))
    assert bob.abort.cause == Cause.BAD_DRAW_NO and bob.abort.phase == 1


def test_guarantor_rejects_announce_signed_by_someone_else(ed_keys):
    roster, init, gs = cast(ed_keys)
    bob, carol = gs["bob"], gs["carol"]
    bob.begin_draw()
    forged = carol.sign(DrawAnnounce(3, 1))
    bob.receive("alice", codec.encode(forged))
    assert bob.abort.cause == Cause.BAD_SIGNATURE
    # a block claiming to be the initiator but made with another key
    fake = DrawAnnounce(3, 1).with_sig(SignatureBlock("alice", forged.sig.signature))
    bob2 = cast(ed_keys)[2]["bob"]
    bob2.begin_draw()
    bob2.receive("alice", codec.encode(fake))
    assert bob2.abort.cause == Cause.BAD_SIGNATURE and bob2.abort.culprit == "alice"


def test_initiator_commit_hides_everything(ed_keys):
    roster, init, gs = cast(ed_keys)
    wire = []
    run(init, gs, 10, wire=wire)
    commits = [decode(d) for _, _, d in wire if d[0] == InitiatorCommit.TAG]
    assert commits and all(set(vars(c)) >= {"draw_no", "hash"} for c in commits)
    for c in commits:
        assert [a for a, _, _ in c.LAYOUT] == ["draw_no", "hash"]
        assert len(c.hash) == 32


def test_commit_hashes_differ_across_seeds(ed_keys):
    from fairdraw.crypto import EntropySource, derive_seed

    hashes = set()
    roster, init, gs = cast(ed_keys)
    for i in range(1000):
        init._reset()
        init.k, init.draw_no = 3, 1
        init.src = EntropySource.seeded(derive_seed("commit-seed", i))
        hashes.add(init.commit_phase().hash)
        init.outbox.clear()
    assert len(hashes) == 1000


def test_guarantor_commit_shape_and_k1(ed_keys):
    roster, init, gs = cast(ed_keys)
    wire = []
    run(init, gs, 1, wire=wire)
    gc = [decode(d) for s, _, d in wire if d[0] == GuarantorCommit.TAG]
    assert {c.sig.signer for c in gc} == {"bob", "carol"}
    assert all(g.perm.mapping == (0,) for g in gs.values())
    assert gs["bob"].commitment.hash != gs["carol"].commitment.hash


def test_guarantor_stops_on_bad_commit_aggregate(ed_keys):
    roster, init, gs = cast(ed_keys)

    def tap(sender, recipient, data):
        if data[0] == CommitAggregate.TAG and recipient == "bob":
            bad = bytearray(data)
            bad[-1] ^= 1
            return bytes(bad)
        return data

    run(init, gs, 3, tap=tap)
    assert gs["bob"].abort.cause == Cause.BAD_SIGNATURE and gs["bob"].abort.phase == 7
    assert gs["bob"].perm is None  # never got to choose a permutation


def test_aggregate_order_and_covering_signature(ed_keys):
    roster, init, gs = cast(ed_keys)
    run(init, gs, 4)
    agg = init.announce_agg
    assert [i.sig.signer for i in agg.items] == ["bob", "carol"]
    assert sig_ok(roster, agg, "alice")
    unsigned = codec.encode(agg.unsigned())
    payload = unsigned + bytes([codec.SIGNER]) + len(b"alice").to_bytes(4, "big") + b"alice"
    assert crypto.verify(roster.scheme, roster.public_key("alice"), payload, agg.sig.signature)


@pytest.mark.parametrize("tag", [0x03, 0x06, 0x08, 0x0C])
def test_tampered_aggregate_aborts_every_receiver(ed_keys, tag):
    roster, init, gs = cast(ed_keys)

    def tap(sender, recipient, data):
        if data[0] == tag:
            bad = bytearray(data)
            bad[20] ^= 0x40  # inside the first item
            return bytes(bad)
        return data

    run(init, gs, 3, tap=tap)
    assert all(g.abort is not None and g.result is None for g in gs.values())


def test_hash_aggregate_missing_own_hash(ed_keys):
    roster, init, gs = cast(ed_keys)

    def tap(sender, recipient, data):
        if data[0] == GuarantorHashAggregate.TAG and recipient == "bob":
            agg = decode(data)
            carol_item = agg.items[1]
            return codec.encode(init.sign(GuarantorHashAggregate((carol_item, carol_item))))
        return data

    run(init, gs, 3, tap=tap)
    assert gs["bob"].abort is not None and gs["bob"].abort.phase in (9, 10)


def test_hash_aggregate_with_substituted_hash(ed_keys):
    roster, init, gs = cast(ed_keys)

    def tap(sender, recipient, data):
        if data[0] == GuarantorHashAggregate.TAG and recipient == "bob":
            agg = decode(data)
            mine = agg.items[0]
            swapped = GuarantorCommit(mine.draw_no, os.urandom(32), mine.sig)
            return codec.encode(init.sign(GuarantorHashAggregate((swapped, agg.items[1]))))
        return data

    run(init, gs, 3, tap=tap)
    assert gs["bob"].abort.cause == Cause.BAD_SIGNATURE and gs["bob"].abort.culprit == "bob"
    assert gs["bob"].reveal is None


class Reneger(Guarantor):
    def make_reveal(self):
        m = list(self.perm.mapping)
        m[0], m[1] = m[1], m[0]
        return GuarantorReveal(self.salt, self.draw_no, tuple(m))


class NonBijective(Guarantor):
    def commit_phase(self):
        self.perm = Permutation(tuple(range(self.k)))
        self.salt = self.src.salt()
        self.raw = (0,) * self.k
        secret = codec.encode(GuarantorSecret(self.draw_no, self.raw))
        self.commitment = self.sign(GuarantorCommit(self.draw_no, crypto.commit(secret, self.salt)))
        self.emit(self.initiator, self.commitment)
        self._wait(10)

    def make_reveal(self):
        return GuarantorReveal(self.salt, self.draw_no, self.raw)


class LyingInitiator(Initiator):
    def make_reveal(self):
        return InitiatorReveal(self.salt, self.draw_no, (self.number + 1) % self.k)


def test_renege_names_the_guarantor(ed_keys):
    roster, init, gs = cast(ed_keys, gclass={"carol": Reneger})
    run(init, gs, 3)
    for p in (init, gs["bob"], gs["carol"]):
        assert p.abort.cause == Cause.BAD_HASH and p.abort.culprit == "carol" and p.abort.phase == 13


def test_non_bijective_reveal_is_bad_value(ed_keys):
    roster, init, gs = cast(ed_keys, gclass={"bob": NonBijective})
    run(init, gs, 3)
    assert init.abort.cause == Cause.BAD_VALUE and init.abort.culprit == "bob"


def test_initiator_renege_detected_by_guarantors(ed_keys):
    roster, init, gs = cast(ed_keys, iclass=LyingInitiator)
    run(init, gs, 3)
    assert gs["bob"].abort.cause == Cause.BAD_HASH and gs["bob"].abort.culprit == "alice"
    assert init.abort.reported_by in ("bob", "carol")


def test_timeouts_and_culprits(ed_keys):
    roster, init, gs = cast(ed_keys)

    def drop_carol_commit(sender, recipient, data):
        return None if sender == "carol" and data[0] == GuarantorCommit.TAG else data

    run(init, gs, 3, tap=drop_carol_commit)
    assert init.waiting and init.step == 9
    init.on_timeout(init.wait_token - 1)  # stale timer is ignored
    assert init.abort is None
    init.on_timeout(init.wait_token)
    assert init.abort.cause == Cause.MISSING_PEER and init.abort.culprit is None

    roster, init, gs = cast(ed_keys)

    def drop_bob_reveal(sender, recipient, data):
        return None if sender == "bob" and data[0] == GuarantorReveal.TAG else data

    run(init, gs, 3, tap=drop_bob_reveal)
    init.on_timeout(init.wait_token)
    assert init.abort.phase == 13 and init.abort.culprit == "bob"
    # abort after the commitment point keeps every commitment as evidence
    kinds = {decode(s).TAG for s in init.transcript.structures}
    assert {InitiatorCommit.TAG, GuarantorHashAggregate.TAG, InitiatorReveal.TAG} <= kinds


def test_no_reveals_before_the_commitment_point(ed_keys):
    roster, init, gs = cast(ed_keys)
    wire = []

    def drop_from_bob(sender, recipient, data):
        return None if sender == "bob" and data[0] == GuarantorCommit.TAG else data

    run(init, gs, 3, wire=wire, tap=drop_from_bob)
    init.on_timeout(init.wait_token)
    pump({init.name: init, **gs}, wire=wire)
    assert all(p.abort is not None for p in (init, gs["bob"], gs["carol"]))
    assert not [d for _, _, d in wire if d[0] in (InitiatorReveal.TAG, GuarantorReveal.TAG)]
    leaks = secret_encodings(init) + secret_encodings(gs["carol"])
    assert not any(leak in d for _, _, d in wire for leak in leaks)


def test_signed_notice_versus_silent(ed_keys):
    for mode, expect_notice in (("signed-error", True), ("silent", False)):
        roster, init, gs = cast(ed_keys, abort_mode=mode)
        wire = []
        run(init, gs, 3, wire=wire, tap=lambda s, r, d: None if d[0] == CommitAggregate.TAG and r == "bob" else d)
        gs["bob"].on_timeout(gs["bob"].wait_token)
        pump({init.name: init, **gs}, wire=wire)
        notices = [d for s, _, d in wire if d[0] == AbortNotice.TAG and s == "bob"]
        assert bool(notices) == expect_notice
        assert gs["bob"].abort.mode == mode
        if expect_notice:
            assert init.abort.reported_by == "bob"


def test_out_of_order_message_is_unexpected(ed_keys):
    roster, init, gs = cast(ed_keys)
    bob = gs["bob"]
    bob.begin_draw()
    bob.receive("alice", codec.encode(init.sign(InitiatorCommit(1, bytes(32)))))
    assert bob.abort.cause == Cause.UNEXPECTED_MESSAGE


def test_garbage_is_decode_error(ed_keys):
    roster, init, gs = cast(ed_keys)
    bob = gs["bob"]
    bob.begin_draw()
    bob.receive("alice", b"\x01\x02garbage")
    assert bob.abort.cause == Cause.DECODE_ERROR


def test_exact_duplicates_are_ignored(ed_keys):
    roster, init, gs = cast(ed_keys)

    seen = []

    def dup(sender, recipient, data):
        seen.append(data)
        gs_or_init = {"alice": init, **gs}[recipient]
        gs_or_init.receive(sender, data)  # extra copy ahead of the real one
        return data

    run(init, gs, 3, tap=dup)
    assert init.result is not None and all(g.result == init.result for g in gs.values())


def test_keys_must_match_roster(ed_keys):
    roster, init, gs = cast(ed_keys)
    with pytest.raises(ProtocolError):
        Guarantor("bob", ed_keys["carol"], roster)
    with pytest.raises(ProtocolError):
        Initiator("bob", ed_keys["bob"], roster)
