"""Initiator and guarantor state machines for one draw at a time.

Participants are reactive: the transport calls :meth:`Participant.receive`
with raw bytes and :meth:`Participant.on_timeout` when a wait expires, and
collects outgoing ``(recipient, bytes)`` pairs from ``outbox``.  Each call
runs to completion; a participant is never used concurrently.

Message flow for guarantors ``G1..Gn`` (step numbers as in the protocol)::

    1  I -> G   DrawAnnounce                 2  G -> I   CounterSignedAnnounce
    3  I -> G   AnnounceAggregate            (4: G checks it)
    5  I -> G   InitiatorCommit              6  G -> I   CounterSignedCommit
    7  I -> G   CommitAggregate              (8: G checks it)
    9  G -> I   GuarantorCommit             10  I -> G   GuarantorHashAggregate
    11 G -> I   CountersignedHashAggregate;  I forwards all of them to every G
    12 I -> G   InitiatorReveal             13  G -> I   GuarantorReveal
    14 I -> G   RevealAggregate             (15: everyone computes the result)

Nothing secret leaves a participant before step 12 (initiator) or step 13
(guarantor).  Guarantors reveal only after holding every guarantor's
countersignature on the full list of commitments.
"""

from __future__ import annotations

import hashlib
from typing import Callable, Optional

from . import codec, crypto
from .codec import (
    AbortNotice,
    AnnounceAggregate,
    CommitAggregate,
    CounterSignedAnnounce,
    CounterSignedCommit,
    CountersignedHashAggregate,
    DecodeError,
    DrawAnnounce,
    GuarantorCommit,
    GuarantorHashAggregate,
    GuarantorReveal,
    GuarantorSecret,
    InitiatorCommit,
    InitiatorReveal,
    InitiatorSecret,
    RevealAggregate,
    SignatureBlock,
    Structure,
)
from .crypto import EntropySource, KeyPair
from .model import GUARANTOR, INITIATOR, Abort, Cause, Roster
from .permutation import Permutation, PermutationError, random_permutation
from .register import DrawRegister, DrawTranscript, make_header

DEFAULT_TIMEOUT = 30.0


class ProtocolError(RuntimeError):
    """Misuse of a participant object (not a protocol failure)."""


class _Stop(Exception):
    def __init__(self, abort: Abort) -> None:
        super().__init__(str(abort))
        self.abort = abort


def compute_result(number: int, perms: list[Permutation]) -> int:
    """``phi_1(phi_2(...phi_n(number)...))`` for ``perms = [phi_1, ..., phi_n]``."""
    value = number
    for p in reversed(perms):
        value = p.mapping[value]
    return value


class Participant:
    role: str

    def __init__(
        self,
        name: str,
        keys: KeyPair,
        roster: Roster,
        register: Optional[DrawRegister] = None,
        *,
        timeout: float = DEFAULT_TIMEOUT,
        abort_mode: str = "signed-error",
        entropy: Optional[Callable[[int], EntropySource]] = None,
    ) -> None:
        if roster.role(name) != self.role:
            raise ProtocolError(f"{name} is not a {self.role} in the roster")
        if keys.public != roster.public_key(name) or keys.scheme != roster.scheme:
            raise ProtocolError(f"key pair does not match the roster entry for {name}")
        if abort_mode not in ("signed-error", "silent"):
            raise ProtocolError(f"unknown abort mode {abort_mode!r}")
        self.name = name
        self.keys = keys
        self.roster = roster
        self.register = register if register is not None else DrawRegister(roster)
        self.timeout = timeout
        self.abort_mode = abort_mode
        self.entropy = entropy or (lambda draw_no: EntropySource.system())
        self.guarantors = roster.guarantors
        self.initiator = roster.initiator
        self.outbox: list[tuple[str, bytes]] = []
        self.wait_token = 0
        self.draw_no: Optional[int] = None
        self._reset()

    # -- per-draw state --------------------------------------------------

    def _reset(self) -> None:
        self.k: Optional[int] = None
        self.step = 0
        self.result: Optional[int] = None
        self.abort: Optional[Abort] = None
        self.transcript: Optional[DrawTranscript] = None
        self.src: Optional[EntropySource] = None
        self._seen: set[bytes] = set()
        self._log: list[tuple[int, int, int, bytes]] = []
        self.waiting = False

    @property
    def finished(self) -> bool:
        return self.result is not None or self.abort is not None

    # -- helpers ---------------------------------------------------------

    def _index(self, name: Optional[str]) -> int:
        if name == self.initiator:
            return 0
        try:
            return 1 + self.guarantors.index(name)
        except ValueError:
            return 1 + len(self.guarantors)

    def _record(self, data: bytes, s: Structure) -> None:
        signer = s.sig.signer if s.sig else None
        self._log.append((s.STEP, self._index(signer), len(self._log), data))

    def sign(self, s: Structure) -> Structure:
        sig = crypto.sign(self.keys, codec.signing_payload(s, self.name))
        return s.with_sig(SignatureBlock(self.name, sig))

    def signature_ok(self, s: Structure, signer: str) -> bool:
        if s.sig is None or s.sig.signer != signer:
            return False
        try:
            return crypto.verify(
                self.roster.scheme, self.roster.public_key(signer), codec.signing_payload(s, signer), s.sig.signature
            )
        except (crypto.CryptoError, KeyError):
            return False

    def require_signed(self, s: Structure, signer: str, step: Optional[int] = None) -> None:
        if not self.signature_ok(s, signer):
            claimed = s.sig.signer if s.sig else None
            culprit = signer if claimed == signer else (claimed if self.roster.role(claimed or "") else None)
            raise _Stop(Abort(step or s.STEP, Cause.BAD_SIGNATURE, culprit))

    def emit(self, recipient: str, s: Structure) -> None:
        data = codec.encode(s)
        self._record(data, s)
        self.send(recipient, data, s)

    def send(self, recipient: str, data: bytes, s: Structure) -> None:
        """Final hook before bytes leave; adversaries override this."""
        self.outbox.append((recipient, data))

    def broadcast(self, s: Structure) -> None:
        data = codec.encode(s)
        self._record(data, s)
        for g in self.guarantors:
            if g != self.name:
                self.send(g, data, s)

    def _wait(self, step: int) -> None:
        self.step = step
        self.waiting = True
        self.wait_token += 1

    # -- transport entry points -------------------------------------------

    def receive(self, sender: str, data: bytes) -> None:
        if self.finished or self.draw_no is None:
            return
        digest = hashlib.sha3_256(data).digest()
        if digest in self._seen:
            return
        self._seen.add(digest)
        try:
            try:
                s = codec.decode(data)
            except DecodeError:
                self._log.append((self.step, self._index(sender), len(self._log), data))
                raise _Stop(Abort(self.step, Cause.DECODE_ERROR)) from None
            self._record(data, s)
            if codec.draw_numbers(s) != {self.draw_no}:
                raise _Stop(Abort(s.STEP or self.step, Cause.BAD_DRAW_NO))
            if isinstance(s, AbortNotice):
                self._on_notice(s)
                return
            self.handle(s)
        except _Stop as stop:
            self.fail(stop.abort)

    def on_timeout(self, token: int) -> None:
        if self.finished or not self.waiting or token != self.wait_token:
            return
        missing = self.missing_peers()
        culprit = ",".join(missing) if self.step >= 11 and missing else None
        self.fail(Abort(self.step, Cause.MISSING_PEER, culprit))

    def _on_notice(self, notice: AbortNotice) -> None:
        sender = notice.sig.signer if notice.sig else None
        if sender is None or sender == self.name or self.roster.role(sender) is None:
            raise _Stop(Abort(self.step, Cause.BAD_SIGNATURE))
        self.require_signed(notice, sender, self.step)
        try:
            cause = Cause(notice.cause)
        except ValueError:
            cause = Cause.DECODE_ERROR
        self.fail(
            Abort(notice.phase, cause, notice.culprit or None, mode="signed-error", reported_by=sender),
            notify=self.role == INITIATOR,
        )

    def fail(self, abort: Abort, notify: bool = True) -> None:
        if self.finished:
            return
        abort = Abort(abort.phase, abort.cause, abort.culprit, self.abort_mode, abort.reported_by)
        self.abort = abort
        self.waiting = False
        if notify and self.abort_mode == "signed-error" and self.draw_no is not None:
            notice = self.sign(AbortNotice(self.draw_no, abort.phase, str(abort.cause), abort.culprit or ""))
            if self.role == INITIATOR:
                self.broadcast(notice)
            else:
                self.emit(self.initiator, notice)
        self._publish(abort=abort)

    def complete(self, result: int) -> None:
        self.result = result
        self.waiting = False
        self._publish()

    def _publish(self, abort: Optional[Abort] = None) -> None:
        if abort is None:
            structures = self.canonical_structures()
        else:
            ordered = sorted(self._log, key=lambda e: (e[0] or 99, e[1], e[2]))
            structures, seen = [], set()
            for *_, data in ordered:
                if data not in seen:
                    seen.add(data)
                    structures.append(data)
        header = make_header(self.roster, self.draw_no, self.k or 1, self.result, abort)
        self.transcript = DrawTranscript(header, tuple(structures))
        self.register.append(self.transcript, abort)

    # -- overridden by roles ---------------------------------------------

    def handle(self, s: Structure) -> None:
        raise NotImplementedError

    def missing_peers(self) -> list[str]:
        raise NotImplementedError

    def canonical_structures(self) -> list[bytes]:
        raise NotImplementedError

    def _unexpected(self, s: Structure) -> _Stop:
        sender = s.sig.signer if s.sig else None
        return _Stop(Abort(self.step, Cause.UNEXPECTED_MESSAGE, sender if self.roster.role(sender or "") else None))


class Initiator(Participant):
    role = INITIATOR

    def _reset(self) -> None:
        super()._reset()
        self.announce: Optional[DrawAnnounce] = None
        self.announce_agg: Optional[AnnounceAggregate] = None
        self.commitment: Optional[InitiatorCommit] = None
        self.commit_agg: Optional[CommitAggregate] = None
        self.hash_agg: Optional[GuarantorHashAggregate] = None
        self.number: Optional[int] = None
        self.salt: Optional[bytes] = None
        self.reveal: Optional[InitiatorReveal] = None
        self.reveal_agg: Optional[RevealAggregate] = None
        self.replies: dict[str, Structure] = {}
        self.guarantor_hashes: dict[str, GuarantorCommit] = {}
        self.countersigs: dict[str, CountersignedHashAggregate] = {}
        self.reveals: dict[str, GuarantorReveal] = {}

    # step 1
    def start(self, k: int) -> DrawAnnounce:
        if k < 1:
            raise ValueError("k must be at least 1")
        if self.draw_no is not None and not self.finished:
            raise ProtocolError("previous draw has not finished")
        self._reset()
        self.k = k
        self.draw_no = self.register.next_draw_number()
        self.src = self.entropy(self.draw_no)
        self.announce = self.sign(DrawAnnounce(k, self.draw_no))
        self.broadcast(self.announce)
        self._wait(2)
        return self.announce

    def missing_peers(self) -> list[str]:
        have = {2: self.replies, 6: self.replies, 9: self.guarantor_hashes, 11: self.countersigs, 13: self.reveals}
        return [g for g in self.guarantors if g not in have.get(self.step, {})]

    def _reply_from(self, s: Structure, step: int) -> str:
        signer = s.sig.signer if s.sig else None
        if self.step != step or signer not in self.guarantors:
            raise self._unexpected(s)
        return signer

    def handle(self, s: Structure) -> None:
        if isinstance(s, CounterSignedAnnounce):
            self._on_countersigned_announce(s)
        elif isinstance(s, CounterSignedCommit):
            self._on_countersigned_commit(s)
        elif isinstance(s, GuarantorCommit):
            self._on_guarantor_commit(s)
        elif isinstance(s, CountersignedHashAggregate):
            self._on_countersigned_hashes(s)
        elif isinstance(s, GuarantorReveal):
            self._on_guarantor_reveal(s)
        else:
            raise self._unexpected(s)

    def _on_countersigned_announce(self, s: CounterSignedAnnounce) -> None:
        g = self._reply_from(s, 2)
        self.require_signed(s, g)
        if s.inner != self.announce:
            raise _Stop(Abort(2, Cause.BAD_SIGNATURE, g))
        self.replies[g] = s
        if len(self.replies) == len(self.guarantors):
            self.announce_agg = self.aggregate_and_distribute("announce")
            self.commit_phase()

    # step 5
    def commit_phase(self) -> InitiatorCommit:
        self.number = self.choose_number(self.src, self.k)
        self.salt = self.src.salt()
        secret = codec.encode(InitiatorSecret(self.draw_no, self.number))
        self.commitment = self.sign(InitiatorCommit(self.draw_no, crypto.commit(secret, self.salt)))
        self.replies = {}
        self.on_committed()
        self.broadcast(self.commitment)
        self._wait(6)
        return self.commitment

    def choose_number(self, src: EntropySource, k: int) -> int:
        return src.next_below(k)

    def on_committed(self) -> None:
        """Hook for adversaries; called once the hidden number is fixed."""

    def _on_countersigned_commit(self, s: CounterSignedCommit) -> None:
        g = self._reply_from(s, 6)
        self.require_signed(s, g)
        if s.inner != self.commitment:
            raise _Stop(Abort(6, Cause.BAD_SIGNATURE, g))
        self.replies[g] = s
        if len(self.replies) == len(self.guarantors):
            self.commit_agg = self.aggregate_and_distribute("initiator-commit")
            self._wait(9)

    def _on_guarantor_commit(self, s: GuarantorCommit) -> None:
        g = self._reply_from(s, 9)
        self.require_signed(s, g)
        self.guarantor_hashes[g] = s
        if len(self.guarantor_hashes) == len(self.guarantors):
            self.hash_agg = self.aggregate_and_distribute("guarantor-hashes")
            self._wait(11)

    def _on_countersigned_hashes(self, s: CountersignedHashAggregate) -> None:
        g = self._reply_from(s, 11)
        self.require_signed(s, g)
        if s.inner != self.hash_agg:
            raise _Stop(Abort(11, Cause.BAD_SIGNATURE, g))
        self.countersigs[g] = s
        if len(self.countersigs) == len(self.guarantors):
            # everyone gets every countersignature before any secret is opened
            for countersig in self.ordered(self.countersigs):
                self.broadcast_forward(countersig)
            self.reveal_phase()

    def broadcast_forward(self, s: Structure) -> None:
        data = codec.encode(s)
        for g in self.guarantors:
            self.send(g, data, s)

    # step 12
    def reveal_phase(self) -> InitiatorReveal:
        self.reveal = self.sign(self.make_reveal())
        self.broadcast(self.reveal)
        self._wait(13)
        return self.reveal

    def make_reveal(self) -> InitiatorReveal:
        return InitiatorReveal(self.salt, self.draw_no, self.number)

    def checks_reveal_of(self, guarantor: str) -> bool:
        return True

    def _on_guarantor_reveal(self, s: GuarantorReveal) -> None:
        g = self._reply_from(s, 13)
        self.require_signed(s, g)
        if self.checks_reveal_of(g):
            check_guarantor_reveal(s, self.guarantor_hashes[g], self.k, g)
        self.reveals[g] = s
        self.on_reveal_seen(g, s)
        if len(self.reveals) == len(self.guarantors):
            self.reveal_agg = self.aggregate_and_distribute("reveals")
            perms = [Permutation(self.reveals[g].perm) for g in self.guarantors]
            self.complete(compute_result(self.number, perms))

    def on_reveal_seen(self, guarantor: str, s: GuarantorReveal) -> None:
        """Hook for adversaries."""

    # steps 3, 7, 10, 14
    def aggregate_and_distribute(self, phase: str) -> Structure:
        if phase == "announce":
            agg = AnnounceAggregate(self.ordered(self.replies))
        elif phase == "initiator-commit":
            agg = CommitAggregate(self.ordered(self.replies))
        elif phase == "guarantor-hashes":
            agg = GuarantorHashAggregate(self.ordered(self.guarantor_hashes))
        elif phase == "reveals":
            agg = RevealAggregate(self.ordered(self.reveals))
        else:
            raise ValueError(f"unknown aggregation phase {phase!r}")
        agg = self.sign(agg)
        self.broadcast(agg)
        return agg

    def ordered(self, by_name: dict) -> tuple:
        missing = [g for g in self.guarantors if g not in by_name]
        if missing:
            raise _Stop(Abort(self.step, Cause.MISSING_PEER, None))
        return tuple(by_name[g] for g in self.guarantors)

    def canonical_structures(self) -> list[bytes]:
        return [
            codec.encode(s)
            for s in (
                self.announce,
                self.announce_agg,
                self.commitment,
                self.commit_agg,
                self.hash_agg,
                *self.ordered(self.countersigs),
                self.reveal,
                self.reveal_agg,
            )
        ]


def check_guarantor_reveal(s: GuarantorReveal, committed: GuarantorCommit, k: int, name: str) -> Permutation:
    secret = codec.encode(GuarantorSecret(s.draw_no, s.perm))
    if not crypto.verify_commitment(committed.hash, secret, s.salt):
        raise _Stop(Abort(13, Cause.BAD_HASH, name))
    if len(s.perm) != k:
        raise _Stop(Abort(13, Cause.BAD_VALUE, name))
    try:
        return Permutation(s.perm)
    except PermutationError:
        raise _Stop(Abort(13, Cause.BAD_VALUE, name)) from None


class Guarantor(Participant):
    role = GUARANTOR

    def _reset(self) -> None:
        super()._reset()
        self.announce: Optional[DrawAnnounce] = None
        self.my_countersign: Optional[CounterSignedAnnounce] = None
        self.announce_agg: Optional[AnnounceAggregate] = None
        self.init_commit: Optional[InitiatorCommit] = None
        self.commit_agg: Optional[CommitAggregate] = None
        self.perm: Optional[Permutation] = None
        self.salt: Optional[bytes] = None
        self.commitment: Optional[GuarantorCommit] = None
        self.hash_agg: Optional[GuarantorHashAggregate] = None
        self.countersigs: dict[str, CountersignedHashAggregate] = {}
        self.init_reveal: Optional[InitiatorReveal] = None
        self.reveal: Optional[GuarantorReveal] = None
        self.reveal_agg: Optional[RevealAggregate] = None

    def begin_draw(self) -> None:
        """Get ready for the next announce (draw number from the register).

        A guarantor that never heard anything of the previous draw may move on.
        """
        if self.draw_no is not None and not self.finished and self._log:
            raise ProtocolError("previous draw has not finished")
        self._reset()
        self.draw_no = self.register.next_draw_number()
        self.step = 1

    def missing_peers(self) -> list[str]:
        if self.step == 11:
            return [g for g in self.guarantors if g not in self.countersigs]
        return [self.initiator]

    def handle(self, s: Structure) -> None:
        handlers = {
            DrawAnnounce: (1, self.on_announce),
            AnnounceAggregate: (3, self._on_announce_aggregate),
            InitiatorCommit: (5, self._on_initiator_commit),
            CommitAggregate: (7, self._on_commit_aggregate),
            GuarantorHashAggregate: (10, self._on_hash_aggregate),
            CountersignedHashAggregate: (11, self._on_forwarded_countersig),
            InitiatorReveal: (12, self._on_initiator_reveal),
            RevealAggregate: (14, self._on_reveal_aggregate),
        }
        entry = handlers.get(type(s))
        if entry is None or entry[0] != self.step:
            raise self._unexpected(s)
        entry[1](s)

    def _check_countersigned_list(self, agg: Structure, original: Structure, mine: Structure) -> None:
        self.require_signed(agg, self.initiator)
        if len(agg.items) != len(self.guarantors):
            raise _Stop(Abort(agg.STEP, Cause.MISSING_PEER, self.initiator))
        for item, g in zip(agg.items, self.guarantors):
            if item.inner != original:
                raise _Stop(Abort(item.STEP, Cause.BAD_SIGNATURE, g))
            self.require_signed(item, g)
        if agg.items[self.guarantors.index(self.name)] != mine:
            raise _Stop(Abort(agg.STEP, Cause.BAD_SIGNATURE, self.initiator))

    # step 2
    def on_announce(self, s: DrawAnnounce) -> CounterSignedAnnounce:
        self.require_signed(s, self.initiator)
        self.k = s.k
        self.announce = s
        self.src = self.entropy(self.draw_no)
        self.my_countersign = self.sign(CounterSignedAnnounce(s))
        self.emit(self.initiator, self.my_countersign)
        self._wait(3)
        return self.my_countersign

    # step 4 gate
    def _on_announce_aggregate(self, s: AnnounceAggregate) -> None:
        self._check_countersigned_list(s, self.announce, self.my_countersign)
        self.announce_agg = s
        self._wait(5)

    # step 6
    def _on_initiator_commit(self, s: InitiatorCommit) -> None:
        self.require_signed(s, self.initiator)
        self.init_commit = s
        self.my_countersign = self.sign(CounterSignedCommit(s))
        self.emit(self.initiator, self.my_countersign)
        self._wait(7)

    # step 8 gate, then step 9
    def _on_commit_aggregate(self, s: CommitAggregate) -> None:
        self._check_countersigned_list(s, self.init_commit, self.my_countersign)
        self.commit_agg = s
        self.commit_phase()

    def commit_phase(self) -> GuarantorCommit:
        self.perm = self.choose_permutation(self.src, self.k)
        self.salt = self.src.salt()
        secret = codec.encode(GuarantorSecret(self.draw_no, self.perm.mapping))
        self.commitment = self.sign(GuarantorCommit(self.draw_no, crypto.commit(secret, self.salt)))
        self.on_committed()
        self.emit(self.initiator, self.commitment)
        self._wait(10)
        return self.commitment

    def choose_permutation(self, src: EntropySource, k: int) -> Permutation:
        return random_permutation(k, src)

    def on_committed(self) -> None:
        """Hook for adversaries; called once the hidden permutation is fixed."""

    # step 11
    def _on_hash_aggregate(self, s: GuarantorHashAggregate) -> None:
        self.require_signed(s, self.initiator)
        if len(s.items) != len(self.guarantors):
            raise _Stop(Abort(10, Cause.MISSING_PEER, self.initiator))
        for item, g in zip(s.items, self.guarantors):
            self.require_signed(item, g, 9)
        if s.items[self.guarantors.index(self.name)] != self.commitment:
            raise _Stop(Abort(10, Cause.BAD_HASH, self.initiator))
        self.hash_agg = s
        self.emit(self.initiator, self.sign(CountersignedHashAggregate(s)))
        self._wait(11)

    def _on_forwarded_countersig(self, s: CountersignedHashAggregate) -> None:
        signer = s.sig.signer if s.sig else None
        if signer not in self.guarantors or signer in self.countersigs:
            raise self._unexpected(s)
        self.require_signed(s, signer)
        if s.inner != self.hash_agg:
            raise _Stop(Abort(11, Cause.BAD_SIGNATURE, signer))
        self.countersigs[signer] = s
        if len(self.countersigs) == len(self.guarantors):
            self._wait(12)

    # step 13
    def _on_initiator_reveal(self, s: InitiatorReveal) -> None:
        self.require_signed(s, self.initiator)
        secret = codec.encode(InitiatorSecret(s.draw_no, s.number))
        if not crypto.verify_commitment(self.init_commit.hash, secret, s.salt):
            raise _Stop(Abort(12, Cause.BAD_HASH, self.initiator))
        if s.number >= self.k:
            raise _Stop(Abort(12, Cause.BAD_VALUE, self.initiator))
        self.init_reveal = s
        self._wait(14)
        self.on_initiator_revealed(s)
        self.reveal_phase()

    def on_initiator_revealed(self, s: InitiatorReveal) -> None:
        """Hook for adversaries."""

    def reveal_phase(self) -> None:
        self.send_reveal(self.make_reveal())

    def make_reveal(self) -> GuarantorReveal:
        return GuarantorReveal(self.salt, self.draw_no, self.perm.mapping)

    def send_reveal(self, reveal: GuarantorReveal) -> None:
        self.reveal = self.sign(reveal)
        self.emit(self.initiator, self.reveal)

    # step 15
    def _on_reveal_aggregate(self, s: RevealAggregate) -> None:
        if self.reveal is None:
            raise self._unexpected(s)
        self.require_signed(s, self.initiator)
        if len(s.items) != len(self.guarantors):
            raise _Stop(Abort(14, Cause.MISSING_PEER, self.initiator))
        perms = []
        for item, committed, g in zip(s.items, self.hash_agg.items, self.guarantors):
            self.require_signed(item, g, 13)
            perms.append(check_guarantor_reveal(item, committed, self.k, g))
        if s.items[self.guarantors.index(self.name)] != self.reveal:
            raise _Stop(Abort(14, Cause.BAD_SIGNATURE, self.initiator))
        self.reveal_agg = s
        self.complete(compute_result(self.init_reveal.number, perms))

    def canonical_structures(self) -> list[bytes]:
        countersigs = [self.countersigs[g] for g in self.guarantors]
        return [
            codec.encode(s)
            for s in (
                self.announce,
                self.announce_agg,
                self.init_commit,
                self.commit_agg,
                self.hash_agg,
                *countersigs,
                self.init_reveal,
                self.reveal_agg,
            )
        ]


def secret_encodings(p: Participant) -> list[bytes]:
    """Byte strings that must not appear on the wire before the reveal."""
    if isinstance(p, Initiator) and p.number is not None:
        secret = codec.encode(InitiatorSecret(p.draw_no, p.number))
        number_field = bytes((codec.NUMBER,)) + (8).to_bytes(4, "big") + p.number.to_bytes(8, "big")
        return [p.salt, secret, number_field]
    if isinstance(p, Guarantor) and p.perm is not None:
        secret = codec.encode(GuarantorSecret(p.draw_no, p.perm.mapping))
        perm_field = secret[1 + 1 + 4 + 8 :]
        return [p.salt, secret, perm_field]
    return []


def make_participant(role: str, *args, **kwargs) -> Participant:
    cls = {INITIATOR: Initiator, GUARANTOR: Guarantor}[role]
    return cls(*args, **kwargs)
