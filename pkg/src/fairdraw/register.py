"""Draw register (replay defense) and third-party transcript verification.

Transcript file layout::

    b"FDRW" | version (1 byte) | framed TranscriptHeader | framed structures...

where "framed" means a 4-byte big-endian length followed by the canonical
encoding.  A completed draw publishes the structures every participant
holds, in step order::

    DrawAnnounce, AnnounceAggregate, InitiatorCommit, CommitAggregate,
    GuarantorHashAggregate, CountersignedHashAggregate (one per guarantor),
    InitiatorReveal, RevealAggregate

Aborted draws publish whatever the party exchanged before stopping.

The verifier below deliberately shares no code with the participant state
machines; it re-derives every check from the published bytes.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Optional, Union

from . import codec, crypto
from .codec import (
    AnnounceAggregate,
    CommitAggregate,
    CountersignedHashAggregate,
    DecodeError,
    DrawAnnounce,
    GuarantorHashAggregate,
    GuarantorSecret,
    InitiatorCommit,
    InitiatorReveal,
    InitiatorSecret,
    RevealAggregate,
    Structure,
    TranscriptHeader,
)
from .model import Abort, Cause, Roster, RosterError
from .permutation import Permutation, PermutationError

MAGIC = b"FDRW"
VERSION = 1
COMPLETED = 0
ABORTED = 1


class RegisterError(ValueError):
    pass


@dataclass(frozen=True)
class DrawTranscript:
    header: TranscriptHeader
    structures: tuple[bytes, ...]

    @property
    def draw_no(self) -> int:
        return self.header.draw_no

    @property
    def completed(self) -> bool:
        return self.header.status == COMPLETED

    def to_bytes(self) -> bytes:
        return MAGIC + bytes((VERSION,)) + codec.frame([codec.encode(self.header), *self.structures])

    @classmethod
    def from_bytes(cls, data: bytes) -> DrawTranscript:
        if len(data) < 5:
            raise DecodeError("truncated transcript preamble", len(data))
        if data[:4] != MAGIC:
            raise DecodeError("bad transcript magic", 0)
        if data[4] != VERSION:
            raise DecodeError(f"unsupported transcript version {data[4]}", 4)
        chunks = codec.unframe(data, 5)
        if not chunks:
            raise DecodeError("transcript has no header", 5)
        header = codec.decode(chunks[0], TranscriptHeader)
        return cls(header, tuple(chunks[1:]))


def make_header(
    roster: Roster,
    draw_no: int,
    k: int,
    result: Optional[int] = None,
    abort: Optional[Abort] = None,
) -> TranscriptHeader:
    if abort is None:
        return TranscriptHeader(roster.scheme, draw_no, k, COMPLETED, result or 0, 0, "", "", roster.entries())
    return TranscriptHeader(
        roster.scheme, draw_no, k, ABORTED, 0, abort.phase, str(abort.cause), abort.culprit or "", roster.entries()
    )


# ---------------------------------------------------------------------------
# verification


@dataclass(frozen=True)
class Verdict:
    valid: bool
    result: Optional[int] = None
    step: int = 0
    cause: Optional[str] = None
    culprit: Optional[str] = None
    detail: str = ""

    def __str__(self) -> str:
        if self.valid:
            return f"valid result={self.result}"
        who = f" culprit={self.culprit}" if self.culprit else ""
        return f"invalid step={self.step} cause={self.cause}{who} ({self.detail})"


class _Reject(Exception):
    def __init__(self, step: int, cause: Union[Cause, str], culprit: Optional[str] = None, detail: str = "") -> None:
        super().__init__(detail)
        self.verdict = Verdict(False, None, step, str(cause), culprit, detail)


class _Auditor:
    def __init__(self, roster: Roster, header: TranscriptHeader) -> None:
        self.roster = roster
        self.header = header
        self.initiator = roster.initiator
        self.guarantors = roster.guarantors

    def signed_by(self, s: Structure, signer: str, culprit: Optional[str] = None) -> None:
        step = s.STEP
        if s.sig is None or s.sig.signer != signer:
            got = s.sig.signer if s.sig else "nobody"
            raise _Reject(step, Cause.BAD_SIGNATURE, culprit or signer, f"{type(s).__name__} signed by {got}, expected {signer}")
        try:
            ok = crypto.verify(
                self.roster.scheme, self.roster.public_key(signer), codec.signing_payload(s, signer), s.sig.signature
            )
        except crypto.CryptoError as exc:
            raise _Reject(step, Cause.BAD_SIGNATURE, signer, str(exc)) from None
        if not ok:
            raise _Reject(step, Cause.BAD_SIGNATURE, signer, f"{type(s).__name__} signature by {signer} does not verify")

    def draw_no(self, s: Structure) -> None:
        numbers = codec.draw_numbers(s)
        if numbers != {self.header.draw_no}:
            raise _Reject(s.STEP, Cause.BAD_DRAW_NO, None, f"{type(s).__name__} carries draw numbers {sorted(numbers)}")

    def countersigned_list(self, agg: Structure, original: Structure) -> None:
        """Aggregate of per-guarantor countersignatures over ``original``."""
        self.draw_no(agg)
        self.signed_by(agg, self.initiator)
        if len(agg.items) != len(self.guarantors):
            raise _Reject(agg.STEP, Cause.MISSING_PEER, None, f"{len(agg.items)} entries for {len(self.guarantors)} guarantors")
        for item, g in zip(agg.items, self.guarantors):
            if item.inner != original:
                raise _Reject(item.STEP, Cause.BAD_SIGNATURE, g, f"{g} countersigned a different structure")
            self.signed_by(item, g)

    def run(self, structures: list[bytes]) -> Verdict:
        h = self.header
        g = len(self.guarantors)
        expected = [
            DrawAnnounce,
            AnnounceAggregate,
            InitiatorCommit,
            CommitAggregate,
            GuarantorHashAggregate,
            *([CountersignedHashAggregate] * g),
            InitiatorReveal,
            RevealAggregate,
        ]
        parsed: list[Structure] = []
        for i, cls in enumerate(expected):
            if i >= len(structures):
                raise _Reject(cls.STEP, Cause.MISSING_PEER, None, f"transcript ends before {cls.__name__}")
            try:
                parsed.append(codec.decode(structures[i], cls))
            except DecodeError as exc:
                raise _Reject(cls.STEP, Cause.DECODE_ERROR, None, f"structure {i}: {exc}") from None
        if len(structures) > len(expected):
            raise _Reject(15, Cause.DECODE_ERROR, None, "unexpected structures after the reveal aggregate")
        announce, announce_agg, commit, commit_agg, hash_agg = parsed[:5]
        countersigs = parsed[5 : 5 + g]
        reveal, reveal_agg = parsed[5 + g :]

        # steps 1-3
        self.draw_no(announce)
        self.signed_by(announce, self.initiator)
        if announce.k != h.k:
            raise _Reject(1, Cause.BAD_VALUE, self.initiator, "announced k differs from the header")
        self.countersigned_list(announce_agg, announce)

        # steps 5-7
        self.draw_no(commit)
        self.signed_by(commit, self.initiator)
        self.countersigned_list(commit_agg, commit)

        # steps 9-11
        self.draw_no(hash_agg)
        self.signed_by(hash_agg, self.initiator)
        if len(hash_agg.items) != g:
            raise _Reject(10, Cause.MISSING_PEER, None, f"{len(hash_agg.items)} hashes for {g} guarantors")
        for item, name in zip(hash_agg.items, self.guarantors):
            self.signed_by(item, name)
        for countersig, name in zip(countersigs, self.guarantors):
            self.draw_no(countersig)
            if countersig.inner != hash_agg:
                raise _Reject(11, Cause.BAD_SIGNATURE, name, f"{name} countersigned a different hash aggregate")
            self.signed_by(countersig, name)

        # step 12
        self.draw_no(reveal)
        self.signed_by(reveal, self.initiator)
        if reveal.number >= h.k:
            raise _Reject(12, Cause.BAD_VALUE, self.initiator, f"number {reveal.number} outside [0, {h.k})")
        secret = codec.encode(InitiatorSecret(reveal.draw_no, reveal.number))
        if not crypto.verify_commitment(commit.hash, secret, reveal.salt):
            raise _Reject(12, Cause.BAD_HASH, self.initiator, "initiator reveal does not match its commitment")

        # steps 13-14
        self.draw_no(reveal_agg)
        self.signed_by(reveal_agg, self.initiator)
        if len(reveal_agg.items) != g:
            raise _Reject(13, Cause.MISSING_PEER, None, f"{len(reveal_agg.items)} reveals for {g} guarantors")
        perms = []
        for item, committed, name in zip(reveal_agg.items, hash_agg.items, self.guarantors):
            self.signed_by(item, name)
            secret = codec.encode(GuarantorSecret(item.draw_no, item.perm))
            if not crypto.verify_commitment(committed.hash, secret, item.salt):
                raise _Reject(13, Cause.BAD_HASH, name, f"{name} reveal does not match its commitment")
            if len(item.perm) != h.k:
                raise _Reject(13, Cause.BAD_VALUE, name, f"{name} permutation has size {len(item.perm)}, k={h.k}")
            try:
                perms.append(Permutation(item.perm))
            except PermutationError:
                raise _Reject(13, Cause.BAD_VALUE, name, f"{name} permutation is not a bijection") from None

        # step 15: phi_1(phi_2(...phi_n(a)...))
        value = reveal.number
        for p in reversed(perms):
            value = p.mapping[value]
        if value != h.result:
            raise _Reject(15, Cause.RESULT_MISMATCH, None, f"recomputed {value}, published {h.result}")
        return Verdict(True, value)

    def run_aborted(self, structures: list[bytes]) -> Verdict:
        # evidence only: every structure must decode and carry the draw number
        for i, raw in enumerate(structures):
            try:
                s = codec.decode(raw)
            except DecodeError as exc:
                raise _Reject(0, Cause.DECODE_ERROR, None, f"structure {i}: {exc}") from None
            self.draw_no(s)
            if s.sig is not None and self.roster.role(s.sig.signer) is not None:
                self.signed_by(s, s.sig.signer)
        h = self.header
        return Verdict(False, None, h.phase, h.cause or None, h.culprit or None, "draw was aborted")


def verify_transcript(t: Union[bytes, DrawTranscript], roster: Optional[Roster] = None) -> Verdict:
    """Re-run every participant check on a published transcript.

    ``roster`` is the auditor's own list of public keys; when omitted the
    roster embedded in the header is trusted.  Never raises on bad input.
    """
    if isinstance(t, DrawTranscript):
        t = t.to_bytes()
    return _verify_cached(bytes(t), roster.canonical() if roster is not None else None)


@lru_cache(maxsize=64)
def _verify_cached(data: bytes, roster: Optional[Roster]) -> Verdict:
    try:
        transcript = DrawTranscript.from_bytes(data)
    except DecodeError as exc:
        return Verdict(False, None, 0, str(Cause.DECODE_ERROR), None, str(exc))
    header = transcript.header
    try:
        embedded = Roster.from_entries(header.scheme, header.roster)
    except (RosterError, crypto.CryptoError) as exc:
        return Verdict(False, None, 0, str(Cause.ROSTER_MISMATCH), None, str(exc))
    if roster is not None and embedded != roster:
        return Verdict(False, None, 0, str(Cause.ROSTER_MISMATCH), None, "header roster differs from the supplied roster")
    # fields that only one status may use must be blank for the other
    if header.status == COMPLETED and (header.phase or header.cause or header.culprit):
        return Verdict(False, None, 0, str(Cause.DECODE_ERROR), None, "completed draw carries abort fields")
    if header.status == ABORTED and header.result:
        return Verdict(False, None, 0, str(Cause.DECODE_ERROR), None, "aborted draw carries a result")
    auditor = _Auditor(embedded, header)
    try:
        if header.status == COMPLETED:
            return auditor.run(list(transcript.structures))
        if header.status == ABORTED:
            return auditor.run_aborted(list(transcript.structures))
        return Verdict(False, None, 0, str(Cause.DECODE_ERROR), None, f"unknown status {header.status}")
    except _Reject as rej:
        return rej.verdict


# ---------------------------------------------------------------------------
# the register


@dataclass(frozen=True)
class RegisterEntry:
    draw_no: int
    k: int
    result: Optional[int]
    abort: Optional[Abort]
    transcript_ref: str
    digest: str

    def index_line(self) -> str:
        outcome = "ABORT" if self.result is None else str(self.result)
        return f"{self.draw_no} {self.k} {outcome} {self.transcript_ref} {self.digest}"


@dataclass
class DrawRegister:
    """Append-only record of past draws, one per participant.

    With ``directory`` set, every appended transcript is written there as
    ``draw-<no>.fdrw`` and a line is added to ``index.txt``.
    """

    roster: Roster
    directory: Optional[Path] = None
    entries: list[RegisterEntry] = field(default_factory=list)
    next_expected: int = 1

    def __post_init__(self) -> None:
        if self.directory is not None:
            self.directory = Path(self.directory)
            self.directory.mkdir(parents=True, exist_ok=True)

    def next_draw_number(self) -> int:
        return self.next_expected

    def append(self, transcript: DrawTranscript, abort: Optional[Abort] = None) -> RegisterEntry:
        h = transcript.header
        if h.draw_no < self.next_expected and any(e.draw_no == h.draw_no for e in self.entries):
            raise RegisterError(f"draw {h.draw_no} is already registered")
        if h.draw_no != self.next_expected:
            raise RegisterError(f"draw {h.draw_no} does not follow {self.next_expected - 1}")
        data = transcript.to_bytes()
        if transcript.completed:
            verdict = verify_transcript(data, self.roster)
            if not verdict.valid:
                raise RegisterError(f"transcript for draw {h.draw_no} does not verify: {verdict}")
            result = verdict.result
        else:
            if abort is None:
                abort = Abort(h.phase, Cause(h.cause), h.culprit or None)
            result = None
        name = f"draw-{h.draw_no:06d}.fdrw"
        entry = RegisterEntry(h.draw_no, h.k, result, abort, name, crypto.sha3(data).hex())
        if self.directory is not None:
            (self.directory / name).write_bytes(data)
            with open(self.directory / "index.txt", "a", encoding="utf-8") as fh:
                fh.write(entry.index_line() + "\n")
        self.entries.append(entry)
        self.next_expected += 1
        return entry

    def index_lines(self) -> list[str]:
        return [e.index_line() for e in self.entries]

    @classmethod
    def load(cls, roster: Roster, directory: "str | os.PathLike[str]") -> DrawRegister:
        """Rebuild a register from its index, checking every file digest."""
        directory = Path(directory)
        reg = cls(roster)
        index = directory / "index.txt"
        if index.exists():
            for line in index.read_text(encoding="utf-8").splitlines():
                draw_no, k, outcome, name, digest = line.split()
                data = (directory / name).read_bytes()
                if crypto.sha3(data).hex() != digest:
                    raise RegisterError(f"{name} does not match its index digest")
                reg.append(DrawTranscript.from_bytes(data))
        directory.mkdir(parents=True, exist_ok=True)
        reg.directory = directory
        return reg
