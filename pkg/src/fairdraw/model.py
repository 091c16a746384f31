"""Value types shared by the protocol, the register and the simulator."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

from . import codec, crypto

INITIATOR = "initiator"
GUARANTOR = "guarantor"
MAX_GUARANTORS = 16


class Cause(str, enum.Enum):
    BAD_SIGNATURE = "bad-signature"
    BAD_DRAW_NO = "bad-draw-no"
    BAD_HASH = "bad-hash"
    BAD_VALUE = "bad-value"
    MISSING_PEER = "missing-peer"
    DECODE_ERROR = "decode-error"
    UNEXPECTED_MESSAGE = "unexpected-message"
    TIMEOUT = "timeout"
    ROSTER_MISMATCH = "roster-mismatch"
    RESULT_MISMATCH = "result-mismatch"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Abort:
    """Why and where a party stopped.

    ``phase`` is the protocol step of the offending (or missing) structure.
    ``reported_by`` is set when the abort was learned from a peer's signed
    error notice rather than detected locally.
    """

    phase: int
    cause: Cause
    culprit: Optional[str] = None
    mode: str = "signed-error"
    reported_by: Optional[str] = None

    def __str__(self) -> str:
        who = f", culprit={self.culprit}" if self.culprit else ""
        via = f", reported by {self.reported_by}" if self.reported_by else ""
        return f"abort at step {self.phase}: {self.cause}{who}{via}"


@dataclass(frozen=True)
class Member:
    name: str
    role: str
    public_key: bytes


class RosterError(ValueError):
    pass


@dataclass(frozen=True)
class Roster:
    """One initiator followed by guarantors in ascending index order."""

    scheme: int
    members: tuple[Member, ...]

    def __post_init__(self) -> None:
        roles = [m.role for m in self.members]
        if roles.count(INITIATOR) != 1:
            raise RosterError("roster needs exactly one initiator")
        if any(r not in (INITIATOR, GUARANTOR) for r in roles):
            raise RosterError(f"unknown role in {roles}")
        g = roles.count(GUARANTOR)
        if not 1 <= g <= MAX_GUARANTORS:
            raise RosterError(f"roster needs 1..{MAX_GUARANTORS} guarantors, got {g}")
        names = [m.name for m in self.members]
        if len(set(names)) != len(names) or not all(names):
            raise RosterError("participant names must be unique and non-empty")
        crypto.scheme_id(self.scheme)

    @property
    def initiator(self) -> str:
        return next(m.name for m in self.members if m.role == INITIATOR)

    @property
    def guarantors(self) -> tuple[str, ...]:
        return tuple(m.name for m in self.members if m.role == GUARANTOR)

    def public_key(self, name: str) -> bytes:
        for m in self.members:
            if m.name == name:
                return m.public_key
        raise KeyError(name)

    def role(self, name: str) -> Optional[str]:
        for m in self.members:
            if m.name == name:
                return m.role
        return None

    def entries(self) -> tuple[codec.RosterEntry, ...]:
        # initiator first, then guarantors by index
        ordered = [m for m in self.members if m.role == INITIATOR]
        ordered += [m for m in self.members if m.role == GUARANTOR]
        return tuple(codec.RosterEntry(m.role, m.name, m.public_key) for m in ordered)

    @classmethod
    def from_entries(cls, scheme: int, entries: tuple[codec.RosterEntry, ...]) -> Roster:
        return cls(scheme, tuple(Member(e.name, e.role, e.public_key) for e in entries))

    def canonical(self) -> Roster:
        return Roster.from_entries(self.scheme, self.entries())
