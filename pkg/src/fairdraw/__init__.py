"""Distributed random draws by commit-reveal between an initiator and guarantors."""

from .model import GUARANTOR, INITIATOR, Abort, Cause, Member, Roster
from .permutation import Permutation
from .protocol import Guarantor, Initiator, compute_result
from .register import DrawRegister, DrawTranscript, Verdict, verify_transcript

__version__ = "0.1.0"

__all__ = [
    "Abort",
    "Cause",
    "DrawRegister",
    "DrawTranscript",
    "GUARANTOR",
    "Guarantor",
    "INITIATOR",
    "Initiator",
    "Member",
    "Permutation",
    "Roster",
    "Verdict",
    "compute_result",
    "verify_transcript",
]
