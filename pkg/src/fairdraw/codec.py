"""Canonical tag-length-value encoding of every draw structure.

Layout of an encoded structure::

    struct-tag (1 byte)
    field*    : field-tag (1 byte) | length (4 bytes, big endian) | payload
    signature?: field-tag SIGNATURE | length | signer-id (u32 len + utf-8)
                                             | signature (u32 len + bytes)

Fields appear in the fixed order given by the class ``LAYOUT``.  Integers
are 8-byte big endian, salts are 64 raw bytes, hashes 32 raw bytes.  A
structure carries at most one signature block of its own; a counter-signed
structure nests the signed original as an ``INNER`` field so the original
bytes (and signature) stay intact.  Aggregates hold a count-prefixed list of
length-prefixed item encodings.

A signature always covers ``encode(structure without its signature)``
followed by a ``SIGNER`` field naming the signer.
"""

from __future__ import annotations

import struct
from functools import lru_cache
from dataclasses import dataclass, replace
from typing import Any, ClassVar, Optional, Sequence, TypeVar

U64_MAX = (1 << 64) - 1
SALT_LEN = 64
HASH_LEN = 32
MAX_SIG_LEN = 64

# field tags
K = 0x01
DRAW_NO = 0x02
HASH = 0x03
SALT = 0x04
NUMBER = 0x05
PERMUTATION = 0x06
SIGNATURE = 0x07
AGGREGATE = 0x08
INNER = 0x09
PHASE = 0x0A
CAUSE = 0x0B
CULPRIT = 0x0C
SIGNER = 0x0D
SCHEME = 0x0E
ROSTER = 0x0F
ROLE = 0x10
NAME = 0x11
PUBLIC_KEY = 0x12
STATUS = 0x13
RESULT = 0x14

_U32 = struct.Struct(">I")
_U64 = struct.Struct(">Q")


class CodecError(ValueError):
    pass


class EncodeError(CodecError):
    pass


class DecodeError(CodecError):
    def __init__(self, message: str, offset: int) -> None:
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


@dataclass(frozen=True)
class SignatureBlock:
    signer: str
    signature: bytes


class Structure:
    """Base for everything the codec knows how to encode.

    Subclasses are frozen dataclasses with a trailing ``sig`` field and the
    class attributes ``TAG``, ``LAYOUT`` (``(attribute, field tag, kind)``
    triples) and ``STEP`` (the protocol step that emits it, 0 if none).
    """

    TAG: ClassVar[int]
    LAYOUT: ClassVar[tuple[tuple[str, int, str], ...]]
    STEP: ClassVar[int] = 0
    sig: Optional[SignatureBlock]

    def unsigned(self):
        return replace(self, sig=None)

    def with_sig(self, block: SignatureBlock):
        signed = replace(self, sig=block)
        unsigned = self.__dict__.get("_encoded")
        if unsigned is not None and self.sig is None:
            sig_field = bytearray()
            _put(sig_field, SIGNATURE, encode_signature(block))
            object.__setattr__(signed, "_encoded", unsigned + bytes(sig_field))
        return signed


# ---------------------------------------------------------------------------
# protocol structures, in the order they are sent


@dataclass(frozen=True)
class DrawAnnounce(Structure):
    """The initiator opens a draw over ``range(k)``."""

    TAG = 0x01
    STEP = 1
    LAYOUT = (("k", K, "u64"), ("draw_no", DRAW_NO, "u64"))
    k: int
    draw_no: int
    sig: Optional[SignatureBlock] = None


@dataclass(frozen=True)
class CounterSignedAnnounce(Structure):
    """A guarantor's countersignature on the announce."""

    TAG = 0x02
    STEP = 2
    LAYOUT = (("inner", INNER, "inner:DrawAnnounce"),)
    inner: DrawAnnounce
    sig: Optional[SignatureBlock] = None


@dataclass(frozen=True)
class AnnounceAggregate(Structure):
    """Every guarantor's countersigned announce, signed by the initiator."""

    TAG = 0x03
    STEP = 3
    LAYOUT = (("items", AGGREGATE, "items:CounterSignedAnnounce"),)
    items: tuple[CounterSignedAnnounce, ...]
    sig: Optional[SignatureBlock] = None


@dataclass(frozen=True)
class InitiatorCommit(Structure):
    """The initiator's commitment to its hidden number."""

    TAG = 0x04
    STEP = 5
    LAYOUT = (("draw_no", DRAW_NO, "u64"), ("hash", HASH, "hash"))
    draw_no: int
    hash: bytes
    sig: Optional[SignatureBlock] = None


@dataclass(frozen=True)
class CounterSignedCommit(Structure):
    """A guarantor's countersignature on the initiator's commitment."""

    TAG = 0x05
    STEP = 6
    LAYOUT = (("inner", INNER, "inner:InitiatorCommit"),)
    inner: InitiatorCommit
    sig: Optional[SignatureBlock] = None


@dataclass(frozen=True)
class CommitAggregate(Structure):
    """Every countersigned initiator commitment, signed by the initiator."""

    TAG = 0x06
    STEP = 7
    LAYOUT = (("items", AGGREGATE, "items:CounterSignedCommit"),)
    items: tuple[CounterSignedCommit, ...]
    sig: Optional[SignatureBlock] = None


@dataclass(frozen=True)
class GuarantorCommit(Structure):
    """A guarantor's commitment to its hidden permutation."""

    TAG = 0x07
    STEP = 9
    LAYOUT = (("draw_no", DRAW_NO, "u64"), ("hash", HASH, "hash"))
    draw_no: int
    hash: bytes
    sig: Optional[SignatureBlock] = None


@dataclass(frozen=True)
class GuarantorHashAggregate(Structure):
    """All guarantor commitments, signed by the initiator."""

    TAG = 0x08
    STEP = 10
    LAYOUT = (("items", AGGREGATE, "items:GuarantorCommit"),)
    items: tuple[GuarantorCommit, ...]
    sig: Optional[SignatureBlock] = None


@dataclass(frozen=True)
class CountersignedHashAggregate(Structure):
    """A guarantor's signature over the whole signed list of commitments."""

    TAG = 0x09
    STEP = 11
    LAYOUT = (("inner", INNER, "inner:GuarantorHashAggregate"),)
    inner: GuarantorHashAggregate
    sig: Optional[SignatureBlock] = None


@dataclass(frozen=True)
class InitiatorReveal(Structure):
    """The initiator opens its commitment."""

    TAG = 0x0A
    STEP = 12
    LAYOUT = (("salt", SALT, "salt"), ("draw_no", DRAW_NO, "u64"), ("number", NUMBER, "u64"))
    salt: bytes
    draw_no: int
    number: int
    sig: Optional[SignatureBlock] = None


@dataclass(frozen=True)
class GuarantorReveal(Structure):
    """A guarantor opens its commitment.

    ``perm`` is a raw one-line mapping; bijectivity is a protocol check.
    """

    TAG = 0x0B
    STEP = 13
    LAYOUT = (("salt", SALT, "salt"), ("draw_no", DRAW_NO, "u64"), ("perm", PERMUTATION, "perm"))
    salt: bytes
    draw_no: int
    perm: tuple[int, ...]
    sig: Optional[SignatureBlock] = None


@dataclass(frozen=True)
class RevealAggregate(Structure):
    """All guarantor reveals, signed by the initiator."""

    TAG = 0x0C
    STEP = 14
    LAYOUT = (("items", AGGREGATE, "items:GuarantorReveal"),)
    items: tuple[GuarantorReveal, ...]
    sig: Optional[SignatureBlock] = None


@dataclass(frozen=True)
class AbortNotice(Structure):
    """Signed error message sent by a party that stops participating."""

    TAG = 0x0D
    LAYOUT = (
        ("draw_no", DRAW_NO, "u64"),
        ("phase", PHASE, "u64"),
        ("cause", CAUSE, "text"),
        ("culprit", CULPRIT, "text?"),
    )
    draw_no: int
    phase: int
    cause: str
    culprit: str = ""
    sig: Optional[SignatureBlock] = None


@dataclass(frozen=True)
class InitiatorSecret(Structure):
    """Hidden part of the initiator reveal; its encoding is the committed secret."""

    TAG = 0x0E
    LAYOUT = (("draw_no", DRAW_NO, "u64"), ("number", NUMBER, "u64"))
    draw_no: int
    number: int
    sig: Optional[SignatureBlock] = None


@dataclass(frozen=True)
class GuarantorSecret(Structure):
    """Hidden part of a guarantor reveal; its encoding is the committed secret."""

    TAG = 0x0F
    LAYOUT = (("draw_no", DRAW_NO, "u64"), ("perm", PERMUTATION, "perm"))
    draw_no: int
    perm: tuple[int, ...]
    sig: Optional[SignatureBlock] = None


@dataclass(frozen=True)
class RosterEntry(Structure):
    TAG = 0x10
    LAYOUT = (("role", ROLE, "text"), ("name", NAME, "text"), ("public_key", PUBLIC_KEY, "bytes"))
    role: str
    name: str
    public_key: bytes
    sig: Optional[SignatureBlock] = None


@dataclass(frozen=True)
class TranscriptHeader(Structure):
    """Published outcome of one draw plus the roster needed to check it.

    ``status`` is 0 for a completed draw (``result`` valid) and 1 for an
    aborted one (``phase``/``cause``/``culprit`` describe the abort).
    """

    TAG = 0x11
    LAYOUT = (
        ("scheme", SCHEME, "u64"),
        ("draw_no", DRAW_NO, "u64"),
        ("k", K, "u64"),
        ("status", STATUS, "u64"),
        ("result", RESULT, "u64"),
        ("phase", PHASE, "u64"),
        ("cause", CAUSE, "text?"),
        ("culprit", CULPRIT, "text?"),
        ("roster", ROSTER, "items:RosterEntry"),
    )
    scheme: int
    draw_no: int
    k: int
    status: int
    result: int
    phase: int
    cause: str
    culprit: str
    roster: tuple[RosterEntry, ...]
    sig: Optional[SignatureBlock] = None


STRUCTURES: dict[int, type[Structure]] = {
    cls.TAG: cls
    for cls in (
        DrawAnnounce,
        CounterSignedAnnounce,
        AnnounceAggregate,
        InitiatorCommit,
        CounterSignedCommit,
        CommitAggregate,
        GuarantorCommit,
        GuarantorHashAggregate,
        CountersignedHashAggregate,
        InitiatorReveal,
        GuarantorReveal,
        RevealAggregate,
        AbortNotice,
        InitiatorSecret,
        GuarantorSecret,
        RosterEntry,
        TranscriptHeader,
    )
}
_BY_NAME = {cls.__name__: cls for cls in STRUCTURES.values()}

# the twelve message kinds of a draw, in step order
PROTOCOL_KINDS: tuple[type[Structure], ...] = tuple(STRUCTURES[tag] for tag in range(0x01, 0x0D))

S = TypeVar("S", bound=Structure)


# ---------------------------------------------------------------------------
# encoding


def _put(out: bytearray, tag: int, payload: bytes) -> None:
    out.append(tag)
    out += _U32.pack(len(payload))
    out += payload


def _u64(value: Any, what: str) -> bytes:
    if not isinstance(value, int) or isinstance(value, bool) or not 0 <= value <= U64_MAX:
        raise EncodeError(f"{what} must be an unsigned 64-bit integer, got {value!r}")
    return _U64.pack(value)


def _text(value: Any, what: str, optional: bool) -> bytes:
    if not isinstance(value, str) or (not value and not optional):
        raise EncodeError(f"{what} must be a{'' if optional else ' non-empty'} string")
    return value.encode("utf-8")


def _encode_value(kind: str, value: Any, what: str) -> bytes:
    if kind == "u64":
        return _u64(value, what)
    if kind in ("hash", "salt"):
        size = HASH_LEN if kind == "hash" else SALT_LEN
        if not isinstance(value, (bytes, bytearray)) or len(value) != size:
            raise EncodeError(f"{what} must be exactly {size} bytes")
        return bytes(value)
    if kind == "perm":
        mapping = tuple(value)
        k = len(mapping)
        if k < 1:
            raise EncodeError(f"{what} must be non-empty")
        for entry in mapping:
            if not isinstance(entry, int) or not 0 <= entry < k:
                raise EncodeError(f"{what} entry {entry!r} is outside range({k})")
        return _U32.pack(k) + struct.pack(f">{k}Q", *mapping)
    if kind in ("text", "text?"):
        return _text(value, what, kind == "text?")
    if kind == "bytes":
        if not isinstance(value, (bytes, bytearray)):
            raise EncodeError(f"{what} must be bytes")
        return bytes(value)
    if kind.startswith("inner:"):
        _expect_type(value, kind[6:], what)
        return encode(value)
    if kind.startswith("items:"):
        parts = [_U32.pack(len(value))]
        for item in value:
            _expect_type(item, kind[6:], what)
            body = encode(item)
            parts.append(_U32.pack(len(body)))
            parts.append(body)
        return b"".join(parts)
    raise AssertionError(kind)


def _expect_type(value: Any, name: str, what: str) -> None:
    if type(value) is not _BY_NAME[name]:
        raise EncodeError(f"{what} must be a {name}, got {type(value).__name__}")


def encode_signature(block: SignatureBlock) -> bytes:
    name = _text(block.signer, "signer id", optional=False)
    sig = bytes(block.signature)
    if not 1 <= len(sig) <= MAX_SIG_LEN:
        raise EncodeError(f"signature must be 1..{MAX_SIG_LEN} bytes")
    return _U32.pack(len(name)) + name + _U32.pack(len(sig)) + sig


def encode(s: Structure) -> bytes:
    """Canonical bytes of ``s`` (including its signature block, if any)."""
    # structures are immutable, so the encoding is computed once per instance
    cached = s.__dict__.get("_encoded")
    if cached is not None:
        return cached
    out = bytearray((s.TAG,))
    for attr, ftag, kind in s.LAYOUT:
        _put(out, ftag, _encode_value(kind, getattr(s, attr), f"{type(s).__name__}.{attr}"))
    if s.sig is not None:
        _put(out, SIGNATURE, encode_signature(s.sig))
    encoded = bytes(out)
    object.__setattr__(s, "_encoded", encoded)
    return encoded


def _unsigned_encoding(s: Structure) -> bytes:
    full = encode(s)
    if s.sig is None:
        return full
    # the signature block is always the last field
    return full[: len(full) - 5 - len(encode_signature(s.sig))]


def signing_payload(s: Structure, signer: str) -> bytes:
    """The exact bytes a signature block on ``s`` by ``signer`` covers."""
    memo = s.__dict__.get("_payloads")
    if memo is None:
        memo = {}
        object.__setattr__(s, "_payloads", memo)
    payload = memo.get(signer)
    if payload is None:
        out = bytearray(_unsigned_encoding(s))
        _put(out, SIGNER, _text(signer, "signer id", optional=False))
        payload = memo[signer] = bytes(out)
    return payload


# ---------------------------------------------------------------------------
# decoding


class _Reader:
    __slots__ = ("data", "pos", "end", "base")

    def __init__(self, data: bytes, base: int = 0) -> None:
        self.data = data
        self.pos = 0
        self.end = len(data)
        self.base = base

    def fail(self, message: str, at: Optional[int] = None) -> DecodeError:
        return DecodeError(message, self.base + (self.pos if at is None else at))

    def take(self, n: int, what: str) -> bytes:
        if self.end - self.pos < n:
            raise self.fail(f"truncated {what}: need {n} bytes, have {self.end - self.pos}")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u8(self, what: str) -> int:
        return self.take(1, what)[0]

    def u32(self, what: str) -> int:
        return _U32.unpack(self.take(4, what))[0]

    def field(self, expected_tag: int, what: str) -> tuple[int, bytes]:
        at = self.pos
        tag = self.u8(f"{what} field tag")
        if tag != expected_tag:
            raise self.fail(f"expected field tag 0x{expected_tag:02x} for {what}, got 0x{tag:02x}", at)
        length = self.u32(f"{what} length")
        start = self.pos
        return self.base + start, self.take(length, f"{what} payload")


def _decode_value(kind: str, payload: bytes, offset: int, what: str) -> Any:
    if kind == "u64":
        if len(payload) != 8:
            raise DecodeError(f"{what} must be 8 bytes, got {len(payload)}", offset)
        return _U64.unpack(payload)[0]
    if kind in ("hash", "salt"):
        size = HASH_LEN if kind == "hash" else SALT_LEN
        if len(payload) != size:
            raise DecodeError(f"{what} must be {size} bytes, got {len(payload)}", offset)
        return bytes(payload)
    if kind == "perm":
        if len(payload) < 4:
            raise DecodeError(f"{what} is missing its entry count", offset)
        k = _U32.unpack(payload[:4])[0]
        if k < 1 or len(payload) != 4 + 8 * k:
            raise DecodeError(f"{what} length does not match entry count {k}", offset)
        mapping = struct.unpack(f">{k}Q", payload[4:])
        for i, entry in enumerate(mapping):
            if entry >= k:
                raise DecodeError(f"{what} entry {entry} is outside range({k})", offset + 4 + 8 * i)
        return mapping
    if kind in ("text", "text?"):
        if not payload and kind == "text":
            raise DecodeError(f"{what} must be non-empty", offset)
        try:
            return payload.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DecodeError(f"{what} is not valid utf-8", offset + exc.start) from None
    if kind == "bytes":
        return bytes(payload)
    if kind.startswith("inner:"):
        return _decode_at(payload, _BY_NAME[kind[6:]], offset)
    if kind.startswith("items:"):
        cls = _BY_NAME[kind[6:]]
        r = _Reader(payload, offset)
        count = r.u32(f"{what} count")
        items = []
        for _ in range(count):
            length = r.u32(f"{what} item length")
            start = r.base + r.pos
            items.append(_decode_at(r.take(length, f"{what} item"), cls, start))
        if r.pos != r.end:
            raise r.fail(f"trailing bytes in {what}")
        return tuple(items)
    raise AssertionError(kind)


def _decode_signature(payload: bytes, offset: int) -> SignatureBlock:
    r = _Reader(payload, offset)
    name_len = r.u32("signer id length")
    at = r.pos
    raw_name = r.take(name_len, "signer id")
    if not raw_name:
        raise r.fail("signer id must be non-empty", at)
    try:
        name = raw_name.decode("utf-8")
    except UnicodeDecodeError:
        raise r.fail("signer id is not valid utf-8", at) from None
    sig_len = r.u32("signature length")
    if not 1 <= sig_len <= MAX_SIG_LEN:
        raise r.fail(f"signature length {sig_len} outside 1..{MAX_SIG_LEN}", r.pos - 4)
    sig = r.take(sig_len, "signature")
    if r.pos != r.end:
        raise r.fail("trailing bytes in signature block")
    return SignatureBlock(name, bytes(sig))


def _decode_at(data: bytes, expected: Optional[type[S]], base: int) -> S:
    r = _Reader(data, base)
    tag = r.u8("structure tag")
    cls = STRUCTURES.get(tag)
    if cls is None:
        raise r.fail(f"unknown structure tag 0x{tag:02x}", 0)
    if expected is not None and cls is not expected:
        raise r.fail(f"expected {expected.__name__}, got {cls.__name__}", 0)
    values = {}
    for attr, ftag, kind in cls.LAYOUT:
        what = f"{cls.__name__}.{attr}"
        offset, payload = r.field(ftag, what)
        values[attr] = _decode_value(kind, payload, offset, what)
    sig = None
    if r.pos != r.end:
        offset, payload = r.field(SIGNATURE, "signature block")
        sig = _decode_signature(payload, offset)
    if r.pos != r.end:
        raise r.fail("trailing bytes after structure")
    if "k" in values and values["k"] < 1:
        raise DecodeError("k must be at least 1", base)
    decoded = cls(**values, sig=sig)
    # strict decoding accepts only canonical bytes, so they are the encoding
    object.__setattr__(decoded, "_encoded", bytes(data))
    return decoded  # type: ignore[return-value]


def decode(data: bytes, expected: Optional[type[S]] = None) -> S:
    """Inverse of :func:`encode`.

    With ``expected`` set, any other structure kind is an error.  Every
    failure is a :class:`DecodeError` carrying the byte offset.
    """
    s = _decode_cached(bytes(data))
    if expected is not None and type(s) is not expected:
        raise DecodeError(f"expected {expected.__name__}, got {type(s).__name__}", 0)
    return s


@lru_cache(maxsize=4096)
def _decode_cached(data: bytes) -> Structure:
    # decoded structures are immutable, so parties receiving the same
    # broadcast can share one result
    return _decode_at(data, None, 0)


def peek_kind(data: bytes) -> Optional[type[Structure]]:
    return STRUCTURES.get(data[0]) if data else None


def draw_numbers(s: Structure) -> set[int]:
    """Every draw number mentioned anywhere inside ``s``."""
    found: set[int] = set()
    stack = [s]
    while stack:
        cur = stack.pop()
        no = getattr(cur, "draw_no", None)
        if no is not None:
            found.add(no)
        inner = getattr(cur, "inner", None)
        if inner is not None:
            stack.append(inner)
        stack.extend(getattr(cur, "items", ()))
    return found


def frame(chunks: Sequence[bytes]) -> bytes:
    """Concatenate length-prefixed chunks."""
    return b"".join(_U32.pack(len(c)) + c for c in chunks)


def unframe(data: bytes, offset: int = 0) -> list[bytes]:
    r = _Reader(data[offset:], offset)
    chunks = []
    while r.pos < r.end:
        length = r.u32("frame length")
        chunks.append(r.take(length, "framed structure"))
    return chunks
