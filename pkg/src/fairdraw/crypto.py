"""Salted hash commitments, detached signatures and the mixed entropy source."""

from __future__ import annotations

import hashlib
import hmac
import os
import struct
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.asymmetric import ec, ed25519
from cryptography.hazmat.primitives.asymmetric.utils import (
    decode_dss_signature,
    encode_dss_signature,
)
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes
from cryptography.hazmat.primitives.serialization import Encoding, PublicFormat

SALT_LEN = 64
HASH_LEN = 32


class CryptoError(ValueError):
    """Malformed key or signature material (as opposed to a failed check)."""


# ---------------------------------------------------------------------------
# hashing and commitments


def sha3(data: bytes) -> bytes:
    return hashlib.sha3_256(data).digest()


def commit(secret: bytes, salt: bytes) -> bytes:
    """SHA3-256 over ``salt || secret``."""
    if len(salt) != SALT_LEN:
        raise CryptoError(f"salt must be {SALT_LEN} bytes, got {len(salt)}")
    return hashlib.sha3_256(bytes(salt) + bytes(secret)).digest()


def verify_commitment(h: bytes, secret: bytes, salt: bytes) -> bool:
    if len(salt) != SALT_LEN or len(h) != HASH_LEN:
        return False
    return hmac.compare_digest(commit(secret, salt), bytes(h))


# ---------------------------------------------------------------------------
# signature schemes
#
# Every scheme signs canonical bytes and produces at most 64 bytes.  The
# "ideal" scheme is the textbook ideal signature functionality: a
# process-wide authority issues keys and answers verification queries.  It is
# unforgeable by construction for parties that only hold their own key, and
# is only meaningful inside one simulator process.

ED25519 = 1
ECDSA_P256 = 2
IDEAL = 0xF0

SCHEME_NAMES = {ED25519: "ed25519", ECDSA_P256: "ecdsa-p256", IDEAL: "ideal"}
SCHEME_IDS = {name: sid for sid, name in SCHEME_NAMES.items()}
FILE_SCHEMES = (ED25519, ECDSA_P256)

_ECDSA = ec.ECDSA(hashes.SHA256(), deterministic_signing=True)
_ideal_authority: dict[bytes, bytes] = {}


def scheme_id(name_or_id: "str | int") -> int:
    if isinstance(name_or_id, int):
        if name_or_id not in SCHEME_NAMES:
            raise CryptoError(f"unknown signature scheme id {name_or_id}")
        return name_or_id
    try:
        return SCHEME_IDS[name_or_id]
    except KeyError:
        raise CryptoError(f"unknown signature scheme {name_or_id!r}") from None


@dataclass(frozen=True)
class KeyPair:
    scheme: int
    secret: bytes = field(repr=False)
    public: bytes

    @classmethod
    def generate(cls, scheme: "str | int" = ED25519, seed: Optional[bytes] = None) -> KeyPair:
        """New key pair; ``seed`` (32 bytes) makes generation deterministic."""
        sid = scheme_id(scheme)
        if seed is not None and len(seed) != 32:
            raise CryptoError("key seed must be 32 bytes")
        if sid == ED25519:
            sk = seed if seed is not None else os.urandom(32)
        elif sid == ECDSA_P256:
            material = seed if seed is not None else os.urandom(32)
            # reduce into [1, n-1]
            n = 0xFFFFFFFF00000000FFFFFFFFFFFFFFFFBCE6FAADA7179E84F3B9CAC2FC632551
            scalar = int.from_bytes(hashlib.sha3_512(b"p256" + material).digest(), "big") % (n - 1) + 1
            sk = scalar.to_bytes(32, "big")
        else:
            sk = seed if seed is not None else os.urandom(32)
        return cls.from_secret(sid, sk)

    @classmethod
    def from_secret(cls, scheme: "str | int", secret: bytes) -> KeyPair:
        sid = scheme_id(scheme)
        if len(secret) != 32:
            raise CryptoError("secret key must be 32 bytes")
        if sid == ED25519:
            pk = ed25519.Ed25519PrivateKey.from_private_bytes(secret).public_key()
            public = pk.public_bytes(Encoding.Raw, PublicFormat.Raw)
        elif sid == ECDSA_P256:
            try:
                key = ec.derive_private_key(int.from_bytes(secret, "big"), ec.SECP256R1())
            except ValueError as exc:
                raise CryptoError(f"invalid P-256 secret: {exc}") from None
            public = key.public_key().public_bytes(Encoding.X962, PublicFormat.CompressedPoint)
        else:
            public = hashlib.sha3_256(b"ideal-pk" + secret).digest()
            _ideal_authority[public] = bytes(secret)
        return cls(sid, bytes(secret), public)


@lru_cache(maxsize=256)
def _ed25519_private(secret: bytes) -> ed25519.Ed25519PrivateKey:
    return ed25519.Ed25519PrivateKey.from_private_bytes(secret)


@lru_cache(maxsize=256)
def _ecdsa_private(secret: bytes) -> ec.EllipticCurvePrivateKey:
    return ec.derive_private_key(int.from_bytes(secret, "big"), ec.SECP256R1())


@lru_cache(maxsize=256)
def _public_key(scheme: int, public: bytes):
    try:
        if scheme == ED25519:
            return ed25519.Ed25519PublicKey.from_public_bytes(public)
        if scheme == ECDSA_P256:
            return ec.EllipticCurvePublicKey.from_encoded_point(ec.SECP256R1(), public)
    except ValueError as exc:
        raise CryptoError(f"malformed {SCHEME_NAMES[scheme]} public key: {exc}") from None
    raise CryptoError(f"unknown signature scheme id {scheme}")


def _ideal_sig(secret: bytes, m: bytes) -> bytes:
    return hashlib.sha3_512(b"ideal-sig" + secret + m).digest()


def sign(key: KeyPair, m: bytes) -> bytes:
    if key.scheme == ED25519:
        return _ed25519_private(key.secret).sign(m)
    if key.scheme == ECDSA_P256:
        r, s = decode_dss_signature(_ecdsa_private(key.secret).sign(m, _ECDSA))
        return r.to_bytes(32, "big") + s.to_bytes(32, "big")
    if key.scheme == IDEAL:
        if _ideal_authority.get(key.public) != key.secret:
            raise CryptoError("ideal key was not issued by this process")
        return _ideal_sig(key.secret, m)
    raise CryptoError(f"unknown signature scheme id {key.scheme}")


def verify(scheme: int, public: bytes, m: bytes, sig: bytes) -> bool:
    """True iff ``sig`` is a valid signature on exactly ``m`` under ``public``.

    Malformed keys raise :class:`CryptoError`; a signature of the wrong
    length for the scheme is simply invalid.
    """
    if scheme == IDEAL:
        if len(public) != 32:
            raise CryptoError("malformed ideal public key")
        secret = _ideal_authority.get(bytes(public))
        return secret is not None and hmac.compare_digest(_ideal_sig(secret, m), bytes(sig))
    return _verify_cached(scheme, bytes(public), bytes(m), bytes(sig))


@lru_cache(maxsize=8192)
def _verify_cached(scheme: int, public: bytes, m: bytes, sig: bytes) -> bool:
    # pure function of its arguments; every party in a simulation re-checks
    # the same signatures, so the cache only removes repeated work
    pk = _public_key(scheme, public)
    if len(sig) != 64:
        return False
    try:
        if scheme == ED25519:
            pk.verify(sig, m)
        else:
            r = int.from_bytes(sig[:32], "big")
            s = int.from_bytes(sig[32:], "big")
            pk.verify(encode_dss_signature(r, s), m, _ECDSA)
    except InvalidSignature:
        return False
    return True


# key files: 4-byte magic, 1-byte scheme id, raw key bytes

PUBLIC_MAGIC = b"FDPK"
SECRET_MAGIC = b"FDSK"


def dump_public(key: KeyPair) -> bytes:
    return PUBLIC_MAGIC + bytes((key.scheme,)) + key.public


def dump_secret(key: KeyPair) -> bytes:
    return SECRET_MAGIC + bytes((key.scheme,)) + key.secret


def load_public(data: bytes) -> tuple[int, bytes]:
    if len(data) < 6 or data[:4] != PUBLIC_MAGIC:
        raise CryptoError("not a public key file")
    sid = scheme_id(data[4])
    public = bytes(data[5:])
    _public_key(sid, public)
    return sid, public


def load_secret(data: bytes) -> KeyPair:
    if len(data) != 37 or data[:4] != SECRET_MAGIC:
        raise CryptoError("not a secret key file")
    return KeyPair.from_secret(data[4], bytes(data[5:]))


# ---------------------------------------------------------------------------
# entropy


class EntropySource:
    """Random bytes from a raw source XORed with an AES-256-CTR keystream.

    ``seeded`` mode derives both streams from a 32-byte seed (SHAKE-256 for
    the raw stream), so output is a pure function of the seed.  ``system``
    mode reads the raw stream from ``os.urandom`` and keys the cipher from it
    once.  Instances are single-owner; do not share one across draws.
    """

    CHUNK = 256

    def __init__(self, mode: str, seed: Optional[bytes] = None) -> None:
        if mode not in ("seeded", "system"):
            raise ValueError(f"unknown entropy mode {mode!r}")
        if mode == "seeded" and (seed is None or len(seed) != 32):
            raise ValueError("seeded mode needs a 32-byte seed")
        self.mode = mode
        self._seed = seed
        self._counter = 0
        self._buf = b""
        key = sha3(b"prng-key" + seed) if mode == "seeded" else os.urandom(32)
        self._keystream = Cipher(algorithms.AES(key), modes.CTR(bytes(16))).encryptor()

    @classmethod
    def seeded(cls, seed: bytes) -> EntropySource:
        return cls("seeded", seed)

    @classmethod
    def system(cls) -> EntropySource:
        return cls("system")

    def _raw(self, n: int) -> bytes:
        if self.mode == "system":
            return os.urandom(n)
        block = hashlib.shake_256(b"raw" + self._seed + struct.pack(">Q", self._counter)).digest(n)
        self._counter += 1
        return block

    def read(self, n: int) -> bytes:
        while len(self._buf) < n:
            raw = self._raw(self.CHUNK)
            mask = self._keystream.update(bytes(self.CHUNK))
            mixed = (int.from_bytes(raw, "big") ^ int.from_bytes(mask, "big")).to_bytes(self.CHUNK, "big")
            self._buf += mixed
        out, self._buf = self._buf[:n], self._buf[n:]
        return out

    def salt(self) -> bytes:
        return self.read(SALT_LEN)

    def next_below(self, k: int) -> int:
        """Uniform integer in ``[0, k)`` by masked rejection sampling."""
        if k < 1:
            raise ValueError("k must be at least 1")
        if k == 1:
            return 0
        bits = (k - 1).bit_length()
        nbytes = (bits + 7) // 8
        mask = (1 << bits) - 1
        while True:
            x = int.from_bytes(self.read(nbytes), "big") & mask
            if x < k:
                return x


def next_below(src: EntropySource, k: int) -> int:
    return src.next_below(k)


def derive_seed(*parts: "bytes | str | int") -> bytes:
    """32-byte seed bound to a tuple of labels (length-prefixed, so unambiguous)."""
    h = hashlib.sha3_256(b"fairdraw-seed")
    for part in parts:
        if isinstance(part, str):
            part = part.encode("utf-8")
        elif isinstance(part, int):
            part = part.to_bytes(8, "big")
        h.update(len(part).to_bytes(4, "big") + part)
    return h.digest()
