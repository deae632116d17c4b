"""Signed collections: many certificates' revocation bits under one signature.

A collection packs bit i = revocation bit of certificate index i into a
byte array (most significant bit first) and signs a length-prefixed
serialization of (name, issued_at, bit_count, bitmap) exactly once,
however many bits are covered.
"""

from __future__ import annotations

import datetime
import enum
import struct
from dataclasses import dataclass, field
from pathlib import Path

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.asymmetric import ec

from .codec.der import to_utc_second
from .codec.verify import sign_data
from .errors import CollectionFull, IndexOutOfRange, MalformedDer

MAGIC = b"SGSC"
VERSION = 1

DEFAULT_BIT_COUNT = 1 << 20


class CollectionStatus(enum.Enum):
    REVOKED = "REVOKED"
    VALID = "VALID"


class CountingSigner:
    """EC signing key wrapper that counts signing operations."""

    def __init__(self, private_key: ec.EllipticCurvePrivateKey) -> None:
        self._key = private_key
        self.sign_count = 0

    def sign(self, data: bytes) -> bytes:
        self.sign_count += 1
        return sign_data(self._key, data)

    def public_key(self) -> ec.EllipticCurvePublicKey:
        return self._key.public_key()


@dataclass(frozen=True)
class SignedCollection:
    name: str
    issued_at: datetime.datetime
    bit_count: int
    bitmap: bytes = field(repr=False)
    signature: bytes = field(repr=False)

    def __post_init__(self) -> None:
        expected = (self.bit_count + 7) // 8
        if len(self.bitmap) != expected:
            raise MalformedDer(
                f"bitmap is {len(self.bitmap)} bytes, expected {expected} "
                f"for {self.bit_count} bits")
        trailing = len(self.bitmap) * 8 - self.bit_count
        if trailing and self.bitmap[-1] & ((1 << trailing) - 1):
            raise MalformedDer("unused trailing bitmap bits must be zero")


def pack_bits(statuses) -> bytes:
    bitmap = bytearray((len(statuses) + 7) // 8)
    for i, revoked in enumerate(statuses):
        if revoked:
            bitmap[i >> 3] |= 0x80 >> (i & 7)
    return bytes(bitmap)


def signed_payload(name: str, issued_at: datetime.datetime,
                   bit_count: int, bitmap: bytes) -> bytes:
    """Length-prefixed field concatenation in fixed order; this exact byte
    string is what the signature covers."""
    name_bytes = name.encode("utf-8")
    issued = struct.pack(">Q", int(to_utc_second(issued_at).timestamp()))
    count = struct.pack(">I", bit_count)
    parts = []
    for chunk in (name_bytes, issued, count, bitmap):
        parts.append(struct.pack(">I", len(chunk)))
        parts.append(chunk)
    return b"".join(parts)


def build_collection(name: str, statuses, issued_at: datetime.datetime,
                     signer: CountingSigner) -> SignedCollection:
    """One signature operation regardless of how many bits are packed."""
    if not len(statuses):
        raise ValueError("statuses must be non-empty")
    bitmap = pack_bits(statuses)
    issued_at = to_utc_second(issued_at)
    signature = signer.sign(signed_payload(name, issued_at, len(statuses), bitmap))
    return SignedCollection(
        name=name, issued_at=issued_at, bit_count=len(statuses),
        bitmap=bitmap, signature=signature)


def status_at(collection: SignedCollection, index: int) -> CollectionStatus:
    if not 0 <= index < collection.bit_count:
        raise IndexOutOfRange(
            f"index {index} outside collection of {collection.bit_count} bits")
    bit = collection.bitmap[index >> 3] & (0x80 >> (index & 7))
    return CollectionStatus.REVOKED if bit else CollectionStatus.VALID


def verify_collection(collection: SignedCollection,
                      public_key: ec.EllipticCurvePublicKey) -> bool:
    try:
        payload = signed_payload(collection.name, collection.issued_at,
                                 collection.bit_count, collection.bitmap)
        public_key.verify(collection.signature, payload, ec.ECDSA(hashes.SHA256()))
    except (InvalidSignature, ValueError, OverflowError):
        return False
    return True


# --------------------------------------------------------------------------
# Index assignment
# --------------------------------------------------------------------------

@dataclass
class CollectionAssignment:
    """Stable serial -> (collection name, index) mapping; single writer."""

    bit_count: int = DEFAULT_BIT_COUNT
    generations: list[str] = field(default_factory=list)
    next_free_index: dict[str, int] = field(default_factory=dict)
    by_serial: dict[int, tuple[str, int]] = field(default_factory=dict)

    def add_generation(self, name: str) -> None:
        if name in self.next_free_index:
            raise ValueError(f"collection {name!r} already exists")
        self.generations.append(name)
        self.next_free_index[name] = 0


def assign_index(assignment: CollectionAssignment, serial: int) -> tuple[str, int]:
    existing = assignment.by_serial.get(serial)
    if existing is not None:
        return existing
    if not assignment.generations:
        assignment.add_generation("sc-0")
    name = assignment.generations[-1]
    index = assignment.next_free_index[name]
    if index >= assignment.bit_count:
        raise CollectionFull(
            f"collection {name!r} has no free index (bit_count={assignment.bit_count})")
    assignment.next_free_index[name] = index + 1
    assignment.by_serial[serial] = (name, index)
    return name, index


# --------------------------------------------------------------------------
# File format
# --------------------------------------------------------------------------

def save_collection(collection: SignedCollection, path: str | Path) -> None:
    payload = signed_payload(collection.name, collection.issued_at,
                             collection.bit_count, collection.bitmap)
    blob = MAGIC + bytes([VERSION]) + struct.pack(">I", len(payload)) + payload \
        + struct.pack(">H", len(collection.signature)) + collection.signature
    Path(path).write_bytes(blob)


def load_collection(path: str | Path) -> SignedCollection:
    blob = Path(path).read_bytes()
    if blob[:4] != MAGIC:
        raise MalformedDer("not a signed-collection file (bad magic)")
    if len(blob) < 9 or blob[4] != VERSION:
        raise MalformedDer("unsupported signed-collection version")
    (payload_len,) = struct.unpack(">I", blob[5:9])
    payload = blob[9:9 + payload_len]
    if len(payload) != payload_len:
        raise MalformedDer("truncated signed-collection payload")
    offset = 9 + payload_len
    (sig_len,) = struct.unpack(">H", blob[offset:offset + 2])
    signature = blob[offset + 2:offset + 2 + sig_len]
    if len(signature) != sig_len:
        raise MalformedDer("truncated signed-collection signature")

    fields = []
    pos = 0
    for _ in range(4):
        if pos + 4 > len(payload):
            raise MalformedDer("truncated signed-collection field")
        (length,) = struct.unpack(">I", payload[pos:pos + 4])
        pos += 4
        if pos + length > len(payload):
            raise MalformedDer("truncated signed-collection field")
        fields.append(payload[pos:pos + length])
        pos += length
    name = fields[0].decode("utf-8")
    issued_at = datetime.datetime.fromtimestamp(
        struct.unpack(">Q", fields[1])[0], tz=datetime.timezone.utc)
    (bit_count,) = struct.unpack(">I", fields[2])
    return SignedCollection(name=name, issued_at=issued_at, bit_count=bit_count,
                            bitmap=fields[3], signature=signature)


def dump_collection(collection: SignedCollection, sample: int = 64) -> str:
    revoked = sum(bin(b).count("1") for b in collection.bitmap)
    head = "".join(
        "1" if status_at(collection, i) is CollectionStatus.REVOKED else "0"
        for i in range(min(sample, collection.bit_count)))
    return "\n".join([
        f"name: {collection.name}",
        f"issued_at: {collection.issued_at.strftime('%Y-%m-%d %H:%M:%S')}",
        f"bit_count: {collection.bit_count}",
        f"revoked_bits: {revoked}",
        f"bitmap[:{min(sample, collection.bit_count)}]: {head}",
        f"signature: {collection.signature.hex()}",
    ])
