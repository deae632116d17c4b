"""Minimal DER reader/writer for the PKIX structures this package speaks.

Only definite-length, low-tag-number forms are supported; that covers
X.509 certificates, CRLs, and OCSP messages. All malformed input is
reported as MalformedDer, never as an unhandled exception.
"""

from __future__ import annotations

import datetime

from ..errors import MalformedDer

# Universal tags (full identifier octet, constructed bit included where fixed).
BOOLEAN = 0x01
INTEGER = 0x02
BIT_STRING = 0x03
OCTET_STRING = 0x04
NULL = 0x05
OID = 0x06
ENUMERATED = 0x0A
UTF8_STRING = 0x0C
PRINTABLE_STRING = 0x13
IA5_STRING = 0x16
UTC_TIME = 0x17
GENERALIZED_TIME = 0x18
SEQUENCE = 0x30
SET = 0x31

_TIME_TAGS = (UTC_TIME, GENERALIZED_TIME)


def context(n: int, constructed: bool = True) -> int:
    """Identifier octet for a context-class tag [n]."""
    return (0xA0 if constructed else 0x80) | n


# --------------------------------------------------------------------------
# Encoding
# --------------------------------------------------------------------------

def encode_length(length: int) -> bytes:
    if length < 0x80:
        return bytes([length])
    body = length.to_bytes((length.bit_length() + 7) // 8, "big")
    return bytes([0x80 | len(body)]) + body


def encode_tlv(tag: int, content: bytes) -> bytes:
    return bytes([tag]) + encode_length(len(content)) + content


def encode_integer(value: int, tag: int = INTEGER) -> bytes:
    if value == 0:
        body = b"\x00"
    else:
        size = (value.bit_length() // 8) + 1
        body = value.to_bytes(size, "big", signed=True)
    return encode_tlv(tag, body)


def encode_enumerated(value: int) -> bytes:
    return encode_integer(value, tag=ENUMERATED)


def encode_boolean(value: bool) -> bytes:
    return encode_tlv(BOOLEAN, b"\xff" if value else b"\x00")


def encode_null() -> bytes:
    return encode_tlv(NULL, b"")


def encode_octet_string(value: bytes, tag: int = OCTET_STRING) -> bytes:
    return encode_tlv(tag, value)


def encode_bit_string(payload: bytes, unused_bits: int = 0) -> bytes:
    return encode_tlv(BIT_STRING, bytes([unused_bits]) + payload)


def encode_oid(dotted: str) -> bytes:
    arcs = [int(a) for a in dotted.split(".")]
    if len(arcs) < 2 or arcs[0] > 2 or (arcs[0] < 2 and arcs[1] >= 40):
        raise ValueError(f"invalid OID {dotted!r}")
    body = bytearray([arcs[0] * 40 + arcs[1]])
    for arc in arcs[2:]:
        chunk = [arc & 0x7F]
        arc >>= 7
        while arc:
            chunk.insert(0, (arc & 0x7F) | 0x80)
            arc >>= 7
        body.extend(chunk)
    return encode_tlv(OID, bytes(body))


def encode_sequence(*parts: bytes) -> bytes:
    return encode_tlv(SEQUENCE, b"".join(parts))


def encode_set(*parts: bytes) -> bytes:
    return encode_tlv(SET, b"".join(parts))


def encode_explicit(n: int, inner: bytes) -> bytes:
    """Wrap an already-encoded TLV in a context [n] EXPLICIT tag."""
    return encode_tlv(context(n), inner)


def encode_implicit(n: int, content: bytes, constructed: bool = True) -> bytes:
    """Emit content octets under a context [n] IMPLICIT tag."""
    return encode_tlv(context(n, constructed), content)


def encode_generalized_time(dt: datetime.datetime) -> bytes:
    dt = to_utc_second(dt)
    return encode_tlv(GENERALIZED_TIME, dt.strftime("%Y%m%d%H%M%SZ").encode("ascii"))


def encode_x509_time(dt: datetime.datetime) -> bytes:
    """Time CHOICE used in certificates and CRLs: UTCTime before 2050."""
    dt = to_utc_second(dt)
    if 1950 <= dt.year < 2050:
        return encode_tlv(UTC_TIME, dt.strftime("%y%m%d%H%M%SZ").encode("ascii"))
    return encode_generalized_time(dt)


def to_utc_second(dt: datetime.datetime) -> datetime.datetime:
    """Normalize to tz-aware UTC at 1-second resolution."""
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=datetime.timezone.utc)
    return dt.astimezone(datetime.timezone.utc).replace(microsecond=0)


# --------------------------------------------------------------------------
# Decoding
# --------------------------------------------------------------------------

class Reader:
    """Sequential reader over one level of DER content octets."""

    __slots__ = ("_data", "_pos", "_end")

    def __init__(self, data: bytes, start: int = 0, end: int | None = None) -> None:
        self._data = data
        self._pos = start
        self._end = len(data) if end is None else end

    def at_end(self) -> bool:
        return self._pos >= self._end

    def peek_tag(self) -> int | None:
        if self.at_end():
            return None
        tag = self._data[self._pos]
        if tag & 0x1F == 0x1F:
            raise MalformedDer("high tag numbers are not supported")
        return tag

    def _read_header(self) -> tuple[int, int, int]:
        """Returns (tag, content_start, content_end) and advances past the value."""
        tag = self.peek_tag()
        if tag is None:
            raise MalformedDer("unexpected end of input")
        pos = self._pos + 1
        if pos >= self._end:
            raise MalformedDer("truncated length")
        first = self._data[pos]
        pos += 1
        if first < 0x80:
            length = first
        elif first == 0x80:
            raise MalformedDer("indefinite lengths are not DER")
        else:
            count = first & 0x7F
            if count == 0x7F:
                raise MalformedDer("reserved length form")
            if pos + count > self._end:
                raise MalformedDer("truncated length")
            body = self._data[pos:pos + count]
            if body[0] == 0:
                raise MalformedDer("non-minimal length encoding")
            length = int.from_bytes(body, "big")
            if length < 0x80:
                raise MalformedDer("non-minimal length encoding")
            pos += count
        if pos + length > self._end:
            raise MalformedDer("value extends past end of input")
        self._pos = pos + length
        return tag, pos, pos + length

    def read_any(self) -> tuple[int, bytes, bytes]:
        """Read the next value; returns (tag, content, raw TLV bytes)."""
        start = self._pos
        tag, cs, ce = self._read_header()
        return tag, self._data[cs:ce], self._data[start:ce]

    def read(self, tag: int, what: str = "value") -> bytes:
        got = self.peek_tag()
        if got != tag:
            raise MalformedDer(f"expected {what} (tag 0x{tag:02x}), found "
                               + ("end of input" if got is None else f"tag 0x{got:02x}"))
        _, content, _ = self.read_any()
        return content

    def try_read(self, tag: int) -> bytes | None:
        if self.peek_tag() == tag:
            _, content, _ = self.read_any()
            return content
        return None

    def read_integer(self, what: str = "INTEGER") -> int:
        content = self.read(INTEGER, what)
        return parse_integer(content)

    def read_raw(self, tag: int, what: str = "value") -> bytes:
        """Read a value and return the complete TLV bytes."""
        got = self.peek_tag()
        if got != tag:
            raise MalformedDer(f"expected {what} (tag 0x{tag:02x}), found "
                               + ("end of input" if got is None else f"tag 0x{got:02x}"))
        _, _, raw = self.read_any()
        return raw

    def expect_end(self, what: str = "structure") -> None:
        if not self.at_end():
            raise MalformedDer(f"trailing data after {what}")


def parse_integer(content: bytes) -> int:
    if not content:
        raise MalformedDer("empty INTEGER")
    if len(content) > 1 and (
        (content[0] == 0x00 and not content[1] & 0x80)
        or (content[0] == 0xFF and content[1] & 0x80)
    ):
        raise MalformedDer("non-minimal INTEGER encoding")
    return int.from_bytes(content, "big", signed=True)


def parse_oid(content: bytes) -> str:
    if not content:
        raise MalformedDer("empty OID")
    arcs = [content[0] // 40, content[0] % 40]
    if content[0] >= 80:
        arcs = [2, content[0] - 80]
    value = 0
    for i, byte in enumerate(content[1:]):
        value = (value << 7) | (byte & 0x7F)
        if not byte & 0x80:
            arcs.append(value)
            value = 0
        elif value == 0:
            raise MalformedDer("non-minimal OID arc")
    if content[-1] & 0x80:
        raise MalformedDer("truncated OID arc")
    return ".".join(str(a) for a in arcs)


def parse_bit_string(content: bytes) -> bytes:
    """Payload bits of a BIT STRING, rejecting nonzero unused-bit counts."""
    if not content:
        raise MalformedDer("empty BIT STRING")
    if content[0] > 7:
        raise MalformedDer("invalid BIT STRING padding")
    if content[0] != 0:
        raise MalformedDer("BIT STRING with partial final octet not supported here")
    return content[1:]


def parse_time(tag: int, content: bytes) -> datetime.datetime:
    """UTCTime or GeneralizedTime to a tz-aware UTC datetime (1 s resolution)."""
    if tag not in _TIME_TAGS:
        raise MalformedDer(f"expected time, found tag 0x{tag:02x}")
    try:
        text = content.decode("ascii")
    except UnicodeDecodeError as exc:
        raise MalformedDer("time field is not ASCII") from exc
    if not text.endswith("Z"):
        raise MalformedDer("time without Z suffix")
    text = text[:-1]
    try:
        if tag == UTC_TIME:
            if len(text) != 12:
                raise ValueError
            parsed = datetime.datetime.strptime(text, "%y%m%d%H%M%S")
            if parsed.year >= 2050:  # strptime pivots at 1969/2068; X.509 pivots at 2050
                parsed = parsed.replace(year=parsed.year - 100)
        else:
            if len(text) != 14:
                raise ValueError
            parsed = datetime.datetime.strptime(text, "%Y%m%d%H%M%S")
    except ValueError as exc:
        raise MalformedDer(f"invalid time {content!r}") from exc
    return parsed.replace(tzinfo=datetime.timezone.utc)


def read_time(reader: Reader, what: str = "time") -> datetime.datetime:
    tag = reader.peek_tag()
    if tag not in _TIME_TAGS:
        raise MalformedDer(f"expected {what}, found "
                           + ("end of input" if tag is None else f"tag 0x{tag:02x}"))
    tag, content, _ = reader.read_any()
    return parse_time(tag, content)


def top_level(data: bytes, tag: int = SEQUENCE, what: str = "structure") -> tuple[bytes, bytes]:
    """Parse a lone top-level TLV; returns (content, raw). Trailing bytes are an error."""
    if not isinstance(data, (bytes, bytearray, memoryview)):
        raise MalformedDer(f"expected bytes, got {type(data).__name__}")
    reader = Reader(bytes(data))
    got = reader.peek_tag()
    if got != tag:
        raise MalformedDer(f"expected {what} (tag 0x{tag:02x}), found "
                           + ("end of input" if got is None else f"tag 0x{got:02x}"))
    _, content, raw = reader.read_any()
    reader.expect_end(what)
    return content, raw
