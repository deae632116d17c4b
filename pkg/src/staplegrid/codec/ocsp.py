"""OCSP request/response model and DER codec.

Encoding covers everything the stack produces (multi-certificate
requests, signed multi-entry responses, nonces). Decoding additionally
accepts RSA-with-SHA256 signed responses from foreign responders.
"""

from __future__ import annotations

import datetime
import enum
import hashlib
from dataclasses import dataclass, field

from ..errors import (
    InvalidWindow,
    IssuerMismatch,
    MalformedDer,
    UnsupportedAlgorithm,
)
from . import der, oids
from .crl import RevocationReason
from .x509 import CertMeta, DistinguishedName, parse_certificate, parse_name, public_key_bits

NONCE_MIN = 8
NONCE_MAX = 32


class HashAlg(enum.Enum):
    SHA1 = ("sha1", oids.SHA1, 20)
    SHA256 = ("sha256", oids.SHA256, 32)

    def __init__(self, algo: str, oid: str, digest_len: int) -> None:
        self.algo = algo
        self.oid = oid
        self.digest_len = digest_len

    def digest(self, data: bytes) -> bytes:
        return hashlib.new(self.algo, data).digest()

    @classmethod
    def from_oid(cls, oid: str) -> "HashAlg":
        for member in cls:
            if member.oid == oid:
                return member
        raise UnsupportedAlgorithm(oid, "CertID hash")


class ResponseStatus(enum.IntEnum):
    SUCCESSFUL = 0
    MALFORMED_REQUEST = 1
    INTERNAL_ERROR = 2
    TRY_LATER = 3
    UNAUTHORIZED = 6


class StatusKind(enum.Enum):
    GOOD = "GOOD"
    REVOKED = "REVOKED"
    UNKNOWN = "UNKNOWN"


@dataclass(frozen=True, slots=True)
class CertStatus:
    kind: StatusKind
    revocation_time: datetime.datetime | None = None
    reason: RevocationReason | None = None

    @classmethod
    def good(cls) -> "CertStatus":
        return _GOOD

    @classmethod
    def unknown(cls) -> "CertStatus":
        return _UNKNOWN

    @classmethod
    def revoked(cls, revocation_time: datetime.datetime,
                reason: RevocationReason = RevocationReason.UNSPECIFIED) -> "CertStatus":
        return cls(StatusKind.REVOKED, der.to_utc_second(revocation_time), reason)


_GOOD = CertStatus(StatusKind.GOOD)
_UNKNOWN = CertStatus(StatusKind.UNKNOWN)


@dataclass(frozen=True, slots=True)
class CertId:
    hash_alg: HashAlg
    issuer_name_hash: bytes
    issuer_key_hash: bytes
    serial_number: int

    def __post_init__(self) -> None:
        want = self.hash_alg.digest_len
        if len(self.issuer_name_hash) != want or len(self.issuer_key_hash) != want:
            raise MalformedDer(
                f"CertID hash lengths must be {want} bytes for {self.hash_alg.name}")


@dataclass(frozen=True)
class OcspRequest:
    cert_ids: tuple[CertId, ...]
    nonce: bytes | None = None

    def __post_init__(self) -> None:
        if not self.cert_ids:
            raise MalformedDer("OCSP request must carry at least one CertID")
        if self.nonce is not None and not NONCE_MIN <= len(self.nonce) <= NONCE_MAX:
            raise MalformedDer(
                f"nonce length {len(self.nonce)} outside [{NONCE_MIN}, {NONCE_MAX}]")


@dataclass(frozen=True)
class SingleResponse:
    cert_id: CertId
    status: CertStatus
    this_update: datetime.datetime
    next_update: datetime.datetime | None = None

    def __post_init__(self) -> None:
        if self.next_update is not None and self.this_update >= self.next_update:
            raise InvalidWindow(
                f"thisUpdate {self.this_update} must precede nextUpdate {self.next_update}")


@dataclass(frozen=True)
class ResponderId:
    """byName or byKey responder identity; exactly one side is set."""

    name: DistinguishedName | None = None
    key_hash: bytes | None = None

    def __post_init__(self) -> None:
        if (self.name is None) == (self.key_hash is None):
            raise MalformedDer("responder ID must be byName or byKey")

    @classmethod
    def by_name(cls, name: DistinguishedName) -> "ResponderId":
        return cls(name=name)

    @classmethod
    def by_key(cls, key_hash: bytes) -> "ResponderId":
        return cls(key_hash=key_hash)


@dataclass(frozen=True)
class OcspResponse:
    response_status: ResponseStatus
    produced_at: datetime.datetime | None = None
    responder_id: ResponderId | None = None
    single_responses: tuple[SingleResponse, ...] = ()
    nonce_echo: bytes | None = None
    signature_alg: str = ""
    signature: bytes = field(repr=False, default=b"")
    signer_certs: tuple[bytes, ...] = field(repr=False, default=())
    raw_der: bytes = field(repr=False, default=b"")
    tbs_der: bytes = field(repr=False, default=b"")

    def to_der(self) -> bytes:
        return self.raw_der

    def single_for(self, cert_id: CertId) -> SingleResponse | None:
        for single in self.single_responses:
            if single.cert_id == cert_id:
                return single
        return None


# --------------------------------------------------------------------------
# CertID
# --------------------------------------------------------------------------

def compute_cert_id(subject: CertMeta, issuer: CertMeta | bytes,
                    hash_alg: HashAlg = HashAlg.SHA1) -> CertId:
    """RFC 6960 CertID: issuer name/key hashes plus the subject serial."""
    issuer_meta = parse_certificate(issuer) if isinstance(issuer, (bytes, bytearray)) else issuer
    if subject.issuer_dn.raw != issuer_meta.subject_dn.raw:
        raise IssuerMismatch(
            f"certificate issuer {subject.issuer_dn} does not match "
            f"issuer certificate subject {issuer_meta.subject_dn}")
    return CertId(
        hash_alg=hash_alg,
        issuer_name_hash=hash_alg.digest(issuer_meta.subject_dn.raw),
        issuer_key_hash=hash_alg.digest(public_key_bits(issuer_meta.public_key_info)),
        serial_number=subject.serial_number,
    )


def _encode_cert_id(cert_id: CertId) -> bytes:
    return der.encode_sequence(
        der.encode_sequence(der.encode_oid(cert_id.hash_alg.oid), der.encode_null()),
        der.encode_octet_string(cert_id.issuer_name_hash),
        der.encode_octet_string(cert_id.issuer_key_hash),
        der.encode_integer(cert_id.serial_number),
    )


def _read_cert_id(reader: der.Reader) -> CertId:
    body = der.Reader(reader.read(der.SEQUENCE, "CertID"))
    alg = der.Reader(body.read(der.SEQUENCE, "hashAlgorithm"))
    hash_alg = HashAlg.from_oid(der.parse_oid(alg.read(der.OID, "hash OID")))
    name_hash = body.read(der.OCTET_STRING, "issuerNameHash")
    key_hash = body.read(der.OCTET_STRING, "issuerKeyHash")
    serial = body.read_integer("serialNumber")
    body.expect_end("CertID")
    return CertId(hash_alg, name_hash, key_hash, serial)


# --------------------------------------------------------------------------
# Nonce extension
# --------------------------------------------------------------------------

def _encode_nonce_extensions(nonce: bytes) -> bytes:
    return der.encode_sequence(der.encode_sequence(
        der.encode_oid(oids.OCSP_NONCE),
        der.encode_octet_string(der.encode_octet_string(nonce)),
    ))


def _extract_nonce(extensions_raw: bytes) -> bytes | None:
    reader = der.Reader(extensions_raw)
    while not reader.at_end():
        ext = der.Reader(reader.read(der.SEQUENCE, "Extension"))
        oid = der.parse_oid(ext.read(der.OID, "extension OID"))
        ext.try_read(der.BOOLEAN)
        value = ext.read(der.OCTET_STRING, "extension value")
        if oid == oids.OCSP_NONCE:
            inner = der.Reader(value)
            if inner.peek_tag() == der.OCTET_STRING:
                return inner.read(der.OCTET_STRING, "nonce")
            return value  # pre-RFC 8954 responders put raw bytes here
    return None


# --------------------------------------------------------------------------
# Request codec
# --------------------------------------------------------------------------

def encode_ocsp_request(request: OcspRequest) -> bytes:
    requests = [der.encode_sequence(_encode_cert_id(cid)) for cid in request.cert_ids]
    tbs_parts = [der.encode_sequence(*requests)]
    if request.nonce is not None:
        tbs_parts.append(der.encode_explicit(2, _encode_nonce_extensions(request.nonce)))
    return der.encode_sequence(der.encode_sequence(*tbs_parts))


def decode_ocsp_request(data: bytes) -> OcspRequest:
    content, _ = der.top_level(data, der.SEQUENCE, "OCSPRequest")
    outer = der.Reader(content)
    tbs = der.Reader(outer.read(der.SEQUENCE, "tbsRequest"))
    while not outer.at_end():
        outer.read_any()  # optionalSignature, ignored

    version_raw = tbs.try_read(der.context(0))
    if version_raw is not None:
        version = der.parse_integer(der.Reader(version_raw).read(der.INTEGER, "version"))
        if version != 0:
            raise MalformedDer(f"unsupported OCSP request version {version}")
    tbs.try_read(der.context(1))  # requestorName, ignored

    cert_ids: list[CertId] = []
    request_list = der.Reader(tbs.read(der.SEQUENCE, "requestList"))
    while not request_list.at_end():
        single = der.Reader(request_list.read(der.SEQUENCE, "Request"))
        cert_ids.append(_read_cert_id(single))
        single.try_read(der.context(0))  # singleRequestExtensions, ignored

    nonce = None
    extensions_raw = tbs.try_read(der.context(2))
    if extensions_raw is not None:
        ext_reader = der.Reader(extensions_raw)
        nonce = _extract_nonce(ext_reader.read(der.SEQUENCE, "requestExtensions"))
    tbs.expect_end("tbsRequest")
    return OcspRequest(cert_ids=tuple(cert_ids), nonce=nonce)


# --------------------------------------------------------------------------
# Response codec
# --------------------------------------------------------------------------

def _encode_single_response(single: SingleResponse) -> bytes:
    status = single.status
    if status.kind is StatusKind.GOOD:
        status_der = der.encode_implicit(0, b"", constructed=False)
    elif status.kind is StatusKind.UNKNOWN:
        status_der = der.encode_implicit(2, b"", constructed=False)
    else:
        if status.revocation_time is None:
            raise InvalidWindow("REVOKED status requires a revocation time")
        revoked = der.encode_generalized_time(status.revocation_time)
        if status.reason is not None:
            revoked += der.encode_explicit(0, der.encode_enumerated(int(status.reason)))
        status_der = der.encode_implicit(1, revoked)
    parts = [_encode_cert_id(single.cert_id), status_der,
             der.encode_generalized_time(single.this_update)]
    if single.next_update is not None:
        parts.append(der.encode_explicit(0, der.encode_generalized_time(single.next_update)))
    return der.encode_sequence(*parts)


def _read_single_response(reader: der.Reader) -> SingleResponse:
    body = der.Reader(reader.read(der.SEQUENCE, "SingleResponse"))
    cert_id = _read_cert_id(body)
    tag = body.peek_tag()
    if tag == der.context(0, constructed=False):
        body.read_any()
        status = CertStatus.good()
    elif tag == der.context(2, constructed=False):
        body.read_any()
        status = CertStatus.unknown()
    elif tag == der.context(1):
        revoked = der.Reader(body.read(der.context(1), "RevokedInfo"))
        when = der.read_time(revoked, "revocationTime")
        reason = None
        reason_raw = revoked.try_read(der.context(0))
        if reason_raw is not None:
            code = der.parse_integer(
                der.Reader(reason_raw).read(der.ENUMERATED, "revocationReason"))
            try:
                reason = RevocationReason(code)
            except ValueError as exc:
                raise MalformedDer(f"unknown revocation reason {code}") from exc
        status = CertStatus(StatusKind.REVOKED, when, reason)
    else:
        raise MalformedDer("unrecognized certStatus choice")
    this_update = der.read_time(body, "thisUpdate")
    next_update = None
    next_raw = body.try_read(der.context(0))
    if next_raw is not None:
        next_reader = der.Reader(next_raw)
        tag, content, _ = next_reader.read_any()
        next_update = der.parse_time(tag, content)
    body.try_read(der.context(1))  # singleExtensions, ignored
    body.expect_end("SingleResponse")
    return SingleResponse(cert_id, status, this_update, next_update)


_SUPPORTED_RESPONSE_SIG_ALGS = (oids.ECDSA_WITH_SHA256, oids.SHA256_WITH_RSA)


def encode_ocsp_response(
    status: ResponseStatus,
    *,
    produced_at: datetime.datetime | None = None,
    responder_id: ResponderId | None = None,
    single_responses: tuple[SingleResponse, ...] | list[SingleResponse] = (),
    nonce_echo: bytes | None = None,
    signing_key=None,
    signer_certs: tuple[bytes, ...] | list[bytes] = (),
) -> bytes:
    """Encode (and for SUCCESSFUL, sign) an OCSPResponse.

    Error statuses carry no response body and need no signing key.
    """
    from .verify import sign_data, signature_algorithm_for_key

    if status is not ResponseStatus.SUCCESSFUL:
        return der.encode_sequence(der.encode_enumerated(int(status)))

    singles = tuple(single_responses)
    if not singles:
        raise MalformedDer("a SUCCESSFUL response needs at least one SingleResponse")
    if produced_at is None or responder_id is None or signing_key is None:
        raise MalformedDer("SUCCESSFUL responses need produced_at, responder_id, signing key")
    produced_at = der.to_utc_second(produced_at)
    for single in singles:
        when = single.status.revocation_time
        if single.status.kind is StatusKind.REVOKED and when is not None and when > produced_at:
            raise InvalidWindow(
                f"revocation time {when} is after producedAt {produced_at}")

    if responder_id.name is not None:
        rid_der = der.encode_explicit(1, responder_id.name.raw)
    else:
        rid_der = der.encode_explicit(2, der.encode_octet_string(responder_id.key_hash))

    tbs_parts = [
        rid_der,
        der.encode_generalized_time(produced_at),
        der.encode_sequence(*(_encode_single_response(s) for s in singles)),
    ]
    if nonce_echo is not None:
        tbs_parts.append(der.encode_explicit(1, _encode_nonce_extensions(nonce_echo)))
    tbs = der.encode_sequence(*tbs_parts)

    alg_oid = signature_algorithm_for_key(signing_key)
    if alg_oid != oids.ECDSA_WITH_SHA256:
        raise UnsupportedAlgorithm(alg_oid, "response signing supports ECDSA P-256 only")
    signature = sign_data(signing_key, tbs)

    basic_parts = [tbs, der.encode_sequence(der.encode_oid(alg_oid)),
                   der.encode_bit_string(signature)]
    if signer_certs:
        basic_parts.append(der.encode_explicit(0, der.encode_sequence(
            *(bytes(c) for c in signer_certs))))
    basic = der.encode_sequence(*basic_parts)

    return der.encode_sequence(
        der.encode_enumerated(int(ResponseStatus.SUCCESSFUL)),
        der.encode_explicit(0, der.encode_sequence(
            der.encode_oid(oids.OCSP_BASIC),
            der.encode_octet_string(basic),
        )),
    )


def decode_ocsp_response(data: bytes) -> OcspResponse:
    data = bytes(data)
    content, raw = der.top_level(data, der.SEQUENCE, "OCSPResponse")
    outer = der.Reader(content)
    status_code = der.parse_integer(outer.read(der.ENUMERATED, "responseStatus"))
    try:
        status = ResponseStatus(status_code)
    except ValueError as exc:
        raise MalformedDer(f"unsupported responseStatus {status_code}") from exc

    response_bytes_raw = outer.try_read(der.context(0))
    outer.expect_end("OCSPResponse")
    if status is not ResponseStatus.SUCCESSFUL:
        return OcspResponse(response_status=status, raw_der=raw)
    if response_bytes_raw is None:
        raise MalformedDer("SUCCESSFUL response without responseBytes")

    rb = der.Reader(der.Reader(response_bytes_raw).read(der.SEQUENCE, "ResponseBytes"))
    response_type = der.parse_oid(rb.read(der.OID, "responseType"))
    if response_type != oids.OCSP_BASIC:
        raise UnsupportedAlgorithm(response_type, "response type")
    basic_raw = rb.read(der.OCTET_STRING, "response")

    basic = der.Reader(der.top_level(basic_raw, der.SEQUENCE, "BasicOCSPResponse")[0])
    tbs_raw = basic.read_raw(der.SEQUENCE, "tbsResponseData")
    alg_reader = der.Reader(basic.read(der.SEQUENCE, "signatureAlgorithm"))
    signature_alg = der.parse_oid(alg_reader.read(der.OID, "signature OID"))
    if signature_alg not in _SUPPORTED_RESPONSE_SIG_ALGS:
        raise UnsupportedAlgorithm(signature_alg, "response signature")
    signature = der.parse_bit_string(basic.read(der.BIT_STRING, "signature"))
    signer_certs: tuple[bytes, ...] = ()
    certs_raw = basic.try_read(der.context(0))
    if certs_raw is not None:
        certs_reader = der.Reader(der.Reader(certs_raw).read(der.SEQUENCE, "certs"))
        collected = []
        while not certs_reader.at_end():
            collected.append(certs_reader.read_raw(der.SEQUENCE, "certificate"))
        signer_certs = tuple(collected)

    tbs = der.Reader(der.top_level(tbs_raw, der.SEQUENCE, "ResponseData")[0])
    version_raw = tbs.try_read(der.context(0))
    if version_raw is not None:
        version = der.parse_integer(der.Reader(version_raw).read(der.INTEGER, "version"))
        if version != 0:
            raise MalformedDer(f"unsupported response version {version}")
    if tbs.peek_tag() == der.context(1):
        name_raw = tbs.try_read(der.context(1))
        responder_id = ResponderId.by_name(parse_name(name_raw))
    elif tbs.peek_tag() == der.context(2):
        key_raw = der.Reader(tbs.try_read(der.context(2)))
        responder_id = ResponderId.by_key(key_raw.read(der.OCTET_STRING, "KeyHash"))
    else:
        raise MalformedDer("missing responderID")
    produced_at = der.read_time(tbs, "producedAt")

    singles: list[SingleResponse] = []
    responses = der.Reader(tbs.read(der.SEQUENCE, "responses"))
    while not responses.at_end():
        singles.append(_read_single_response(responses))
    if not singles:
        raise MalformedDer("SUCCESSFUL response with empty responses list")
    for single in singles:
        when = single.status.revocation_time
        if single.status.kind is StatusKind.REVOKED and when is not None and when > produced_at:
            raise MalformedDer(f"revocation time {when} is after producedAt {produced_at}")

    nonce_echo = None
    ext_raw = tbs.try_read(der.context(1))
    if ext_raw is not None:
        ext_reader = der.Reader(ext_raw)
        nonce_echo = _extract_nonce(ext_reader.read(der.SEQUENCE, "responseExtensions"))
    tbs.expect_end("ResponseData")

    return OcspResponse(
        response_status=status,
        produced_at=produced_at,
        responder_id=responder_id,
        single_responses=tuple(singles),
        nonce_echo=nonce_echo,
        signature_alg=signature_alg,
        signature=signature,
        signer_certs=signer_certs,
        raw_der=raw,
        tbs_der=tbs_raw,
    )
