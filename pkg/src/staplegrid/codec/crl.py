"""Certificate revocation list parsing and encoding.

The encoder exists because fleet CRLs must be producible without a
nextUpdate field ("Next Update: NONE" in openssl terms), which common
library builders refuse to emit.
"""

from __future__ import annotations

import datetime
import enum
from dataclasses import dataclass, field

from ..errors import MalformedDer, SignatureFieldMissing, UnsupportedAlgorithm
from . import der, oids, pem
from .x509 import DistinguishedName, read_name


class RevocationReason(enum.IntEnum):
    """X.509 CRLReason codes (the subset this stack issues and accepts)."""

    UNSPECIFIED = 0
    KEY_COMPROMISE = 1
    CA_COMPROMISE = 2
    AFFILIATION_CHANGED = 3
    SUPERSEDED = 4
    CESSATION_OF_OPERATION = 5
    CERTIFICATE_HOLD = 6


class CrlEncoding(enum.Enum):
    DER = "der"
    PEM = "pem"


@dataclass(frozen=True)
class CrlEntry:
    serial_number: int
    revocation_date: datetime.datetime
    reason: RevocationReason = RevocationReason.UNSPECIFIED


@dataclass(frozen=True)
class CrlSnapshot:
    issuer_dn: DistinguishedName
    last_update: datetime.datetime
    next_update: datetime.datetime | None
    entries: tuple[CrlEntry, ...]
    signature_alg: str
    signature: bytes = field(repr=False, default=b"")
    raw: bytes = field(repr=False, default=b"")
    tbs_der: bytes = field(repr=False, default=b"")


def _parse_entry_reason(ext_raw: bytes) -> RevocationReason:
    reader = der.Reader(ext_raw)
    while not reader.at_end():
        ext = der.Reader(reader.read(der.SEQUENCE, "crlEntryExtension"))
        oid = der.parse_oid(ext.read(der.OID, "entry extension OID"))
        ext.try_read(der.BOOLEAN)
        value = ext.read(der.OCTET_STRING, "entry extension value")
        if oid == oids.CRL_REASON:
            code = der.parse_integer(
                der.Reader(value).read(der.ENUMERATED, "CRLReason"))
            try:
                return RevocationReason(code)
            except ValueError as exc:
                raise MalformedDer(f"unknown CRLReason code {code}") from exc
    return RevocationReason.UNSPECIFIED


def parse_crl(data: bytes, encoding: CrlEncoding | None = None) -> CrlSnapshot:
    """Parse a CRL from DER or PEM; encoding is sniffed when not given."""
    data = bytes(data)
    if encoding is CrlEncoding.PEM or (encoding is None and pem.looks_like_pem(data)):
        data = pem.decode(data, pem.X509_CRL)
    content, raw = der.top_level(data, der.SEQUENCE, "CertificateList")
    outer = der.Reader(content)
    tbs_raw = outer.read_raw(der.SEQUENCE, "tbsCertList")
    if outer.at_end():
        raise SignatureFieldMissing("CRL has no signatureAlgorithm/signatureValue")
    alg_reader = der.Reader(outer.read(der.SEQUENCE, "signatureAlgorithm"))
    signature_alg = der.parse_oid(alg_reader.read(der.OID, "signature OID"))
    if outer.at_end():
        raise SignatureFieldMissing("CRL has no signatureValue")
    signature = der.parse_bit_string(outer.read(der.BIT_STRING, "signatureValue"))
    outer.expect_end("CertificateList")

    tbs = der.Reader(der.top_level(tbs_raw, der.SEQUENCE, "tbsCertList")[0])
    tbs.try_read(der.INTEGER)  # version, optional (v1 has none)
    tbs.read(der.SEQUENCE, "tbs signature algorithm")
    issuer = read_name(tbs, "issuer")
    last_update = der.read_time(tbs, "thisUpdate")
    next_update = None
    if tbs.peek_tag() in (der.UTC_TIME, der.GENERALIZED_TIME):
        next_update = der.read_time(tbs, "nextUpdate")
        if last_update > next_update:
            raise MalformedDer("thisUpdate is after nextUpdate")

    entries: list[CrlEntry] = []
    if tbs.peek_tag() == der.SEQUENCE:
        revoked = der.Reader(tbs.read(der.SEQUENCE, "revokedCertificates"))
        while not revoked.at_end():
            entry = der.Reader(revoked.read(der.SEQUENCE, "revoked certificate"))
            serial = entry.read_integer("userCertificate")
            date = der.read_time(entry, "revocationDate")
            reason = RevocationReason.UNSPECIFIED
            if entry.peek_tag() == der.SEQUENCE:
                reason = _parse_entry_reason(entry.read(der.SEQUENCE, "crlEntryExtensions"))
            entries.append(CrlEntry(serial, date, reason))
    while not tbs.at_end():
        tbs.read_any()  # crlExtensions [0]

    serials = [e.serial_number for e in entries]
    if len(set(serials)) != len(serials):
        raise MalformedDer("CRL lists a serial number more than once")

    return CrlSnapshot(
        issuer_dn=issuer,
        last_update=last_update,
        next_update=next_update,
        entries=tuple(entries),
        signature_alg=signature_alg,
        signature=signature,
        raw=raw,
        tbs_der=tbs_raw,
    )


def encode_crl(
    issuer_name_der: bytes,
    last_update: datetime.datetime,
    next_update: datetime.datetime | None,
    entries: list[CrlEntry] | tuple[CrlEntry, ...],
    signer,
    crl_number: int | None = None,
) -> bytes:
    """Build and sign a CertificateList; `signer` is a codec signing key
    (see verify.sign_data). next_update may be omitted entirely.
    """
    from .verify import sign_data, signature_algorithm_for_key

    revoked_parts = []
    for entry in entries:
        ext = der.encode_sequence(der.encode_sequence(
            der.encode_oid(oids.CRL_REASON),
            der.encode_octet_string(der.encode_enumerated(int(entry.reason))),
        ))
        revoked_parts.append(der.encode_sequence(
            der.encode_integer(entry.serial_number),
            der.encode_x509_time(entry.revocation_date),
            ext,
        ))

    alg_oid = signature_algorithm_for_key(signer)
    if alg_oid != oids.ECDSA_WITH_SHA256:
        raise UnsupportedAlgorithm(alg_oid, "CRL signing supports ECDSA P-256 only")
    alg = der.encode_sequence(der.encode_oid(alg_oid))

    tbs_parts = [
        der.encode_integer(1),  # v2, needed for entry extensions
        alg,
        issuer_name_der,
        der.encode_x509_time(last_update),
    ]
    if next_update is not None:
        tbs_parts.append(der.encode_x509_time(next_update))
    if entries:
        tbs_parts.append(der.encode_sequence(*revoked_parts))
    if crl_number is not None:
        tbs_parts.append(der.encode_explicit(0, der.encode_sequence(der.encode_sequence(
            der.encode_oid(oids.CRL_NUMBER),
            der.encode_octet_string(der.encode_integer(crl_number)),
        ))))
    tbs = der.encode_sequence(*tbs_parts)
    signature = sign_data(signer, tbs)
    return der.encode_sequence(tbs, alg, der.encode_bit_string(signature))
