"""X.509 v3 certificate parsing: the fields the revocation stack needs.

Full path building, policy processing, and name constraints are out of
scope; the parser extracts identity, validity, the public key structure,
and the AIA / CRL distribution point URLs.
"""

from __future__ import annotations

import datetime
from dataclasses import dataclass, field

from ..errors import MalformedDer, UnsupportedVersion
from . import der, oids, pem


@dataclass(frozen=True)
class DistinguishedName:
    """An X.501 Name. Equality and hashing go by the raw DER encoding."""

    raw: bytes
    components: tuple[tuple[str, str], ...] = field(compare=False, hash=False, default=())

    def rfc4514(self) -> str:
        return ",".join(f"{attr}={value}" for attr, value in reversed(self.components))

    def __str__(self) -> str:
        return self.rfc4514()


@dataclass(frozen=True)
class ParseWarning:
    """Non-fatal oddity recorded while parsing (e.g. unknown critical extension)."""

    oid: str
    message: str


@dataclass(frozen=True)
class CertMeta:
    serial_number: int
    subject_dn: DistinguishedName
    issuer_dn: DistinguishedName
    not_before: datetime.datetime
    not_after: datetime.datetime
    public_key_info: bytes           # raw SubjectPublicKeyInfo TLV
    aia_ocsp_url: str | None
    crl_dp_url: str | None
    raw_der: bytes
    tbs_der: bytes = field(repr=False, default=b"")
    signature_alg: str = ""
    signature: bytes = field(repr=False, default=b"")
    warnings: tuple[ParseWarning, ...] = ()

    @property
    def is_self_signed(self) -> bool:
        return self.subject_dn.raw == self.issuer_dn.raw


_STRING_TAGS = {
    der.UTF8_STRING: "utf-8",
    der.PRINTABLE_STRING: "ascii",
    der.IA5_STRING: "ascii",
    0x14: "latin-1",  # TeletexString, decoded permissively
}


def parse_name(raw: bytes) -> DistinguishedName:
    """Parse a Name TLV into display components; raw bytes stay authoritative."""
    content, raw_tlv = der.top_level(raw, der.SEQUENCE, "Name")
    components: list[tuple[str, str]] = []
    rdns = der.Reader(content)
    while not rdns.at_end():
        rdn = der.Reader(rdns.read(der.SET, "RelativeDistinguishedName"))
        while not rdn.at_end():
            atv = der.Reader(rdn.read(der.SEQUENCE, "AttributeTypeAndValue"))
            oid = der.parse_oid(atv.read(der.OID, "attribute type"))
            tag, value, _ = atv.read_any()
            atv.expect_end("AttributeTypeAndValue")
            codec = _STRING_TAGS.get(tag)
            if codec is None:
                text = value.hex()
            else:
                try:
                    text = value.decode(codec)
                except UnicodeDecodeError:
                    text = value.hex()
            components.append((oids.DN_ATTRIBUTES.get(oid, oid), text))
    return DistinguishedName(raw=raw_tlv, components=tuple(components))


def read_name(reader: der.Reader, what: str = "Name") -> DistinguishedName:
    return parse_name(reader.read_raw(der.SEQUENCE, what))


def _parse_general_name_uri(reader: der.Reader) -> str | None:
    """First uniformResourceIdentifier in a run of GeneralName values."""
    while not reader.at_end():
        tag, content, _ = reader.read_any()
        if tag == der.context(6, constructed=False):
            try:
                return content.decode("ascii")
            except UnicodeDecodeError as exc:
                raise MalformedDer("URI GeneralName is not ASCII") from exc
    return None


def _parse_aia_ocsp(value: bytes) -> str | None:
    content, _ = der.top_level(value, der.SEQUENCE, "AuthorityInfoAccess")
    reader = der.Reader(content)
    while not reader.at_end():
        access = der.Reader(reader.read(der.SEQUENCE, "AccessDescription"))
        method = der.parse_oid(access.read(der.OID, "access method"))
        if method == oids.AD_OCSP:
            url = _parse_general_name_uri(access)
            if url is not None:
                return url
        # other access methods (caIssuers, ...) skipped
    return None


def _parse_crl_dp(value: bytes) -> str | None:
    content, _ = der.top_level(value, der.SEQUENCE, "CRLDistributionPoints")
    points = der.Reader(content)
    while not points.at_end():
        point = der.Reader(points.read(der.SEQUENCE, "DistributionPoint"))
        dp_name = point.try_read(der.context(0))
        if dp_name is None:
            continue
        name_reader = der.Reader(dp_name)
        full_name = name_reader.try_read(der.context(0))
        if full_name is None:
            continue
        url = _parse_general_name_uri(der.Reader(full_name))
        if url is not None:
            return url
    return None


# Extensions this parser understands well enough to skip silently when critical.
_KNOWN_EXTENSIONS = {
    oids.AUTHORITY_INFO_ACCESS,
    oids.CRL_DISTRIBUTION_POINTS,
    oids.BASIC_CONSTRAINTS,
    oids.KEY_USAGE,
    oids.SUBJECT_KEY_IDENTIFIER,
    oids.AUTHORITY_KEY_IDENTIFIER,
    oids.SUBJECT_ALT_NAME,
    oids.EXTENDED_KEY_USAGE,
}


def _parse_extensions(raw: bytes) -> tuple[str | None, str | None, tuple[ParseWarning, ...]]:
    aia_url = None
    crl_dp = None
    warnings: list[ParseWarning] = []
    content, _ = der.top_level(raw, der.SEQUENCE, "Extensions")
    reader = der.Reader(content)
    while not reader.at_end():
        ext = der.Reader(reader.read(der.SEQUENCE, "Extension"))
        oid = der.parse_oid(ext.read(der.OID, "extension OID"))
        critical_raw = ext.try_read(der.BOOLEAN)
        critical = bool(critical_raw and critical_raw != b"\x00")
        value = ext.read(der.OCTET_STRING, "extension value")
        ext.expect_end("Extension")
        if oid == oids.AUTHORITY_INFO_ACCESS:
            aia_url = _parse_aia_ocsp(value)
        elif oid == oids.CRL_DISTRIBUTION_POINTS:
            crl_dp = _parse_crl_dp(value)
        elif critical and oid not in _KNOWN_EXTENSIONS:
            warnings.append(ParseWarning(oid, f"unknown critical extension {oid}"))
    return aia_url, crl_dp, tuple(warnings)


def parse_certificate(data: bytes) -> CertMeta:
    """Parse a DER or PEM X.509 v3 certificate.

    v1/v2 certificates are rejected with UnsupportedVersion. Unknown
    non-critical extensions are skipped; unknown critical extensions are
    recorded as warnings on the result rather than failing the parse.
    """
    if isinstance(data, (bytes, bytearray)) and pem.looks_like_pem(bytes(data)):
        data = pem.decode(bytes(data), pem.CERTIFICATE)
    content, raw = der.top_level(data, der.SEQUENCE, "Certificate")
    outer = der.Reader(content)
    tbs_raw = outer.read_raw(der.SEQUENCE, "tbsCertificate")

    sig_alg_reader = der.Reader(outer.read(der.SEQUENCE, "signatureAlgorithm"))
    signature_alg = der.parse_oid(sig_alg_reader.read(der.OID, "signature OID"))
    signature = der.parse_bit_string(outer.read(der.BIT_STRING, "signatureValue"))
    outer.expect_end("Certificate")

    tbs = der.Reader(der.top_level(tbs_raw, der.SEQUENCE, "tbsCertificate")[0])
    version_raw = tbs.try_read(der.context(0))
    if version_raw is None:
        raise UnsupportedVersion("v1 certificate (no version field); only v3 is accepted")
    version = der.parse_integer(der.Reader(version_raw).read(der.INTEGER, "version"))
    if version != 2:
        raise UnsupportedVersion(f"certificate version v{version + 1}; only v3 is accepted")

    serial = tbs.read_integer("serialNumber")
    if serial <= 0:
        raise MalformedDer(f"non-positive serial number {serial}")
    tbs.read(der.SEQUENCE, "tbs signature algorithm")
    issuer = read_name(tbs, "issuer")
    validity = der.Reader(tbs.read(der.SEQUENCE, "validity"))
    not_before = der.read_time(validity, "notBefore")
    not_after = der.read_time(validity, "notAfter")
    if not_before > not_after:
        raise MalformedDer("notBefore is after notAfter")
    subject = read_name(tbs, "subject")
    spki_raw = tbs.read_raw(der.SEQUENCE, "subjectPublicKeyInfo")

    aia_url = crl_dp = None
    warnings: tuple[ParseWarning, ...] = ()
    while not tbs.at_end():
        tag, value, _ = tbs.read_any()
        if tag == der.context(3):
            aia_url, crl_dp, warnings = _parse_extensions(value)
        # issuerUniqueID [1] / subjectUniqueID [2] skipped

    return CertMeta(
        serial_number=serial,
        subject_dn=subject,
        issuer_dn=issuer,
        not_before=not_before,
        not_after=not_after,
        public_key_info=spki_raw,
        aia_ocsp_url=aia_url,
        crl_dp_url=crl_dp,
        raw_der=raw,
        tbs_der=tbs_raw,
        signature_alg=signature_alg,
        signature=signature,
        warnings=warnings,
    )


def public_key_bits(spki_raw: bytes) -> bytes:
    """subjectPublicKey BIT STRING payload, without tag/length/unused-bits octet."""
    content, _ = der.top_level(spki_raw, der.SEQUENCE, "subjectPublicKeyInfo")
    reader = der.Reader(content)
    reader.read(der.SEQUENCE, "spki algorithm")
    bits = der.parse_bit_string(reader.read(der.BIT_STRING, "subjectPublicKey"))
    reader.expect_end("subjectPublicKeyInfo")
    return bits


def encode_name(components: list[tuple[str, str]]) -> bytes:
    """Encode a Name from (attr, value) pairs, one attribute per RDN."""
    rdns = []
    for attr, value in components:
        oid = oids.DN_ATTRIBUTE_OIDS.get(attr, attr)
        atv = der.encode_sequence(
            der.encode_oid(oid),
            der.encode_tlv(der.UTF8_STRING, value.encode("utf-8")),
        )
        rdns.append(der.encode_set(atv))
    return der.encode_sequence(*rdns)
