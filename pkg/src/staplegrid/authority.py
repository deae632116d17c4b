"""Fixture certificate authority.

Mints the root key, leaf certificates, CRLs, and signed OCSP responses
the rest of the stack runs against. Certificates are built with the
`cryptography` builders and CRLs/responses with this package's own
encoders, so each artifact crosses an implementation boundary somewhere
before tests accept it.

Not a production CA: single root, no intermediates, no CSR handling.
"""

from __future__ import annotations

import datetime
import hashlib
import json
import random
import secrets
from dataclasses import dataclass, field
from pathlib import Path

from cryptography import x509
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric import ec
from cryptography.x509.oid import AuthorityInformationAccessOID

from .codec import (
    CertId,
    CertMeta,
    CertStatus,
    CrlEntry,
    CrlSnapshot,
    OcspResponse,
    ResponderId,
    ResponseStatus,
    RevocationReason,
    SingleResponse,
    encode_crl,
    encode_ocsp_response,
    parse_certificate,
    parse_crl,
)
from .codec import pem as pemcodec
from .codec.der import to_utc_second
from .codec.ocsp import decode_ocsp_response
from .errors import AlreadyRevoked, InvalidWindow, UnknownSerial

_P256_ORDER = 0xFFFFFFFF00000000FFFFFFFFFFFFFFFFBCE6FAADA7179E84F3B9CAC2FC632551


def _parse_dn(subject_dn: str) -> x509.Name:
    """Build an x509.Name from "C=aa, O=aa, CN=rootca" style input."""
    oid_map = {
        "CN": x509.NameOID.COMMON_NAME,
        "C": x509.NameOID.COUNTRY_NAME,
        "ST": x509.NameOID.STATE_OR_PROVINCE_NAME,
        "L": x509.NameOID.LOCALITY_NAME,
        "O": x509.NameOID.ORGANIZATION_NAME,
        "OU": x509.NameOID.ORGANIZATIONAL_UNIT_NAME,
    }
    attrs = []
    for part in subject_dn.split(","):
        part = part.strip()
        if not part:
            continue
        key, _, value = part.partition("=")
        oid = oid_map.get(key.strip().upper())
        if oid is None:
            raise ValueError(f"unsupported DN attribute {key!r}")
        attrs.append(x509.NameAttribute(oid, value.strip()))
    if not attrs:
        raise ValueError("empty subject DN")
    return x509.Name(attrs)


def _derive_key(seed: int, counter: int = 0) -> ec.EllipticCurvePrivateKey:
    material = f"staplegrid-authority:{seed}:{counter}".encode()
    while True:
        value = int.from_bytes(hashlib.sha256(material).digest(), "big")
        if 0 < value < _P256_ORDER:
            return ec.derive_private_key(value, ec.SECP256R1())
        material += b"#"


def _sign_builder(builder, key: ec.EllipticCurvePrivateKey):
    """RFC 6979 signing keeps fixture bytes reproducible run to run."""
    try:
        return builder.sign(key, hashes.SHA256(), ecdsa_deterministic=True)
    except TypeError:
        return builder.sign(key, hashes.SHA256())


@dataclass
class CertificateAuthority:
    """Single-root authority; callers must serialize mutations externally."""

    root_key: ec.EllipticCurvePrivateKey
    root_cert: CertMeta
    issued: dict[int, CertMeta] = field(default_factory=dict)
    revoked: dict[int, tuple[datetime.datetime, RevocationReason]] = field(default_factory=dict)
    crl_number: int = 0
    _rng: random.Random | None = None
    _root_name: x509.Name | None = field(default=None, repr=False)

    # -- construction -------------------------------------------------------

    @classmethod
    def generate_root(
        cls,
        subject_dn: str = "CN=rootca, O=aa, C=aa",
        *,
        seed: int | None = None,
        now: datetime.datetime | None = None,
        validity_days: int = 3650,
    ) -> "CertificateAuthority":
        rng = random.Random(seed) if seed is not None else None
        key = _derive_key(seed) if seed is not None else ec.generate_private_key(ec.SECP256R1())
        now = to_utc_second(now or datetime.datetime.now(datetime.timezone.utc))
        name = _parse_dn(subject_dn)
        serial = cls._new_serial(rng)
        builder = (
            x509.CertificateBuilder()
            .subject_name(name)
            .issuer_name(name)
            .public_key(key.public_key())
            .serial_number(serial)
            .not_valid_before(now)
            .not_valid_after(now + datetime.timedelta(days=validity_days))
            .add_extension(x509.BasicConstraints(ca=True, path_length=None), critical=True)
            .add_extension(
                x509.KeyUsage(
                    digital_signature=True, key_cert_sign=True, crl_sign=True,
                    content_commitment=False, key_encipherment=False,
                    data_encipherment=False, key_agreement=False,
                    encipher_only=False, decipher_only=False),
                critical=True)
        )
        cert = _sign_builder(builder, key)
        meta = parse_certificate(cert.public_bytes(serialization.Encoding.DER))
        return cls(root_key=key, root_cert=meta, _rng=rng, _root_name=name)

    @staticmethod
    def _new_serial(rng: random.Random | None) -> int:
        bits = rng.getrandbits(128) if rng is not None else secrets.randbits(128)
        return bits or 1

    # -- issuance ------------------------------------------------------------

    def issue_cert(
        self,
        subject_dn: str,
        aia_url: str | None = None,
        crl_dp_url: str | None = None,
        validity_days: int = 365,
        *,
        now: datetime.datetime | None = None,
        key: ec.EllipticCurvePrivateKey | None = None,
    ) -> CertMeta:
        """Issue a leaf signed by the root; returns its parsed metadata.

        The leaf's private key is discarded unless supplied: the revocation
        stack only ever needs the certificate side.
        """
        now = to_utc_second(now or datetime.datetime.now(datetime.timezone.utc))
        if key is None:
            key = (_derive_key(self._rng.getrandbits(64), counter=1)
                   if self._rng is not None else ec.generate_private_key(ec.SECP256R1()))
        serial = self._new_serial(self._rng)
        builder = (
            x509.CertificateBuilder()
            .subject_name(_parse_dn(subject_dn))
            .issuer_name(self._issuer_name())
            .public_key(key.public_key())
            .serial_number(serial)
            .not_valid_before(now)
            .not_valid_after(now + datetime.timedelta(days=validity_days))
            .add_extension(x509.BasicConstraints(ca=False, path_length=None), critical=True)
        )
        if aia_url:
            builder = builder.add_extension(
                x509.AuthorityInformationAccess([
                    x509.AccessDescription(
                        AuthorityInformationAccessOID.OCSP,
                        x509.UniformResourceIdentifier(aia_url)),
                ]),
                critical=False)
        if crl_dp_url:
            builder = builder.add_extension(
                x509.CRLDistributionPoints([
                    x509.DistributionPoint(
                        full_name=[x509.UniformResourceIdentifier(crl_dp_url)],
                        relative_name=None, reasons=None, crl_issuer=None),
                ]),
                critical=False)
        cert = _sign_builder(builder, self.root_key)
        meta = parse_certificate(cert.public_bytes(serialization.Encoding.DER))
        self.issued[serial] = meta
        return meta

    def _issuer_name(self) -> x509.Name:
        if self._root_name is None:
            self._root_name = x509.load_der_x509_certificate(self.root_cert.raw_der).subject
        return self._root_name

    # -- revocation ------------------------------------------------------------

    def revoke(self, serial: int, reason: RevocationReason,
               at: datetime.datetime) -> None:
        if serial not in self.issued:
            raise UnknownSerial(f"serial {serial:#x} was never issued")
        if serial in self.revoked:
            raise AlreadyRevoked(f"serial {serial:#x} is already revoked")
        self.revoked[serial] = (to_utc_second(at), reason)

    def emit_crl(self, now: datetime.datetime,
                 next_update: datetime.datetime | None = None) -> CrlSnapshot:
        now = to_utc_second(now)
        entries = [CrlEntry(serial, when, reason)
                   for serial, (when, reason) in sorted(self.revoked.items())]
        self.crl_number += 1
        raw = encode_crl(
            issuer_name_der=self.root_cert.subject_dn.raw,
            last_update=now,
            next_update=to_utc_second(next_update) if next_update else None,
            entries=entries,
            signer=self.root_key,
            crl_number=self.crl_number,
        )
        return parse_crl(raw)

    # -- OCSP ----------------------------------------------------------------

    def sign_ocsp_response(
        self,
        cert_id: CertId,
        status: CertStatus,
        this_update: datetime.datetime,
        next_update: datetime.datetime,
        nonce_echo: bytes | None = None,
        *,
        produced_at: datetime.datetime | None = None,
    ) -> OcspResponse:
        this_update = to_utc_second(this_update)
        next_update = to_utc_second(next_update)
        if this_update >= next_update:
            raise InvalidWindow(
                f"thisUpdate {this_update} must precede nextUpdate {next_update}")
        raw = encode_ocsp_response(
            ResponseStatus.SUCCESSFUL,
            produced_at=produced_at or this_update,
            responder_id=ResponderId.by_name(self.root_cert.subject_dn),
            single_responses=[SingleResponse(cert_id, status, this_update, next_update)],
            nonce_echo=nonce_echo,
            signing_key=self.root_key,
            signer_certs=[self.root_cert.raw_der],
        )
        return decode_ocsp_response(raw)

    # -- persistence ------------------------------------------------------------

    def save(self, state_dir: str | Path) -> None:
        root = Path(state_dir)
        (root / "issued").mkdir(parents=True, exist_ok=True)
        (root / "root.key").write_bytes(self.root_key.private_bytes(
            serialization.Encoding.PEM,
            serialization.PrivateFormat.PKCS8,
            serialization.NoEncryption()))
        (root / "root.pem").write_bytes(
            pemcodec.encode(self.root_cert.raw_der, pemcodec.CERTIFICATE))
        for serial, meta in self.issued.items():
            (root / "issued" / f"{serial:032x}.pem").write_bytes(
                pemcodec.encode(meta.raw_der, pemcodec.CERTIFICATE))
        state = {
            "crl_number": self.crl_number,
            "revoked": {
                str(serial): {"at": when.strftime("%Y-%m-%d %H:%M:%S"), "reason": reason.name}
                for serial, (when, reason) in self.revoked.items()
            },
        }
        (root / "state.json").write_text(json.dumps(state, indent=2))

    @classmethod
    def load(cls, state_dir: str | Path) -> "CertificateAuthority":
        root = Path(state_dir)
        key = serialization.load_pem_private_key((root / "root.key").read_bytes(), None)
        if not isinstance(key, ec.EllipticCurvePrivateKey):
            raise ValueError("root.key is not an EC private key")
        cert = parse_certificate((root / "root.pem").read_bytes())
        authority = cls(root_key=key, root_cert=cert)
        issued_dir = root / "issued"
        if issued_dir.is_dir():
            for path in sorted(issued_dir.glob("*.pem")):
                meta = parse_certificate(path.read_bytes())
                authority.issued[meta.serial_number] = meta
        state_path = root / "state.json"
        if state_path.exists():
            state = json.loads(state_path.read_text())
            authority.crl_number = state.get("crl_number", 0)
            for serial, info in state.get("revoked", {}).items():
                when = datetime.datetime.strptime(
                    info["at"], "%Y-%m-%d %H:%M:%S").replace(tzinfo=datetime.timezone.utc)
                authority.revoked[int(serial)] = (when, RevocationReason[info["reason"]])
        return authority
