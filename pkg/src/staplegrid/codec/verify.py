"""Signature verification for OCSP responses, CRLs, and certificate chains.

ECDSA P-256 + SHA-256 is the suite this stack produces; RSA PKCS#1 v1.5
with SHA-256 responses from foreign responders verify as well. Signing is
deterministic (RFC 6979) so identical inputs give identical bytes.
"""

from __future__ import annotations

import datetime
from dataclasses import dataclass

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.asymmetric import ec, padding, rsa
from cryptography.hazmat.primitives.serialization import load_der_public_key

from ..errors import (
    SignatureInvalid,
    SignerCertExpired,
    UnsupportedAlgorithm,
    UntrustedSigner,
)
from . import oids
from .crl import CrlSnapshot
from .ocsp import HashAlg, OcspResponse, ResponseStatus, SingleResponse
from .x509 import CertMeta, parse_certificate, public_key_bits

_MAX_CHAIN_DEPTH = 4


def signature_algorithm_for_key(key) -> str:
    if isinstance(key, ec.EllipticCurvePrivateKey):
        return oids.ECDSA_WITH_SHA256
    if isinstance(key, rsa.RSAPrivateKey):
        return oids.SHA256_WITH_RSA
    raise UnsupportedAlgorithm(type(key).__name__, "signing key type")


def sign_data(key, data: bytes) -> bytes:
    """ECDSA P-256 / SHA-256, deterministic per RFC 6979."""
    if not isinstance(key, ec.EllipticCurvePrivateKey):
        raise UnsupportedAlgorithm(type(key).__name__, "signing key type")
    try:
        return key.sign(data, ec.ECDSA(hashes.SHA256(), deterministic_signing=True))
    except (TypeError, ValueError):
        return key.sign(data, ec.ECDSA(hashes.SHA256()))


def verify_with_spki(spki_raw: bytes, alg_oid: str, signature: bytes, data: bytes) -> None:
    try:
        public_key = load_der_public_key(bytes(spki_raw))
    except (ValueError, UnsupportedAlgorithm) as exc:
        raise SignatureInvalid(f"cannot load signer public key: {exc}") from exc
    try:
        if alg_oid == oids.ECDSA_WITH_SHA256:
            if not isinstance(public_key, ec.EllipticCurvePublicKey):
                raise SignatureInvalid("ECDSA signature but non-EC signer key")
            public_key.verify(signature, data, ec.ECDSA(hashes.SHA256()))
        elif alg_oid == oids.SHA256_WITH_RSA:
            if not isinstance(public_key, rsa.RSAPublicKey):
                raise SignatureInvalid("RSA signature but non-RSA signer key")
            public_key.verify(signature, data, padding.PKCS1v15(), hashes.SHA256())
        else:
            raise UnsupportedAlgorithm(alg_oid, "signature verification")
    except InvalidSignature as exc:
        raise SignatureInvalid("signature does not verify") from exc


def cert_signed_by(child: CertMeta, parent: CertMeta) -> bool:
    if child.issuer_dn.raw != parent.subject_dn.raw:
        return False
    try:
        verify_with_spki(parent.public_key_info, child.signature_alg,
                         child.signature, child.tbs_der)
    except (SignatureInvalid, UnsupportedAlgorithm):
        return False
    return True


def _chains_to_anchor(cert: CertMeta, pool: list[CertMeta],
                      anchors: list[CertMeta]) -> bool:
    anchor_raws = {a.raw_der for a in anchors}
    current = cert
    for _ in range(_MAX_CHAIN_DEPTH):
        if current.raw_der in anchor_raws:
            return True
        parent = next(
            (c for c in anchors + pool
             if c.subject_dn.raw == current.issuer_dn.raw and cert_signed_by(current, c)),
            None)
        if parent is None:
            return False
        if parent.raw_der in anchor_raws:
            return True
        current = parent
    return False


@dataclass(frozen=True)
class VerifiedOcspResponse:
    """Wrapper proving verification happened; grants access to the payload."""

    response: OcspResponse
    signer: CertMeta

    @property
    def single_responses(self) -> tuple[SingleResponse, ...]:
        return self.response.single_responses


def verify_ocsp_signature(
    response: OcspResponse,
    trust_anchors: list[CertMeta] | tuple[CertMeta, ...],
    now: datetime.datetime,
) -> VerifiedOcspResponse:
    """Check the response signature, signer trust chain, and signer validity.

    The responder ID orders the candidate list but the signature decides:
    whichever included certificate (or anchor) actually verifies the
    signature is treated as the signer.
    """
    if response.response_status is not ResponseStatus.SUCCESSFUL:
        raise ValueError("only SUCCESSFUL responses carry a verifiable payload")
    anchors = list(trust_anchors)
    pool = [parse_certificate(raw) for raw in response.signer_certs]
    candidates = pool + [a for a in anchors if a.raw_der not in {c.raw_der for c in pool}]

    def matches_responder_id(cert: CertMeta) -> bool:
        rid = response.responder_id
        if rid is None:
            return False
        if rid.name is not None:
            return cert.subject_dn.raw == rid.name.raw
        return HashAlg.SHA1.digest(public_key_bits(cert.public_key_info)) == rid.key_hash

    candidates.sort(key=lambda c: not matches_responder_id(c))
    signer = None
    for candidate in candidates:
        try:
            verify_with_spki(candidate.public_key_info, response.signature_alg,
                             response.signature, response.tbs_der)
        except SignatureInvalid:
            continue
        signer = candidate
        break
    if signer is None:
        raise SignatureInvalid("no candidate key verifies the response signature")

    if not _chains_to_anchor(signer, pool, anchors):
        raise UntrustedSigner(
            f"signer {signer.subject_dn} does not chain to a configured anchor")
    if not signer.not_before <= now <= signer.not_after:
        raise SignerCertExpired(
            f"signer certificate valid [{signer.not_before}, {signer.not_after}] "
            f"does not cover {now}")
    return VerifiedOcspResponse(response=response, signer=signer)


def verify_crl_signature(snapshot: CrlSnapshot, issuer: CertMeta) -> None:
    if snapshot.issuer_dn.raw != issuer.subject_dn.raw:
        raise UntrustedSigner("CRL issuer does not match the verifying certificate")
    verify_with_spki(issuer.public_key_info, snapshot.signature_alg,
                     snapshot.signature, snapshot.tbs_der)


def verify_certificate_chain(
    chain: list[bytes] | tuple[bytes, ...],
    trust_roots: list[CertMeta] | tuple[CertMeta, ...],
    now: datetime.datetime,
) -> CertMeta:
    """Validate leaf-to-root order: signatures, validity windows, and a
    self-signed tail that is itself a configured trust root. Returns the leaf.
    """
    if not chain:
        raise UntrustedSigner("empty certificate chain")
    metas = [parse_certificate(raw) for raw in chain]
    for meta in metas:
        if not meta.not_before <= now <= meta.not_after:
            raise SignerCertExpired(
                f"{meta.subject_dn} validity does not cover {now}")
    for child, parent in zip(metas, metas[1:]):
        if not cert_signed_by(child, parent):
            raise UntrustedSigner(
                f"{child.subject_dn} is not signed by {parent.subject_dn}")
    tail = metas[-1]
    if not tail.is_self_signed or not cert_signed_by(tail, tail):
        raise UntrustedSigner("chain does not terminate at a self-signed root")
    if tail.raw_der not in {root.raw_der for root in trust_roots}:
        raise UntrustedSigner(f"root {tail.subject_dn} is not in the trust store")
    return metas[0]
