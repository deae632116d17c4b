"""Handshake-side certificate checking.

Stapled mode: the server validates the client's bundle locally and never
queries OCSP itself. Direct mode: the server issues exactly one OCSP
query per handshake. Staples ride in an application-level message
(length-prefixed chain + DER response), not a TLS extension.
"""

from __future__ import annotations

import datetime
import enum
from dataclasses import dataclass

from ..codec import (
    CertMeta,
    OcspRequest,
    ResponseStatus,
    StatusKind,
    compute_cert_id,
    decode_ocsp_response,
    encode_ocsp_request,
    parse_certificate,
    verify_certificate_chain,
    verify_ocsp_signature,
)
from ..codec.der import to_utc_second
from ..errors import (
    IssuerMismatch,
    SignatureInvalid,
    SignerCertExpired,
    StaplegridError,
    UntrustedSigner,
    UpstreamUnreachable,
)
from ..transport import OcspTransport

CLOCK_SKEW = datetime.timedelta(seconds=300)


class Verdict(enum.Enum):
    ACCEPT = "ACCEPT"
    REJECT = "REJECT"


class RejectReason(enum.Enum):
    MISSING_STAPLE = "MISSING_STAPLE"
    REVOKED_STATUS = "REVOKED_STATUS"
    STALE_RESPONSE = "STALE_RESPONSE"
    SIGNATURE_INVALID = "SIGNATURE_INVALID"
    CERTID_MISMATCH = "CERTID_MISMATCH"
    UNTRUSTED_SIGNER = "UNTRUSTED_SIGNER"
    CHAIN_INVALID = "CHAIN_INVALID"
    TRANSPORT_FAILURE = "TRANSPORT_FAILURE"


@dataclass(frozen=True)
class StapleBundle:
    """What a DLMS client presents: its certificate, issuer chain up to and
    including the root (the root-CA evidence), and the stapled response."""

    client_cert: bytes
    issuer_chain: tuple[bytes, ...]
    stapled_response: bytes | None

    def wire_size(self) -> int:
        # 4-byte length prefix per framed field
        parts = [self.client_cert, *self.issuer_chain, self.stapled_response or b""]
        return sum(4 + len(p) for p in parts)


@dataclass(frozen=True)
class HandshakeOutcome:
    verdict: Verdict
    reason: RejectReason | None = None
    detail: str = ""
    server_ocsp_queries: int = 0
    bytes_on_wire: int = 0

    def __post_init__(self) -> None:
        if self.verdict is Verdict.ACCEPT and self.reason is not None:
            raise ValueError("ACCEPT outcomes carry no reject reason")

    @property
    def accepted(self) -> bool:
        return self.verdict is Verdict.ACCEPT


def _reject(reason: RejectReason, detail: str = "", *, queries: int = 0,
            wire: int = 0) -> HandshakeOutcome:
    return HandshakeOutcome(Verdict.REJECT, reason, detail,
                            server_ocsp_queries=queries, bytes_on_wire=wire)


def client_prepare_bundle(cert_der: bytes, issuer_chain, cache) -> StapleBundle:
    """Obtain the current staple for this certificate from the cache responder."""
    chain = tuple(bytes(c) for c in issuer_chain)
    entry = cache.lookup_or_fetch(cert_der, chain[0])
    return StapleBundle(client_cert=bytes(cert_der), issuer_chain=chain,
                        stapled_response=entry.ocsp_response)


def _status_and_window_checks(single, now: datetime.datetime,
                              skew: datetime.timedelta) -> HandshakeOutcome | None:
    """Checks (d) status and (e) freshness window; None means both passed."""
    if single.status.kind is not StatusKind.GOOD:
        detail = ("STATUS_NOT_GOOD (UNKNOWN)" if single.status.kind is StatusKind.UNKNOWN
                  else f"revoked at {single.status.revocation_time}")
        return _reject(RejectReason.REVOKED_STATUS, detail)
    if single.next_update is None:
        return _reject(RejectReason.STALE_RESPONSE, "response has no nextUpdate bound")
    if not (single.this_update - skew <= now <= single.next_update + skew):
        return _reject(
            RejectReason.STALE_RESPONSE,
            f"now {now} outside [{single.this_update}, {single.next_update}] ± {skew}")
    return None


def server_verify_bundle(
    bundle: StapleBundle,
    trust_store: list[CertMeta] | tuple[CertMeta, ...],
    now: datetime.datetime,
    *,
    skew: datetime.timedelta = CLOCK_SKEW,
) -> HandshakeOutcome:
    """Local verification of a stapled bundle; incurs zero OCSP queries.

    ACCEPT requires all of: (a) chain to a trust-store root, (b) staple
    signature by a trusted signer, (c) a CertID matching the presented
    certificate, (d) GOOD status (UNKNOWN fails closed), (e) now inside
    the validity window with bounded skew.
    """
    wire = bundle.wire_size()
    if not bundle.stapled_response:
        return _reject(RejectReason.MISSING_STAPLE, wire=wire)

    try:
        leaf = verify_certificate_chain(
            [bundle.client_cert, *bundle.issuer_chain], trust_store, now)
    except StaplegridError as exc:
        return _reject(RejectReason.CHAIN_INVALID, str(exc), wire=wire)

    try:
        response = decode_ocsp_response(bundle.stapled_response)
    except StaplegridError as exc:
        return _reject(RejectReason.SIGNATURE_INVALID,
                       f"staple does not decode: {exc}", wire=wire)
    if response.response_status is not ResponseStatus.SUCCESSFUL:
        return _reject(RejectReason.MISSING_STAPLE,
                       f"staple status {response.response_status.name}", wire=wire)
    try:
        verify_ocsp_signature(response, trust_store, now)
    except SignatureInvalid as exc:
        return _reject(RejectReason.SIGNATURE_INVALID, str(exc), wire=wire)
    except (UntrustedSigner, SignerCertExpired) as exc:
        return _reject(RejectReason.UNTRUSTED_SIGNER, str(exc), wire=wire)

    issuer = parse_certificate(bundle.issuer_chain[0])
    single = None
    for candidate in response.single_responses:
        try:
            expected = compute_cert_id(leaf, issuer, candidate.cert_id.hash_alg)
        except IssuerMismatch:
            continue
        if candidate.cert_id == expected:
            single = candidate
            break
    if single is None:
        return _reject(RejectReason.CERTID_MISMATCH,
                       "staple does not cover the presented certificate", wire=wire)

    failure = _status_and_window_checks(single, to_utc_second(now), skew)
    if failure is not None:
        return _reject(failure.reason, failure.detail, wire=wire)
    return HandshakeOutcome(Verdict.ACCEPT, server_ocsp_queries=0, bytes_on_wire=wire)


def server_verify_direct(
    cert_der: bytes,
    issuer_der: bytes,
    ocsp_endpoint: str,
    trust_store: list[CertMeta] | tuple[CertMeta, ...],
    now: datetime.datetime,
    *,
    transport: OcspTransport,
    skew: datetime.timedelta = CLOCK_SKEW,
) -> HandshakeOutcome:
    """Non-stapled path: the server itself queries OCSP, once per handshake."""
    wire = sum(4 + len(p) for p in (cert_der, issuer_der))
    try:
        leaf = verify_certificate_chain([cert_der, issuer_der], trust_store, now)
    except StaplegridError as exc:
        return _reject(RejectReason.CHAIN_INVALID, str(exc), wire=wire)

    cert_id = compute_cert_id(leaf, parse_certificate(issuer_der))
    request_der = encode_ocsp_request(OcspRequest(cert_ids=(cert_id,)))
    wire += len(request_der)
    try:
        body = transport.post(ocsp_endpoint, request_der)
    except UpstreamUnreachable as exc:
        return _reject(RejectReason.TRANSPORT_FAILURE, str(exc), queries=1, wire=wire)
    wire += len(body)

    try:
        response = decode_ocsp_response(body)
        if response.response_status is not ResponseStatus.SUCCESSFUL:
            return _reject(RejectReason.TRANSPORT_FAILURE,
                           f"responder status {response.response_status.name}",
                           queries=1, wire=wire)
        verify_ocsp_signature(response, trust_store, now)
    except SignatureInvalid as exc:
        return _reject(RejectReason.SIGNATURE_INVALID, str(exc), queries=1, wire=wire)
    except (UntrustedSigner, SignerCertExpired) as exc:
        return _reject(RejectReason.UNTRUSTED_SIGNER, str(exc), queries=1, wire=wire)
    except StaplegridError as exc:
        return _reject(RejectReason.SIGNATURE_INVALID, str(exc), queries=1, wire=wire)

    single = response.single_for(cert_id)
    if single is None:
        return _reject(RejectReason.CERTID_MISMATCH,
                       "response does not cover the presented certificate",
                       queries=1, wire=wire)
    failure = _status_and_window_checks(single, to_utc_second(now), skew)
    if failure is not None:
        return _reject(failure.reason, failure.detail, queries=1, wire=wire)
    return HandshakeOutcome(Verdict.ACCEPT, server_ocsp_queries=1, bytes_on_wire=wire)
