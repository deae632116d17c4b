"""Wire-format layer: DER primitives, X.509/CRL/OCSP parsing and encoding,
CertID computation, and signature verification."""

from .crl import CrlEncoding, CrlEntry, CrlSnapshot, RevocationReason, encode_crl, parse_crl
from .ocsp import (
    CertId,
    CertStatus,
    HashAlg,
    OcspRequest,
    OcspResponse,
    ResponderId,
    ResponseStatus,
    SingleResponse,
    StatusKind,
    compute_cert_id,
    decode_ocsp_request,
    decode_ocsp_response,
    encode_ocsp_request,
    encode_ocsp_response,
)
from .verify import (
    VerifiedOcspResponse,
    verify_certificate_chain,
    verify_crl_signature,
    verify_ocsp_signature,
)
from .x509 import CertMeta, DistinguishedName, ParseWarning, parse_certificate, public_key_bits

__all__ = [
    "CertId",
    "CertMeta",
    "CertStatus",
    "CrlEncoding",
    "CrlEntry",
    "CrlSnapshot",
    "DistinguishedName",
    "HashAlg",
    "OcspRequest",
    "OcspResponse",
    "ParseWarning",
    "ResponderId",
    "ResponseStatus",
    "RevocationReason",
    "SingleResponse",
    "StatusKind",
    "VerifiedOcspResponse",
    "compute_cert_id",
    "decode_ocsp_request",
    "decode_ocsp_response",
    "encode_crl",
    "encode_ocsp_request",
    "encode_ocsp_response",
    "parse_certificate",
    "parse_crl",
    "public_key_bits",
    "verify_certificate_chain",
    "verify_crl_signature",
    "verify_ocsp_signature",
]
