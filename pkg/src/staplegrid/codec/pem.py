"""PEM armoring for the formats exchanged on disk and over CLIs.

Labels used here: CERTIFICATE, X509 CRL, OCSP REQUEST, OCSP RESPONSE.
"""

from __future__ import annotations

import base64
import re

from ..errors import MalformedDer

CERTIFICATE = "CERTIFICATE"
X509_CRL = "X509 CRL"
OCSP_REQUEST = "OCSP REQUEST"
OCSP_RESPONSE = "OCSP RESPONSE"

_BLOCK = re.compile(
    rb"-----BEGIN (?P<label>[A-Z0-9 ]+)-----\s*(?P<body>[A-Za-z0-9+/=\s]*?)-----END (?P=label)-----",
)


def encode(der: bytes, label: str) -> bytes:
    body = base64.encodebytes(der).replace(b"\n", b"")
    lines = [body[i:i + 64] for i in range(0, len(body), 64)]
    return b"\n".join(
        [f"-----BEGIN {label}-----".encode("ascii")]
        + lines
        + [f"-----END {label}-----".encode("ascii"), b""]
    )


def decode(data: bytes, label: str | None = None) -> bytes:
    """First PEM block's DER payload; `label` restricts which block counts."""
    for match in _BLOCK.finditer(data):
        got = match.group("label").decode("ascii")
        if label is not None and got != label:
            continue
        try:
            return base64.b64decode(re.sub(rb"\s+", b"", match.group("body")), validate=True)
        except ValueError as exc:
            raise MalformedDer(f"invalid base64 in PEM block {got!r}") from exc
    wanted = label or "any"
    raise MalformedDer(f"no PEM block found (wanted {wanted})")


def looks_like_pem(data: bytes) -> bool:
    return b"-----BEGIN " in data[:1024]
