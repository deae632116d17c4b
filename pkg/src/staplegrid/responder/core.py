"""Query answering over the CRL blacklist.

Semantics: a serial listed in the CRL is REVOKED; an unlisted serial of
the configured CA is GOOD; a CertID whose issuer hashes do not match the
configured CA is UNKNOWN, because vouching for foreign issuers would be
unsound. Undecodable requests get a MALFORMED_REQUEST response, never a
transport-level failure.
"""

from __future__ import annotations

import datetime
import logging
import threading
from typing import Callable

from ..codec import (
    CertId,
    CertStatus,
    HashAlg,
    OcspRequest,
    OcspResponse,
    ResponderId,
    ResponseStatus,
    SingleResponse,
    StatusKind,
    decode_ocsp_request,
    decode_ocsp_response,
    encode_ocsp_response,
    parse_crl,
    public_key_bits,
)
from ..errors import SourceUnavailable, StaplegridError
from .blacklist import BlacklistIndex, build_index, load_crl_source
from .config import ResponderConfig

log = logging.getLogger(__name__)


class HybridResponder:
    """Answers OCSP queries from an atomically swapped blacklist index."""

    def __init__(self, config: ResponderConfig,
                 crl_loader: Callable[[], bytes] | None = None) -> None:
        self.config = config
        self._crl_loader = crl_loader or (lambda: load_crl_source(config.crl_source))
        self._index: BlacklistIndex | None = None
        self._refresh_lock = threading.Lock()
        issuer = config.issuer_cert
        self._expected_hashes = {
            alg: (alg.digest(issuer.subject_dn.raw),
                  alg.digest(public_key_bits(issuer.public_key_info)))
            for alg in HashAlg
        }

    # -- blacklist lifecycle --------------------------------------------------

    @property
    def index(self) -> BlacklistIndex | None:
        return self._index

    def refresh_blacklist(self, now: datetime.datetime | None = None) -> BlacklistIndex:
        """Rebuild the index from a fresh CRL read and swap it in.

        On failure the previous index stays in effect and SourceUnavailable
        propagates to the caller (the scheduler logs it and retries later).
        """
        now = now or self.config.now()
        with self._refresh_lock:
            generation = (self._index.generation + 1) if self._index else 1
            try:
                snapshot = parse_crl(self._crl_loader())
            except (StaplegridError, OSError) as exc:
                raise SourceUnavailable(f"blacklist refresh failed: {exc}") from exc
            index = build_index(snapshot, loaded_at=now, generation=generation)
            self._index = index  # atomic swap: queries see old or new, never a blend
            return index

    def current_crl(self) -> bytes:
        index = self._index
        if index is None:
            raise SourceUnavailable("no CRL loaded yet")
        return index.crl_raw

    # -- decision -------------------------------------------------------------

    def status_for(self, cert_id: CertId,
                   index: BlacklistIndex | None = None) -> CertStatus:
        """Pure status decision for one CertID against one index generation."""
        index = index if index is not None else self._index
        expected = self._expected_hashes[cert_id.hash_alg]
        if (cert_id.issuer_name_hash, cert_id.issuer_key_hash) != expected:
            return CertStatus.unknown()
        if index is not None:
            hit = index.by_serial.get(cert_id.serial_number)
            if hit is not None:
                # index datetimes are already UTC-normalized at build time
                return CertStatus(StatusKind.REVOKED, hit[0], hit[1])
        return CertStatus.good()

    # -- answering ------------------------------------------------------------

    def answer_query(self, request: OcspRequest,
                     index: BlacklistIndex | None = None,
                     now: datetime.datetime | None = None) -> OcspResponse:
        return decode_ocsp_response(self.answer_encoded(request, index=index, now=now))

    def answer_encoded(self, request: OcspRequest,
                       index: BlacklistIndex | None = None,
                       now: datetime.datetime | None = None) -> bytes:
        index = index if index is not None else self._index
        if index is None:
            return encode_ocsp_response(ResponseStatus.TRY_LATER)
        now = now or self.config.now()
        until = now + datetime.timedelta(seconds=self.config.response_validity)
        singles = [
            SingleResponse(cert_id, self.status_for(cert_id, index), now, until)
            for cert_id in request.cert_ids
        ]
        return encode_ocsp_response(
            ResponseStatus.SUCCESSFUL,
            produced_at=now,
            responder_id=ResponderId.by_name(self.config.signing_cert.subject_dn),
            single_responses=singles,
            nonce_echo=request.nonce,
            signing_key=self.config.signing_key,
            signer_certs=[self.config.signing_cert.raw_der],
        )

    def answer_bytes(self, request_der: bytes,
                     now: datetime.datetime | None = None) -> bytes:
        try:
            request = decode_ocsp_request(request_der)
        except StaplegridError as exc:
            log.debug("malformed OCSP request: %s", exc)
            return encode_ocsp_response(ResponseStatus.MALFORMED_REQUEST)
        return self.answer_encoded(request, now=now)
