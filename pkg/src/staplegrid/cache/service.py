"""Stapling cache responder: fetch once per serial, persist, refresh on schedule.

Fetch requests carry no nonce: staples are pre-produced and shared, so
freshness comes from the validity window rather than per-query nonces.
"""

from __future__ import annotations

import datetime
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from ..codec import (
    CertMeta,
    HashAlg,
    OcspRequest,
    OcspResponse,
    ResponseStatus,
    SingleResponse,
    compute_cert_id,
    decode_ocsp_response,
    encode_ocsp_request,
    parse_certificate,
    verify_ocsp_signature,
)
from ..codec.der import to_utc_second
from ..errors import NoOcspUrl, NotCached, StaplegridError, UpstreamError
from ..transport import OcspTransport
from .store import CacheEntry, CacheStore, format_time, recover_store, validate_entry

log = logging.getLogger(__name__)

REFETCH_WINDOW = datetime.timedelta(days=7)


@dataclass
class MaintenanceReport:
    checked: int = 0
    updated: list[int] = field(default_factory=list)
    skipped: list[int] = field(default_factory=list)
    failed: list[tuple[int, str]] = field(default_factory=list)

    def render(self) -> str:
        lines = []
        for row_id in self.updated:
            lines.append(f"ID: {row_id} need update")
            lines.append(f"ID: {row_id} update completed")
        for row_id in self.skipped:
            lines.append(f"ID: {row_id} don't need update")
        for row_id, error in self.failed:
            lines.append(f"ID: {row_id} need update")
            lines.append(f"ID: {row_id} update failed: {error}")
        return "\n".join(lines)


class StapleCache:
    """Deduplicating cache over verified upstream OCSP responses."""

    def __init__(
        self,
        store: CacheStore,
        transport: OcspTransport,
        trust_anchors: list[CertMeta] | tuple[CertMeta, ...],
        *,
        hash_alg: HashAlg = HashAlg.SHA1,
        clock: Callable[[], datetime.datetime] | None = None,
        refetch_window: datetime.timedelta = REFETCH_WINDOW,
    ) -> None:
        self.store = store
        self.transport = transport
        self.trust_anchors = list(trust_anchors)
        self.hash_alg = hash_alg
        self._clock = clock or (lambda: datetime.datetime.now(datetime.timezone.utc))
        self.refetch_window = refetch_window

    @classmethod
    def recover(cls, store_path: str | Path, transport: OcspTransport,
                trust_anchors, **kwargs) -> tuple["StapleCache", list[dict]]:
        """Warm recovery: reopen a persisted store, quarantining bad rows.

        When trust anchors are given each surviving blob must also verify:
        the signature and chain are checked against the response's own
        producedAt, so old-but-genuine rows survive while any in-blob
        corruption is quarantined.
        """
        anchors = list(trust_anchors)

        def validator(entry) -> None:
            validate_entry(entry)
            if anchors:
                decoded = decode_ocsp_response(entry.ocsp_response)
                verify_ocsp_signature(decoded, anchors, decoded.produced_at)

        store, quarantined = recover_store(store_path, validator)
        return cls(store, transport, trust_anchors, **kwargs), quarantined

    def now(self) -> datetime.datetime:
        return to_utc_second(self._clock())

    # -- fetch path -------------------------------------------------------------

    def _fetch_verified(self, url: str, cert: CertMeta, issuer: CertMeta,
                        now: datetime.datetime) -> tuple[OcspResponse, SingleResponse]:
        cert_id = compute_cert_id(cert, issuer, self.hash_alg)
        request_der = encode_ocsp_request(OcspRequest(cert_ids=(cert_id,)))
        body = self.transport.post(url, request_der)
        response = decode_ocsp_response(body)
        if response.response_status is not ResponseStatus.SUCCESSFUL:
            raise UpstreamError(response.response_status.name)
        verify_ocsp_signature(response, self.trust_anchors, now)
        single = response.single_for(cert_id)
        if single is None:
            raise UpstreamError(response.response_status.name,
                                "response carries no entry for the queried CertID")
        return response, single

    def lookup_or_fetch(self, cert_der: bytes, issuer_der: bytes,
                        now: datetime.datetime | None = None) -> CacheEntry:
        """Return the existing row for this serial, or fetch-verify-persist one.

        An existing row short-circuits before any network activity. Unverified
        responses are never written.
        """
        now = to_utc_second(now) if now else self.now()
        cert = parse_certificate(cert_der)
        existing = self.store.get(str(cert.serial_number))
        if existing is not None:
            return existing.with_staleness(now)
        if not cert.aia_ocsp_url:
            raise NoOcspUrl(f"certificate {cert.serial_number:#x} has no AIA OCSP URL")
        issuer = parse_certificate(issuer_der)
        response, single = self._fetch_verified(cert.aia_ocsp_url, cert, issuer, now)
        entry = self.store.insert_if_absent(
            serial_number=str(cert.serial_number),
            cert_status=single.status.kind.value,
            ocsp_url=cert.aia_ocsp_url,
            next_update=format_time(single.next_update) if single.next_update else None,
            ocsp_response=response.raw_der,
            certificate=bytes(cert_der),
            issuer_certificate=bytes(issuer_der),
        )
        return entry.with_staleness(now)

    def get_staple(self, serial_number: int | str) -> tuple[bytes, CacheEntry]:
        entry = self.store.get(str(serial_number))
        if entry is None:
            raise NotCached(f"no cache row for serial {serial_number}")
        entry = entry.with_staleness(self.now())
        return entry.ocsp_response, entry

    # -- maintenance --------------------------------------------------------------

    def needs_update(self, entry: CacheEntry, now: datetime.datetime) -> bool:
        """The seven-day rule: refetch when nextUpdate is less than seven
        days away, including already-expired rows."""
        boundary = entry.next_update_dt()
        if boundary is None:
            return True
        return boundary - now < self.refetch_window

    def maintain(self, now: datetime.datetime | None = None) -> MaintenanceReport:
        """One pass over the whole table; per-row failures never abort the pass."""
        now = to_utc_second(now) if now else self.now()
        report = MaintenanceReport()
        for entry in self.store.all_entries():
            report.checked += 1
            if not self.needs_update(entry, now):
                report.skipped.append(entry.id)
                continue
            try:
                cert = parse_certificate(entry.certificate)
                issuer = parse_certificate(entry.issuer_certificate)
                response, single = self._fetch_verified(entry.ocsp_url, cert, issuer, now)
                self.store.update_response(
                    entry.id,
                    cert_status=single.status.kind.value,
                    next_update=format_time(single.next_update) if single.next_update else None,
                    ocsp_response=response.raw_der,
                )
                report.updated.append(entry.id)
            except StaplegridError as exc:
                log.warning("maintenance: row %d kept, refetch failed: %s", entry.id, exc)
                report.failed.append((entry.id, str(exc)))
        return report

    # -- inspection ---------------------------------------------------------------

    def export_table(self, blob_width: int = 64) -> str:
        entries = self.store.all_entries()
        lines = [f"ocsp_responses: {len(entries)} rows"]
        for entry in entries:
            lines.append(f"ID: {entry.id}")
            lines.append(f"serial_number: {entry.serial_number}")
            lines.append(f"cert_status: {entry.cert_status}")
            lines.append(f"ocsp_url: {entry.ocsp_url}")
            lines.append(f"next_update: {entry.next_update or 'NONE'}")
            for column in ("ocsp_response", "certificate", "issuer_certificate"):
                blob = getattr(entry, column)
                shown = repr(blob[:blob_width])
                suffix = f" ... ({len(blob)} bytes)" if len(blob) > blob_width else ""
                lines.append(f"{column}: {shown}{suffix}")
        return "\n".join(lines)
