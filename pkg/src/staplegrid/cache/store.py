"""Single-file embedded store for stapled OCSP responses.

SQLite with the ocsp_responses schema; serial_number is kept as a
decimal string and made unique by index so deduplication is enforced by
the store itself, not just by callers.
"""

from __future__ import annotations

import base64
import datetime
import json
import sqlite3
import threading
from dataclasses import dataclass, replace
from pathlib import Path

from ..codec import StatusKind, decode_ocsp_response, parse_certificate
from ..errors import StaplegridError, StoreCorrupt

SCHEMA = """
CREATE TABLE IF NOT EXISTS ocsp_responses (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    serial_number TEXT,
    cert_status TEXT,
    ocsp_url TEXT,
    next_update TEXT,
    ocsp_response BLOB,
    certificate BLOB,
    issuer_certificate BLOB
)
"""
UNIQUE_INDEX = """
CREATE UNIQUE INDEX IF NOT EXISTS ocsp_responses_serial
ON ocsp_responses(serial_number)
"""

TIME_FORMAT = "%Y-%m-%d %H:%M:%S"


def format_time(dt: datetime.datetime) -> str:
    return dt.astimezone(datetime.timezone.utc).strftime(TIME_FORMAT)


def parse_row_time(text: str) -> datetime.datetime:
    return datetime.datetime.strptime(text, TIME_FORMAT).replace(
        tzinfo=datetime.timezone.utc)


@dataclass(frozen=True)
class CacheEntry:
    """One ocsp_responses row; `stale` is derived metadata, not a column."""

    id: int
    serial_number: str
    cert_status: str
    ocsp_url: str
    next_update: str | None
    ocsp_response: bytes
    certificate: bytes
    issuer_certificate: bytes
    stale: bool = False

    def next_update_dt(self) -> datetime.datetime | None:
        if not self.next_update:
            return None
        return parse_row_time(self.next_update)

    def with_staleness(self, now: datetime.datetime) -> "CacheEntry":
        boundary = self.next_update_dt()
        return replace(self, stale=boundary is not None and boundary < now)


class CacheStore:
    """Thread-safe row access; all writes serialize through one lock."""

    def __init__(self, path: str | Path) -> None:
        self.path = str(path)
        self._lock = threading.RLock()
        try:
            self._conn = sqlite3.connect(self.path, check_same_thread=False)
            self._conn.execute(SCHEMA)
            self._conn.execute(UNIQUE_INDEX)
            self._conn.commit()
        except sqlite3.DatabaseError as exc:
            raise StoreCorrupt(f"cannot open store {self.path}: {exc}") from exc

    def close(self) -> None:
        with self._lock:
            self._conn.close()

    # -- row access -----------------------------------------------------------

    _COLUMNS = ("id, serial_number, cert_status, ocsp_url, next_update, "
                "ocsp_response, certificate, issuer_certificate")

    @staticmethod
    def _entry(row) -> CacheEntry:
        return CacheEntry(
            id=row[0], serial_number=row[1], cert_status=row[2], ocsp_url=row[3],
            next_update=row[4],
            ocsp_response=bytes(row[5]), certificate=bytes(row[6]),
            issuer_certificate=bytes(row[7]),
        )

    def get(self, serial_number: str) -> CacheEntry | None:
        with self._lock:
            row = self._conn.execute(
                f"SELECT {self._COLUMNS} FROM ocsp_responses WHERE serial_number = ?",
                (serial_number,)).fetchone()
        return self._entry(row) if row else None

    def insert_if_absent(self, serial_number: str, cert_status: str, ocsp_url: str,
                         next_update: str | None, ocsp_response: bytes,
                         certificate: bytes, issuer_certificate: bytes) -> CacheEntry:
        """Insert unless the serial already has a row; returns the winning row."""
        with self._lock:
            self._conn.execute(
                "INSERT OR IGNORE INTO ocsp_responses "
                "(serial_number, cert_status, ocsp_url, next_update, "
                " ocsp_response, certificate, issuer_certificate) "
                "VALUES (?, ?, ?, ?, ?, ?, ?)",
                (serial_number, cert_status, ocsp_url, next_update,
                 ocsp_response, certificate, issuer_certificate))
            self._conn.commit()
        entry = self.get(serial_number)
        assert entry is not None
        return entry

    def update_response(self, row_id: int, cert_status: str,
                        next_update: str | None, ocsp_response: bytes) -> None:
        with self._lock:
            self._conn.execute(
                "UPDATE ocsp_responses SET cert_status = ?, next_update = ?, "
                "ocsp_response = ? WHERE id = ?",
                (cert_status, next_update, ocsp_response, row_id))
            self._conn.commit()

    def all_entries(self) -> list[CacheEntry]:
        with self._lock:
            rows = self._conn.execute(
                f"SELECT {self._COLUMNS} FROM ocsp_responses ORDER BY id").fetchall()
        return [self._entry(row) for row in rows]

    def count(self) -> int:
        with self._lock:
            return self._conn.execute("SELECT COUNT(*) FROM ocsp_responses").fetchone()[0]

    def delete(self, row_id: int) -> None:
        with self._lock:
            self._conn.execute("DELETE FROM ocsp_responses WHERE id = ?", (row_id,))
            self._conn.commit()


def validate_entry(entry: CacheEntry) -> None:
    """Structural row validation: blob decodes, columns agree, cert matches."""
    try:
        serial = int(entry.serial_number)
    except (TypeError, ValueError) as exc:
        raise StaplegridError(f"serial_number {entry.serial_number!r} is not decimal") from exc
    response = decode_ocsp_response(entry.ocsp_response)
    single = next((s for s in response.single_responses
                   if s.cert_id.serial_number == serial), None)
    if single is None:
        raise StaplegridError("stored response has no entry for this serial")
    if single.status.kind is not StatusKind(entry.cert_status):
        raise StaplegridError(
            f"cert_status column {entry.cert_status} disagrees with blob "
            f"{single.status.kind.value}")
    blob_next = format_time(single.next_update) if single.next_update else None
    if blob_next != entry.next_update:
        raise StaplegridError(
            f"next_update column {entry.next_update!r} disagrees with blob {blob_next!r}")
    cert = parse_certificate(entry.certificate)
    if cert.serial_number != serial:
        raise StaplegridError("certificate blob serial disagrees with serial_number")


def recover_store(path: str | Path,
                  validator=validate_entry) -> tuple[CacheStore, list[dict]]:
    """Open a store, quarantining rows that fail validation to a sidecar file.

    StoreCorrupt is raised only when the file itself is unreadable; bad rows
    are moved out so the remaining table keeps serving.
    """
    store = CacheStore(path)
    try:
        entries = store.all_entries()
    except sqlite3.DatabaseError as exc:
        raise StoreCorrupt(f"store {path} is unreadable: {exc}") from exc
    quarantined: list[dict] = []
    for entry in entries:
        try:
            validator(entry)
        except StaplegridError as exc:
            quarantined.append({
                "id": entry.id,
                "serial_number": entry.serial_number,
                "cert_status": entry.cert_status,
                "ocsp_url": entry.ocsp_url,
                "next_update": entry.next_update,
                "ocsp_response": base64.b64encode(entry.ocsp_response).decode(),
                "certificate": base64.b64encode(entry.certificate).decode(),
                "issuer_certificate": base64.b64encode(entry.issuer_certificate).decode(),
                "error": str(exc),
            })
            store.delete(entry.id)
    if quarantined and store.path != ":memory:":
        sidecar = Path(str(path) + ".quarantine.jsonl")
        with sidecar.open("a") as fh:
            for record in quarantined:
                fh.write(json.dumps(record) + "\n")
    return store, quarantined
