"""Blacklist index derived from a CRL, plus the source loader.

The index is an immutable value: refreshing builds a whole new one and
swaps it in, so concurrent queries always see one coherent CRL
generation.
"""

from __future__ import annotations

import datetime
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Mapping

import httpx

from ..codec import CrlSnapshot, RevocationReason
from ..errors import SourceUnavailable, StaplegridError


@dataclass(frozen=True)
class BlacklistIndex:
    by_serial: Mapping[int, tuple[datetime.datetime, RevocationReason]]
    source_crl_last_update: datetime.datetime
    loaded_at: datetime.datetime
    generation: int = 0
    crl_raw: bytes = field(repr=False, default=b"")

    def __len__(self) -> int:
        return len(self.by_serial)


def build_index(snapshot: CrlSnapshot, loaded_at: datetime.datetime,
                generation: int = 0) -> BlacklistIndex:
    by_serial = {e.serial_number: (e.revocation_date, e.reason) for e in snapshot.entries}
    return BlacklistIndex(
        by_serial=MappingProxyType(by_serial),
        source_crl_last_update=snapshot.last_update,
        loaded_at=loaded_at,
        generation=generation,
        crl_raw=snapshot.raw,
    )


def load_crl_source(source: str, timeout: float = 10.0) -> bytes:
    """Fetch CRL bytes from an http(s) URL or a filesystem path."""
    try:
        if source.startswith(("http://", "https://")):
            response = httpx.get(source, timeout=timeout)
            if response.status_code != 200:
                raise SourceUnavailable(
                    f"CRL source {source} answered HTTP {response.status_code}")
            return response.content
        return Path(source).read_bytes()
    except StaplegridError:
        raise
    except (OSError, httpx.HTTPError) as exc:
        raise SourceUnavailable(f"cannot read CRL source {source}: {exc}") from exc
