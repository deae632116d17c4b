"""Responder configuration: plain key=value files with STAPLEGRID_* overrides."""

from __future__ import annotations

import datetime
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping

from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric import ec

from ..codec import CertMeta, parse_certificate
from ..codec.der import to_utc_second

ENV_PREFIX = "STAPLEGRID_"

DEFAULT_REFRESH_INTERVAL = 3600        # hourly blacklist refresh
DEFAULT_RESPONSE_VALIDITY = 604800     # 7 days, composes with the cache rule


def load_settings(path: str | Path | None,
                  env: Mapping[str, str] | None = None) -> dict[str, str]:
    """Merge a key=value config file with environment overrides.

    Lines starting with '#' and blank lines are skipped. An env var
    STAPLEGRID_SOME_KEY overrides file key some_key.
    """
    values: dict[str, str] = {}
    if path is not None:
        for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, _, value = line.partition("=")
            values[key.strip().lower()] = value.strip()
    env = os.environ if env is None else env
    for name, value in env.items():
        if name.startswith(ENV_PREFIX):
            values[name[len(ENV_PREFIX):].lower()] = value
    return values


@dataclass
class ResponderConfig:
    issuer_cert: CertMeta
    signing_key: ec.EllipticCurvePrivateKey
    signing_cert: CertMeta
    crl_source: str = ""
    listen_address: str = "127.0.0.1:8080"
    refresh_interval: int = DEFAULT_REFRESH_INTERVAL
    response_validity: int = DEFAULT_RESPONSE_VALIDITY
    clock: Callable[[], datetime.datetime] | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.refresh_interval <= 0:
            raise ValueError("refresh_interval must be positive")
        if self.response_validity <= 0:
            raise ValueError("response_validity must be positive")

    def now(self) -> datetime.datetime:
        if self.clock is not None:
            return to_utc_second(self.clock())
        return to_utc_second(datetime.datetime.now(datetime.timezone.utc))

    @property
    def host(self) -> str:
        return self.listen_address.rsplit(":", 1)[0]

    @property
    def port(self) -> int:
        return int(self.listen_address.rsplit(":", 1)[1])

    @classmethod
    def from_settings(cls, settings: Mapping[str, str]) -> "ResponderConfig":
        issuer = parse_certificate(Path(settings["issuer_cert"]).read_bytes())
        key = serialization.load_pem_private_key(
            Path(settings["signing_key"]).read_bytes(), None)
        if not isinstance(key, ec.EllipticCurvePrivateKey):
            raise ValueError("signing_key must be an EC P-256 private key")
        signing_cert = issuer
        if settings.get("signing_cert"):
            signing_cert = parse_certificate(Path(settings["signing_cert"]).read_bytes())
        clock = None
        if settings.get("fixed_time"):
            frozen = to_utc_second(datetime.datetime.fromisoformat(settings["fixed_time"]))
            clock = lambda: frozen  # noqa: E731
        return cls(
            issuer_cert=issuer,
            signing_key=key,
            signing_cert=signing_cert,
            crl_source=settings.get("crl_source", ""),
            listen_address=settings.get("listen_address", "127.0.0.1:8080"),
            refresh_interval=int(settings.get("refresh_interval", DEFAULT_REFRESH_INTERVAL)),
            response_validity=int(settings.get("response_validity", DEFAULT_RESPONSE_VALIDITY)),
            clock=clock,
        )
