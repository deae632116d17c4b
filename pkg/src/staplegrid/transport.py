"""OCSP-over-HTTP transports.

A transport posts one encoded request and returns the raw response body.
The in-process variant routes straight into responder cores so the
simulator and tests run without sockets; the counting wrapper is how
query-accounting invariants are asserted.
"""

from __future__ import annotations

import threading
from typing import Callable, Protocol

import httpx

from .errors import UpstreamUnreachable

OCSP_REQUEST_MEDIA = "application/ocsp-request"
OCSP_RESPONSE_MEDIA = "application/ocsp-response"


class OcspTransport(Protocol):
    def post(self, url: str, body: bytes) -> bytes: ...


class HttpOcspTransport:
    """Real HTTP POST with the OCSP media types, reusing one connection pool."""

    def __init__(self, timeout: float = 10.0) -> None:
        self._client = httpx.Client(timeout=timeout)

    def post(self, url: str, body: bytes) -> bytes:
        try:
            response = self._client.post(
                url, content=body, headers={"Content-Type": OCSP_REQUEST_MEDIA})
        except httpx.HTTPError as exc:
            raise UpstreamUnreachable(f"POST {url}: {exc}") from exc
        if response.status_code != 200:
            raise UpstreamUnreachable(f"POST {url}: HTTP {response.status_code}")
        return response.content

    def close(self) -> None:
        self._client.close()


class InProcessTransport:
    """Routes requests to handler callables by URL, no sockets involved."""

    def __init__(self, routes: dict[str, Callable[[bytes], bytes]] | None = None) -> None:
        self.routes = dict(routes or {})
        self.down = False

    def post(self, url: str, body: bytes) -> bytes:
        if self.down:
            raise UpstreamUnreachable(f"{url}: upstream marked down")
        handler = self.routes.get(url)
        if handler is None:
            raise UpstreamUnreachable(f"{url}: no in-process route")
        return handler(body)


class CountingTransport:
    """Counts posts going through the wrapped transport (thread-safe)."""

    def __init__(self, inner: OcspTransport) -> None:
        self.inner = inner
        self._lock = threading.Lock()
        self.requests = 0
        self.bytes_sent = 0
        self.bytes_received = 0

    def post(self, url: str, body: bytes) -> bytes:
        with self._lock:
            self.requests += 1
            self.bytes_sent += len(body)
        result = self.inner.post(url, body)
        with self._lock:
            self.bytes_received += len(result)
        return result

    def reset(self) -> None:
        with self._lock:
            self.requests = 0
            self.bytes_sent = 0
            self.bytes_received = 0
