"""HTTP service wrapping the responder and cache cores.

Binary OCSP endpoints follow OCSP-over-HTTP conventions: undecodable
payloads get HTTP 200 with an OCSP MALFORMED_REQUEST body, and only
transport-level problems surface as HTTP errors. Admin and cache
endpoints speak JSON via pydantic models.
"""

from __future__ import annotations

import base64
import binascii
import logging
import socket
import threading
import time

import uvicorn
from fastapi import FastAPI, HTTPException, Request, Response
from fastapi.responses import PlainTextResponse
from pydantic import BaseModel

from .cache import StapleCache
from .errors import (
    BindFailure,
    NoOcspUrl,
    NotCached,
    SignatureInvalid,
    SourceUnavailable,
    StaplegridError,
    UpstreamError,
    UpstreamUnreachable,
)
from .responder import HybridResponder
from .transport import OCSP_RESPONSE_MEDIA

log = logging.getLogger(__name__)

CRL_MEDIA = "application/pkix-crl"


# --------------------------------------------------------------------------
# Wire models
# --------------------------------------------------------------------------

class HealthModel(BaseModel):
    status: str
    roles: list[str]


class ResponderStatusModel(BaseModel):
    blacklist_entries: int
    generation: int
    source_crl_last_update: str | None
    loaded_at: str | None
    refresh_interval: int
    response_validity: int


class CacheEntryModel(BaseModel):
    id: int
    serial_number: str
    cert_status: str
    ocsp_url: str
    next_update: str | None
    stale: bool

    @classmethod
    def from_entry(cls, entry) -> "CacheEntryModel":
        return cls(id=entry.id, serial_number=entry.serial_number,
                   cert_status=entry.cert_status, ocsp_url=entry.ocsp_url,
                   next_update=entry.next_update, stale=entry.stale)


class FetchRequestModel(BaseModel):
    certificate_pem: str
    issuer_pem: str


class MaintenanceFailureModel(BaseModel):
    id: int
    error: str


class MaintenanceReportModel(BaseModel):
    checked: int
    updated: list[int]
    skipped: list[int]
    failed: list[MaintenanceFailureModel]


# --------------------------------------------------------------------------
# Application factory
# --------------------------------------------------------------------------

def _cache_http_error(exc: StaplegridError) -> HTTPException:
    if isinstance(exc, NotCached):
        return HTTPException(404, str(exc))
    if isinstance(exc, NoOcspUrl):
        return HTTPException(422, str(exc))
    if isinstance(exc, (UpstreamUnreachable, UpstreamError, SignatureInvalid)):
        return HTTPException(502, str(exc))
    return HTTPException(500, str(exc))


def create_app(responder: HybridResponder | None = None,
               cache: StapleCache | None = None,
               *, refresh_in_background: bool = True) -> FastAPI:
    from contextlib import asynccontextmanager

    roles = [name for name, obj in (("responder", responder), ("cache", cache)) if obj]

    @asynccontextmanager
    async def lifespan(_app: FastAPI):
        stop_event = threading.Event()
        if responder is not None and refresh_in_background:
            threading.Thread(target=_refresh_loop, args=(responder, stop_event),
                             name="blacklist-refresher", daemon=True).start()
        try:
            yield
        finally:
            stop_event.set()

    app = FastAPI(title="staplegrid", version="0.1.0", lifespan=lifespan)

    @app.get("/health", response_model=HealthModel)
    def health() -> HealthModel:
        return HealthModel(status="ok", roles=roles)

    if responder is not None:
        _mount_responder(app, responder)
    if cache is not None:
        _mount_cache(app, cache)
    return app


def _refresh_loop(responder: HybridResponder, stop: threading.Event) -> None:
    interval = responder.config.refresh_interval
    while not stop.wait(interval):
        try:
            index = responder.refresh_blacklist()
            log.info("blacklist refreshed: %d entries (generation %d)",
                     len(index), index.generation)
        except SourceUnavailable as exc:
            log.warning("blacklist refresh failed, keeping previous index: %s", exc)


def _mount_responder(app: FastAPI, responder: HybridResponder) -> None:
    @app.post("/ocsp")
    async def ocsp_post(request: Request) -> Response:
        body = await request.body()
        return Response(content=responder.answer_bytes(body),
                        media_type=OCSP_RESPONSE_MEDIA)

    @app.get("/ocsp/{request_b64:path}")
    def ocsp_get(request_b64: str) -> Response:
        try:
            padded = request_b64 + "=" * (-len(request_b64) % 4)
            der = base64.urlsafe_b64decode(padded)
        except (binascii.Error, ValueError):
            der = b""  # answer_bytes turns this into MALFORMED_REQUEST
        return Response(content=responder.answer_bytes(der),
                        media_type=OCSP_RESPONSE_MEDIA)

    @app.get("/downloadcrl/download_crl")
    def download_crl() -> Response:
        try:
            return Response(content=responder.current_crl(), media_type=CRL_MEDIA)
        except SourceUnavailable as exc:
            raise HTTPException(503, str(exc)) from exc

    @app.get("/responder/status", response_model=ResponderStatusModel)
    def responder_status() -> ResponderStatusModel:
        index = responder.index
        return ResponderStatusModel(
            blacklist_entries=len(index) if index else 0,
            generation=index.generation if index else 0,
            source_crl_last_update=(
                index.source_crl_last_update.isoformat() if index else None),
            loaded_at=index.loaded_at.isoformat() if index else None,
            refresh_interval=responder.config.refresh_interval,
            response_validity=responder.config.response_validity,
        )


def _mount_cache(app: FastAPI, cache: StapleCache) -> None:
    @app.post("/cache/fetch", response_model=CacheEntryModel)
    def cache_fetch(request: FetchRequestModel) -> CacheEntryModel:
        try:
            entry = cache.lookup_or_fetch(request.certificate_pem.encode(),
                                          request.issuer_pem.encode())
        except StaplegridError as exc:
            raise _cache_http_error(exc) from exc
        return CacheEntryModel.from_entry(entry)

    @app.get("/cache/staple/{serial_number}")
    def cache_staple(serial_number: str) -> Response:
        try:
            staple, _ = cache.get_staple(serial_number)
        except StaplegridError as exc:
            raise _cache_http_error(exc) from exc
        return Response(content=staple, media_type=OCSP_RESPONSE_MEDIA)

    @app.get("/cache/entries", response_model=list[CacheEntryModel])
    def cache_entries() -> list[CacheEntryModel]:
        now = cache.now()
        return [CacheEntryModel.from_entry(e.with_staleness(now))
                for e in cache.store.all_entries()]

    @app.post("/cache/maintain", response_model=MaintenanceReportModel)
    def cache_maintain() -> MaintenanceReportModel:
        report = cache.maintain()
        return MaintenanceReportModel(
            checked=report.checked, updated=report.updated, skipped=report.skipped,
            failed=[MaintenanceFailureModel(id=i, error=e) for i, e in report.failed])

    @app.get("/cache/export", response_class=PlainTextResponse)
    def cache_export() -> str:
        return cache.export_table()


# --------------------------------------------------------------------------
# Running service handle
# --------------------------------------------------------------------------

class RunningService:
    """A uvicorn server on a background thread, with a blocking foreground
    mode for the CLI (where uvicorn's signal handlers provide graceful
    shutdown)."""

    def __init__(self, app: FastAPI, host: str, port: int) -> None:
        self.host = host
        self.port = port
        self._probe_bind(host, port)
        self._server = uvicorn.Server(uvicorn.Config(
            app, host=host, port=port, log_level="warning", access_log=False))
        self._thread: threading.Thread | None = None

    @staticmethod
    def _probe_bind(host: str, port: int) -> None:
        probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            probe.bind((host, port))
        except OSError as exc:
            raise BindFailure(f"cannot bind {host}:{port}: {exc}") from exc
        finally:
            probe.close()

    @property
    def base_url(self) -> str:
        return f"http://{self.host}:{self.port}"

    def start(self, timeout: float = 10.0) -> "RunningService":
        self._thread = threading.Thread(target=self._server.run,
                                        name="staplegrid-http", daemon=True)
        self._thread.start()
        deadline = time.monotonic() + timeout
        while not self._server.started:
            if time.monotonic() > deadline:
                raise BindFailure(f"service on {self.base_url} did not start in time")
            if not self._thread.is_alive():
                raise BindFailure(f"service on {self.base_url} exited during startup")
            time.sleep(0.01)
        return self

    def stop(self, timeout: float = 10.0) -> None:
        self._server.should_exit = True
        if self._thread is not None:
            self._thread.join(timeout)

    def run_foreground(self) -> None:
        self._server.run()


def serve(config, cache: StapleCache | None = None, *,
          foreground: bool = False) -> RunningService:
    """Serve a hybrid responder (and optionally a cache) per its config.

    The blacklist is loaded before the service accepts queries; a dead CRL
    source at startup is a hard error rather than a silently empty blacklist.
    """
    responder = HybridResponder(config)
    responder.refresh_blacklist()
    app = create_app(responder=responder, cache=cache)
    service = RunningService(app, config.host, config.port)
    if foreground:
        service.run_foreground()
        return service
    return service.start()
