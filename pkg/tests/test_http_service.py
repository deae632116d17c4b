"""HTTP surface: OCSP endpoints, CRL download, cache API, service lifecycle."""

import base64

import pytest
from fastapi.testclient import TestClient

from staplegrid.cache import CacheStore, StapleCache
from staplegrid.codec import (
    CrlEntry,
    OcspRequest,
    ResponseStatus,
    RevocationReason,
    StatusKind,
    compute_cert_id,
    decode_ocsp_response,
    encode_crl,
    encode_ocsp_request,
    parse_crl,
    verify_ocsp_signature,
)
from staplegrid.codec import pem as pemcodec
from staplegrid.errors import BindFailure
from staplegrid.responder import HybridResponder, ResponderConfig
from staplegrid.service import RunningService, create_app
from staplegrid.transport import CountingTransport, InProcessTransport

from conftest import FIXED_NOW

UPSTREAM_URL = "http://upstream.test/ocsp"


@pytest.fixture()
def stack(authority, leaf):
    revoked = [CrlEntry(leaf.serial_number, FIXED_NOW, RevocationReason.KEY_COMPROMISE)]
    crl_raw = encode_crl(authority.root_cert.subject_dn.raw, FIXED_NOW, None,
                         revoked, authority.root_key)
    config = ResponderConfig(
        issuer_cert=authority.root_cert,
        signing_key=authority.root_key,
        signing_cert=authority.root_cert,
        crl_source="<memory>",
        clock=lambda: FIXED_NOW,
    )
    responder = HybridResponder(config, crl_loader=lambda: crl_raw)
    responder.refresh_blacklist()
    transport = CountingTransport(InProcessTransport({
        UPSTREAM_URL: responder.answer_bytes}))
    cache = StapleCache(CacheStore(":memory:"), transport, [authority.root_cert],
                        clock=lambda: FIXED_NOW)
    app = create_app(responder=responder, cache=cache, refresh_in_background=False)
    return TestClient(app), responder, cache


def _request_bytes(authority, leaf) -> bytes:
    cert_id = compute_cert_id(leaf, authority.root_cert)
    return encode_ocsp_request(OcspRequest(cert_ids=(cert_id,)))


def test_health_reports_roles(stack):
    client, _, _ = stack
    body = client.get("/health").json()
    assert body == {"status": "ok", "roles": ["responder", "cache"]}


def test_post_ocsp_round_trip(stack, authority, leaf):
    client, _, _ = stack
    response = client.post("/ocsp", content=_request_bytes(authority, leaf),
                           headers={"Content-Type": "application/ocsp-request"})
    assert response.status_code == 200
    assert response.headers["content-type"].startswith("application/ocsp-response")
    decoded = decode_ocsp_response(response.content)
    verify_ocsp_signature(decoded, [authority.root_cert], FIXED_NOW)
    assert decoded.single_responses[0].status.kind is StatusKind.REVOKED


def test_post_garbage_yields_malformed_request_not_http_error(stack):
    client, _, _ = stack
    response = client.post("/ocsp", content=b"\x01\x02garbage")
    assert response.status_code == 200
    decoded = decode_ocsp_response(response.content)
    assert decoded.response_status is ResponseStatus.MALFORMED_REQUEST


def test_get_ocsp_base64url(stack, authority, leaf):
    client, _, _ = stack
    encoded = base64.urlsafe_b64encode(_request_bytes(authority, leaf)).decode().rstrip("=")
    response = client.get(f"/ocsp/{encoded}")
    assert response.status_code == 200
    decoded = decode_ocsp_response(response.content)
    assert decoded.response_status is ResponseStatus.SUCCESSFUL


def test_get_ocsp_bad_base64_is_malformed_request(stack):
    client, _, _ = stack
    response = client.get("/ocsp/!!!not-base64!!!")
    assert response.status_code == 200
    assert decode_ocsp_response(response.content).response_status \
        is ResponseStatus.MALFORMED_REQUEST


def test_download_crl_endpoint(stack, leaf):
    client, _, _ = stack
    response = client.get("/downloadcrl/download_crl")
    assert response.status_code == 200
    snapshot = parse_crl(response.content)
    assert [e.serial_number for e in snapshot.entries] == [leaf.serial_number]


def test_responder_status_endpoint(stack):
    client, _, _ = stack
    body = client.get("/responder/status").json()
    assert body["blacklist_entries"] == 1
    assert body["generation"] == 1
    assert body["refresh_interval"] == 3600
    assert body["response_validity"] == 604800


def test_cache_fetch_staple_entries_export(stack, authority):
    client, _, cache = stack
    meter = authority.issue_cert("CN=http-meter, O=aa", aia_url=UPSTREAM_URL,
                                 now=FIXED_NOW)
    payload = {
        "certificate_pem": pemcodec.encode(meter.raw_der, pemcodec.CERTIFICATE).decode(),
        "issuer_pem": pemcodec.encode(authority.root_cert.raw_der,
                                      pemcodec.CERTIFICATE).decode(),
    }
    created = client.post("/cache/fetch", json=payload)
    assert created.status_code == 200
    entry = created.json()
    assert entry["serial_number"] == str(meter.serial_number)
    assert entry["cert_status"] == "GOOD"
    assert entry["stale"] is False

    staple = client.get(f"/cache/staple/{meter.serial_number}")
    assert staple.status_code == 200
    decoded = decode_ocsp_response(staple.content)
    assert decoded.response_status is ResponseStatus.SUCCESSFUL

    entries = client.get("/cache/entries").json()
    assert [e["serial_number"] for e in entries] == [str(meter.serial_number)]

    report = client.post("/cache/maintain").json()
    assert report["checked"] == 1
    assert report["skipped"] == [entry["id"]]

    export = client.get("/cache/export")
    assert export.status_code == 200
    assert export.text.startswith("ocsp_responses: 1 rows")


def test_cache_staple_missing_is_404(stack):
    client, _, _ = stack
    assert client.get("/cache/staple/999999").status_code == 404


def test_cache_fetch_no_aia_is_422(stack, authority):
    client, _, _ = stack
    meter = authority.issue_cert("CN=no-aia, O=aa", now=FIXED_NOW)
    payload = {
        "certificate_pem": pemcodec.encode(meter.raw_der, pemcodec.CERTIFICATE).decode(),
        "issuer_pem": pemcodec.encode(authority.root_cert.raw_der,
                                      pemcodec.CERTIFICATE).decode(),
    }
    assert client.post("/cache/fetch", json=payload).status_code == 422


def test_cache_fetch_upstream_down_is_502(stack, authority):
    client, _, cache = stack
    cache.transport.inner.down = True
    meter = authority.issue_cert("CN=down, O=aa", aia_url=UPSTREAM_URL, now=FIXED_NOW)
    payload = {
        "certificate_pem": pemcodec.encode(meter.raw_der, pemcodec.CERTIFICATE).decode(),
        "issuer_pem": pemcodec.encode(authority.root_cert.raw_der,
                                      pemcodec.CERTIFICATE).decode(),
    }
    assert client.post("/cache/fetch", json=payload).status_code == 502


def test_running_service_over_real_sockets(stack, authority, leaf):
    import httpx

    _, responder, _ = stack
    app = create_app(responder=responder, refresh_in_background=False)
    service = RunningService(app, "127.0.0.1", _free_port()).start()
    try:
        body = _request_bytes(authority, leaf)
        response = httpx.post(f"{service.base_url}/ocsp", content=body,
                              headers={"Content-Type": "application/ocsp-request"})
        assert response.status_code == 200
        decoded = decode_ocsp_response(response.content)
        assert decoded.single_responses[0].status.kind is StatusKind.REVOKED
        # second service on the same port must fail to bind
        with pytest.raises(BindFailure):
            RunningService(app, "127.0.0.1", service.port)
    finally:
        service.stop()


def _free_port() -> int:
    import socket

    with socket.socket() as probe:
        probe.bind(("127.0.0.1", 0))
        return probe.getsockname()[1]


def test_serve_fails_fast_on_dead_crl_source(authority, tmp_path):
    from staplegrid.errors import SourceUnavailable
    from staplegrid.service import serve

    config = ResponderConfig(
        issuer_cert=authority.root_cert,
        signing_key=authority.root_key,
        signing_cert=authority.root_cert,
        crl_source=str(tmp_path / "missing.crl"),
        listen_address=f"127.0.0.1:{_free_port()}",
    )
    with pytest.raises(SourceUnavailable):
        serve(config)
