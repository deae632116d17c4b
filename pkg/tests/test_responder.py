"""Hybrid responder semantics: blacklist answers, refresh, atomic swap."""

import datetime
import random
import threading

import pytest

from staplegrid.authority import CertificateAuthority
from staplegrid.codec import (
    CertId,
    CrlEntry,
    HashAlg,
    OcspRequest,
    ResponseStatus,
    RevocationReason,
    StatusKind,
    compute_cert_id,
    decode_ocsp_response,
    encode_crl,
    encode_ocsp_request,
    verify_ocsp_signature,
)
from staplegrid.errors import SourceUnavailable
from staplegrid.responder import HybridResponder, ResponderConfig
from staplegrid.responder.blacklist import build_index

from conftest import FIXED_NOW

FLEET_SERIALS = (0x221A0A99711F9968, 0x308C707EA89F47A5, 0x5238F3475665F7C4)


class CrlFeed:
    """Swappable in-memory CRL source with an outage switch."""

    def __init__(self, raw: bytes = b"") -> None:
        self.raw = raw
        self.down = False

    def __call__(self) -> bytes:
        if self.down:
            raise OSError("source offline")
        return self.raw


@pytest.fixture()
def rig(authority):
    feed = CrlFeed()
    config = ResponderConfig(
        issuer_cert=authority.root_cert,
        signing_key=authority.root_key,
        signing_cert=authority.root_cert,
        crl_source="<memory>",
        clock=lambda: FIXED_NOW,
    )
    responder = HybridResponder(config, crl_loader=feed)
    return responder, feed


def _crl_with(authority, serials, reason=RevocationReason.KEY_COMPROMISE) -> bytes:
    entries = [CrlEntry(s, FIXED_NOW - datetime.timedelta(days=1), reason) for s in serials]
    return encode_crl(authority.root_cert.subject_dn.raw, FIXED_NOW, None,
                      entries, authority.root_key)


def _query(responder, authority, serial, hash_alg=HashAlg.SHA1):
    issuer = authority.root_cert
    cert_id = CertId(
        hash_alg,
        hash_alg.digest(issuer.subject_dn.raw),
        hash_alg.digest(__import__("staplegrid.codec", fromlist=["public_key_bits"])
                        .public_key_bits(issuer.public_key_info)),
        serial)
    response = responder.answer_query(OcspRequest(cert_ids=(cert_id,)))
    return response.single_responses[0]


def test_fleet_serial_revoked_with_reason(rig, authority):
    responder, feed = rig
    feed.raw = _crl_with(authority, FLEET_SERIALS)
    responder.refresh_blacklist()
    single = _query(responder, authority, 0x221A0A99711F9968)
    assert single.status.kind is StatusKind.REVOKED
    assert single.status.reason is RevocationReason.KEY_COMPROMISE


def test_fresh_serial_answers_good(rig, authority):
    responder, feed = rig
    feed.raw = _crl_with(authority, FLEET_SERIALS)
    responder.refresh_blacklist()
    assert _query(responder, authority, 0xDEADBEEF).status.kind is StatusKind.GOOD


def test_foreign_issuer_answers_unknown(rig, authority):
    responder, feed = rig
    feed.raw = _crl_with(authority, FLEET_SERIALS)
    responder.refresh_blacklist()
    foreign = CertificateAuthority.generate_root("CN=foreign, O=zz", seed=61, now=FIXED_NOW)
    leaf = foreign.issue_cert("CN=f, O=zz", now=FIXED_NOW)
    cert_id = compute_cert_id(leaf, foreign.root_cert)
    response = responder.answer_query(OcspRequest(cert_ids=(cert_id,)))
    assert response.single_responses[0].status.kind is StatusKind.UNKNOWN


def test_refresh_picks_up_new_serial(rig, authority):
    responder, feed = rig
    feed.raw = _crl_with(authority, [])
    responder.refresh_blacklist()
    assert _query(responder, authority, 777).status.kind is StatusKind.GOOD
    feed.raw = _crl_with(authority, [777])
    responder.refresh_blacklist()
    assert _query(responder, authority, 777).status.kind is StatusKind.REVOKED


def test_source_down_keeps_previous_index(rig, authority):
    responder, feed = rig
    feed.raw = _crl_with(authority, [42])
    responder.refresh_blacklist()
    feed.down = True
    with pytest.raises(SourceUnavailable):
        responder.refresh_blacklist()
    assert _query(responder, authority, 42).status.kind is StatusKind.REVOKED


def test_index_key_set_matches_linear_scan_for_random_sets(authority):
    rng = random.Random(20240619)
    for _ in range(1000):
        serials = [rng.getrandbits(128) | 1 for _ in range(rng.randint(0, 60))]
        entries = tuple(CrlEntry(s, FIXED_NOW, RevocationReason.UNSPECIFIED)
                        for s in serials)
        from staplegrid.codec.crl import CrlSnapshot

        snapshot = CrlSnapshot(
            issuer_dn=authority.root_cert.subject_dn, last_update=FIXED_NOW,
            next_update=None, entries=entries, signature_alg="")
        index = build_index(snapshot, FIXED_NOW)
        assert set(index.by_serial) == {e.serial_number for e in snapshot.entries}


def test_response_window_and_signature(rig, authority):
    responder, feed = rig
    feed.raw = _crl_with(authority, [1])
    responder.refresh_blacklist()
    single = _query(responder, authority, 1)
    assert single.this_update == FIXED_NOW
    assert single.next_update == FIXED_NOW + datetime.timedelta(
        seconds=responder.config.response_validity)


def test_nonce_echoed(rig, authority, leaf):
    responder, feed = rig
    feed.raw = _crl_with(authority, [])
    responder.refresh_blacklist()
    cert_id = compute_cert_id(leaf, authority.root_cert)
    response = responder.answer_query(
        OcspRequest(cert_ids=(cert_id,), nonce=b"\x44" * 16))
    assert response.nonce_echo == b"\x44" * 16


def test_undecodable_request_gets_malformed_status(rig, authority):
    responder, feed = rig
    feed.raw = _crl_with(authority, [])
    responder.refresh_blacklist()
    for garbage in (b"", b"\x00", b"not ocsp at all", b"\x30\x82\xff\xff"):
        decoded = decode_ocsp_response(responder.answer_bytes(garbage))
        assert decoded.response_status is ResponseStatus.MALFORMED_REQUEST


def test_try_later_before_first_refresh(authority):
    config = ResponderConfig(
        issuer_cert=authority.root_cert, signing_key=authority.root_key,
        signing_cert=authority.root_cert, crl_source="<memory>",
        clock=lambda: FIXED_NOW)
    responder = HybridResponder(config, crl_loader=lambda: b"")
    request = encode_ocsp_request(OcspRequest(cert_ids=(
        CertId(HashAlg.SHA1, b"\x00" * 20, b"\x00" * 20, 5),)))
    decoded = decode_ocsp_response(responder.answer_bytes(request))
    assert decoded.response_status is ResponseStatus.TRY_LATER


def test_every_response_passes_verification(rig, authority, leaf):
    responder, feed = rig
    feed.raw = _crl_with(authority, [leaf.serial_number])
    responder.refresh_blacklist()
    for alg in HashAlg:
        cert_id = compute_cert_id(leaf, authority.root_cert, alg)
        response = responder.answer_query(OcspRequest(cert_ids=(cert_id,)))
        verified = verify_ocsp_signature(response, [authority.root_cert], FIXED_NOW)
        assert verified.single_responses[0].status.kind is StatusKind.REVOKED


def test_multi_cert_query_answers_each(rig, authority, leaf):
    responder, feed = rig
    feed.raw = _crl_with(authority, [leaf.serial_number])
    responder.refresh_blacklist()
    revoked_id = compute_cert_id(leaf, authority.root_cert)
    from dataclasses import replace

    good_id = replace(revoked_id, serial_number=leaf.serial_number + 1)
    response = responder.answer_query(OcspRequest(cert_ids=(revoked_id, good_id)))
    kinds = [s.status.kind for s in response.single_responses]
    assert kinds == [StatusKind.REVOKED, StatusKind.GOOD]


def test_atomic_swap_no_blended_generations(rig, authority):
    """Concurrent queries during refresh see one CRL generation, never a mix."""
    responder, feed = rig
    serial_a, serial_b = 1111, 2222
    feed.raw = _crl_with(authority, [serial_a])
    responder.refresh_blacklist()

    issuer = authority.root_cert
    from staplegrid.codec import public_key_bits

    ids = tuple(
        CertId(HashAlg.SHA1,
               HashAlg.SHA1.digest(issuer.subject_dn.raw),
               HashAlg.SHA1.digest(public_key_bits(issuer.public_key_info)),
               s)
        for s in (serial_a, serial_b))
    request = OcspRequest(cert_ids=ids)
    valid = {(StatusKind.REVOKED, StatusKind.GOOD),
             (StatusKind.GOOD, StatusKind.REVOKED)}
    observed = set()
    stop = threading.Event()
    failures = []

    def hammer():
        while not stop.is_set():
            response = responder.answer_query(request)
            pair = tuple(s.status.kind for s in response.single_responses)
            observed.add(pair)
            if pair not in valid:
                failures.append(pair)
                return

    workers = [threading.Thread(target=hammer) for _ in range(4)]
    for worker in workers:
        worker.start()
    # alternate generations (A revoked <-> B revoked) until both were observed
    for flip in range(200):
        feed.raw = _crl_with(authority, [serial_b if flip % 2 == 0 else serial_a])
        responder.refresh_blacklist()
        if len(observed) == 2 and flip >= 10:
            break
    stop.set()
    for worker in workers:
        worker.join()
    assert not failures, f"blended response observed: {failures}"
    assert observed <= valid
    assert len(observed) == 2
