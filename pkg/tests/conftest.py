"""Shared fixtures: a seeded authority frozen at a reference instant, a
cache rig over an in-process upstream, and the acceptance summary hook."""

from __future__ import annotations

import datetime

import pytest

from staplegrid.authority import CertificateAuthority
from staplegrid.cache import CacheStore, StapleCache
from staplegrid.codec import CertMeta, CrlEntry, RevocationReason, encode_crl
from staplegrid.responder import HybridResponder, ResponderConfig
from staplegrid.transport import CountingTransport, InProcessTransport

FIXED_NOW = datetime.datetime(2024, 6, 19, 10, 0, 43, tzinfo=datetime.timezone.utc)

OCSP_URL = "http://127.0.0.1:8080/ocsp"
CRL_DP_URL = "http://127.0.0.1:1234/downloadcrl/download_crl"
UPSTREAM_URL = "http://upstream.test/ocsp"


@pytest.fixture(scope="session")
def fixed_now() -> datetime.datetime:
    return FIXED_NOW


@pytest.fixture(scope="session")
def authority() -> CertificateAuthority:
    return CertificateAuthority.generate_root(
        "CN=rootca, OU=aa, O=aa, L=aa, ST=aa, C=aa", seed=20240619, now=FIXED_NOW)


@pytest.fixture(scope="session")
def leaf(authority: CertificateAuthority) -> CertMeta:
    return authority.issue_cert(
        "CN=meter-leaf, O=aa", aia_url=OCSP_URL, crl_dp_url=CRL_DP_URL, now=FIXED_NOW)


class CacheRig:
    """Authority + in-process OCSP upstream + staple cache over one store."""

    def __init__(self, store_path=":memory:", seed=71, response_validity=7 * 86400):
        self.now = FIXED_NOW
        self.authority = CertificateAuthority.generate_root(seed=seed, now=self.now)
        self.revoked_serials: list[int] = []
        config = ResponderConfig(
            issuer_cert=self.authority.root_cert,
            signing_key=self.authority.root_key,
            signing_cert=self.authority.root_cert,
            crl_source="<memory>",
            response_validity=response_validity,
            clock=lambda: self.now,
        )
        self.responder = HybridResponder(config, crl_loader=self._crl)
        self.responder.refresh_blacklist()
        self.transport = CountingTransport(InProcessTransport({
            UPSTREAM_URL: lambda body: self.responder.answer_bytes(body)}))
        self.cache = StapleCache(
            CacheStore(store_path), self.transport,
            [self.authority.root_cert], clock=lambda: self.now)

    def _crl(self) -> bytes:
        entries = [CrlEntry(s, self.now, RevocationReason.KEY_COMPROMISE)
                   for s in self.revoked_serials]
        return encode_crl(self.authority.root_cert.subject_dn.raw, self.now, None,
                          entries, self.authority.root_key)

    def issue(self, name="meter", aia=UPSTREAM_URL):
        return self.authority.issue_cert(f"CN={name}, O=aa", aia_url=aia, now=self.now)

    def revoke(self, meta) -> None:
        self.revoked_serials.append(meta.serial_number)
        self.responder.refresh_blacklist()


# --- acceptance reporting ----------------------------------------------------

_acceptance_results: dict[str, str] = {}


def record_acceptance(criterion: str, passed: bool, detail: str = "") -> None:
    line = f"ACCEPTANCE {criterion}: {'PASS' if passed else 'FAIL'}"
    if detail:
        line += f"  ({detail})"
    _acceptance_results[criterion] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if _acceptance_results:
        terminalreporter.section("acceptance criteria")
        for key in sorted(_acceptance_results):
            terminalreporter.write_line(_acceptance_results[key])
