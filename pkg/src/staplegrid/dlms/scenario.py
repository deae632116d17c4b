"""Deterministic scenario rig: fixture PKI, in-process responder, staple cache.

Everything runs off one injected clock and a seeded authority, so a given
(seed, clock script) pair always produces the same statistics, including
wire byte counts (signing is deterministic).
"""

from __future__ import annotations

import datetime
import enum
from dataclasses import dataclass, field

from ..authority import CertificateAuthority
from ..cache import CacheStore, StapleCache
from ..codec import CertMeta, RevocationReason
from ..errors import UnknownSerial
from ..responder import HybridResponder, ResponderConfig
from ..transport import CountingTransport, InProcessTransport
from .clock import SimClock
from .handshake import (
    HandshakeOutcome,
    StapleBundle,
    client_prepare_bundle,
    server_verify_bundle,
    server_verify_direct,
)

DEFAULT_START = datetime.datetime(2024, 6, 19, 10, 0, 0, tzinfo=datetime.timezone.utc)
SIM_RTT_SECONDS = 0.01  # modeled cost of one network round trip


class HandshakeMode(enum.Enum):
    STAPLED = "stapled"
    DIRECT = "direct"


@dataclass
class ScenarioStats:
    handshakes: int = 0
    accepts: int = 0
    rejects: int = 0
    server_ocsp_queries: int = 0
    client_ocsp_queries: int = 0
    total_bytes: int = 0
    mean_handshake_latency: float = 0.0
    reject_reasons: dict[str, int] = field(default_factory=dict)

    def summary(self) -> str:
        lines = [
            f"handshakes: {self.handshakes}",
            f"accepts: {self.accepts}",
            f"rejects: {self.rejects}",
            f"server_ocsp_queries: {self.server_ocsp_queries}",
            f"client_ocsp_queries: {self.client_ocsp_queries}",
            f"total_bytes: {self.total_bytes}",
            f"mean_handshake_latency: {self.mean_handshake_latency:.6f}",
        ]
        for reason, count in sorted(self.reject_reasons.items()):
            lines.append(f"reject[{reason}]: {count}")
        return "\n".join(lines)


class SimEnvironment:
    """Authority + hybrid responder + staple cache wired through counted
    in-process transports."""

    OCSP_URL = "http://ocsp.sim.local/ocsp"

    def __init__(
        self,
        *,
        seed: int = 0,
        clock: SimClock | None = None,
        start: datetime.datetime = DEFAULT_START,
        response_validity: int = 7 * 86400,
    ) -> None:
        self.clock = clock or SimClock(start)
        self.authority = CertificateAuthority.generate_root(
            "CN=rootca, O=aa, C=aa", seed=seed, now=self.clock.now())
        root = self.authority.root_cert
        self.trust_store = [root]
        config = ResponderConfig(
            issuer_cert=root,
            signing_key=self.authority.root_key,
            signing_cert=root,
            crl_source="<in-process>",
            response_validity=response_validity,
            clock=self.clock.now,
        )
        self._crl_raw = b""
        self.responder = HybridResponder(config, crl_loader=lambda: self._crl_raw)
        routes = {self.OCSP_URL: self.responder.answer_bytes}
        self.upstream = CountingTransport(InProcessTransport(routes))
        self.server_transport = CountingTransport(InProcessTransport(routes))
        self.cache = StapleCache(
            CacheStore(":memory:"), self.upstream, self.trust_store,
            clock=self.clock.now)
        self.certs: dict[str, CertMeta] = {}
        self.publish_crl()

    def now(self) -> datetime.datetime:
        return self.clock.now()

    def publish_crl(self) -> None:
        self._crl_raw = self.authority.emit_crl(self.now()).raw
        self.responder.refresh_blacklist(self.now())

    def issue(self, name: str, validity_days: int = 365) -> CertMeta:
        meta = self.authority.issue_cert(
            f"CN={name}, O=aa", aia_url=self.OCSP_URL,
            validity_days=validity_days, now=self.now())
        self.certs[name] = meta
        return meta

    def revoke(self, name: str,
               reason: RevocationReason = RevocationReason.KEY_COMPROMISE) -> None:
        meta = self.certs.get(name)
        if meta is None:
            raise UnknownSerial(f"no simulated certificate named {name!r}")
        self.authority.revoke(meta.serial_number, reason, self.now())
        self.publish_crl()

    def set_upstream_down(self, down: bool) -> None:
        self.upstream.inner.down = down
        self.server_transport.inner.down = down

    # -- handshakes --------------------------------------------------------------

    def prepare_bundle(self, name: str) -> StapleBundle:
        meta = self.certs[name]
        return client_prepare_bundle(
            meta.raw_der, [self.authority.root_cert.raw_der], self.cache)

    def handshake(self, name: str, mode: HandshakeMode) -> HandshakeOutcome:
        meta = self.certs[name]
        if mode is HandshakeMode.STAPLED:
            bundle = self.prepare_bundle(name)
            return server_verify_bundle(bundle, self.trust_store, self.now())
        return server_verify_direct(
            meta.raw_der, self.authority.root_cert.raw_der, self.OCSP_URL,
            self.trust_store, self.now(), transport=self.server_transport)


def _apply_fault_actions(env: SimEnvironment, actions) -> None:
    for action in actions:
        if action == "upstream-down":
            env.set_upstream_down(True)
        elif action == "upstream-up":
            env.set_upstream_down(False)
        elif action.startswith("advance-clock:"):
            env.clock.advance(float(action.split(":", 1)[1]))
        elif action.startswith("revoke:"):
            env.revoke(action.split(":", 1)[1])
        else:
            raise ValueError(f"unknown fault action {action!r}")


def run_scenario(
    n_clients: int,
    mode: HandshakeMode | str,
    fault_script: dict[int, list[str]] | None = None,
    *,
    shared_certs: int | None = None,
    seed: int = 0,
    sim_rtt: float = SIM_RTT_SECONDS,
) -> ScenarioStats:
    """Run n handshakes; with shared_certs, clients reuse a smaller cert pool
    so cache deduplication shows up in the client-side query count."""
    mode = HandshakeMode(mode) if isinstance(mode, str) else mode
    env = SimEnvironment(seed=seed)
    distinct = shared_certs or n_clients
    names = [f"meter-{i}" for i in range(distinct)]
    for name in names:
        env.issue(name)

    stats = ScenarioStats()
    latency_total = 0.0
    for i in range(n_clients):
        if fault_script and i in fault_script:
            _apply_fault_actions(env, fault_script[i])
        outcome = env.handshake(names[i % distinct], mode)
        stats.handshakes += 1
        if outcome.accepted:
            stats.accepts += 1
        else:
            stats.rejects += 1
            key = outcome.reason.value if outcome.reason else "UNKNOWN"
            stats.reject_reasons[key] = stats.reject_reasons.get(key, 0) + 1
        stats.server_ocsp_queries += outcome.server_ocsp_queries
        stats.total_bytes += outcome.bytes_on_wire
        latency_total += sim_rtt * (1 + outcome.server_ocsp_queries)
    stats.client_ocsp_queries = env.upstream.requests
    stats.mean_handshake_latency = latency_total / n_clients if n_clients else 0.0
    return stats


def replay_attack_scenario(
    clock: SimClock | None = None,
    *,
    advance: datetime.timedelta | None = None,
    seed: int = 0,
) -> HandshakeOutcome:
    """Capture a GOOD staple, revoke the certificate, move the clock, replay.

    With the default advance the clock lands past the staple's nextUpdate,
    so the replayed bundle is rejected as stale. Passing a shorter advance
    reproduces the in-window exposure, which is bounded by the seven-day
    response validity.
    """
    clock = clock or SimClock(DEFAULT_START)
    env = SimEnvironment(seed=seed, clock=clock)
    env.issue("replay-victim", validity_days=30)
    bundle = env.prepare_bundle("replay-victim")  # GOOD staple, 7-day window

    clock.advance(datetime.timedelta(hours=1))
    env.revoke("replay-victim")
    clock.advance(advance if advance is not None else datetime.timedelta(days=7))
    return server_verify_bundle(bundle, env.trust_store, clock.now())
