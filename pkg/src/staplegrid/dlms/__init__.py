"""DLMS handshake simulation: stapled vs direct revocation checking."""

from .clock import SimClock
from .handshake import (
    HandshakeOutcome,
    RejectReason,
    StapleBundle,
    Verdict,
    client_prepare_bundle,
    server_verify_bundle,
    server_verify_direct,
)
from .scenario import (
    HandshakeMode,
    ScenarioStats,
    SimEnvironment,
    replay_attack_scenario,
    run_scenario,
)
from .script import parse_script, run_script

__all__ = [
    "HandshakeMode",
    "HandshakeOutcome",
    "RejectReason",
    "ScenarioStats",
    "SimClock",
    "SimEnvironment",
    "StapleBundle",
    "Verdict",
    "client_prepare_bundle",
    "parse_script",
    "replay_attack_scenario",
    "run_scenario",
    "run_script",
    "server_verify_bundle",
    "server_verify_direct",
]
