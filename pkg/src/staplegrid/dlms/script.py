"""Declarative scenario scripts.

One event per line, '#' comments:

    issue meter-1
    handshake meter-1 stapled
    revoke meter-1 key_compromise
    advance-clock 7d1h
    handshake meter-1 stapled
    upstream-down
    handshake meter-1 direct
    upstream-up
"""

from __future__ import annotations

import datetime
import re
from dataclasses import dataclass, field

from ..codec import RevocationReason
from .handshake import HandshakeOutcome
from .scenario import SIM_RTT_SECONDS, HandshakeMode, ScenarioStats, SimEnvironment

_DURATION = re.compile(r"(\d+)([dhms]?)")
_UNITS = {"d": 86400, "h": 3600, "m": 60, "s": 1, "": 1}


def parse_duration(text: str) -> datetime.timedelta:
    pos = 0
    seconds = 0
    for match in _DURATION.finditer(text):
        if match.start() != pos:
            raise ValueError(f"bad duration {text!r}")
        seconds += int(match.group(1)) * _UNITS[match.group(2)]
        pos = match.end()
    if pos != len(text) or pos == 0:
        raise ValueError(f"bad duration {text!r}")
    return datetime.timedelta(seconds=seconds)


@dataclass(frozen=True)
class Event:
    action: str
    args: tuple[str, ...] = ()
    line: int = 0


@dataclass
class ScriptResult:
    stats: ScenarioStats
    outcomes: list[tuple[str, HandshakeOutcome]] = field(default_factory=list)


_ACTIONS = {"issue", "revoke", "advance-clock", "handshake", "upstream-down", "upstream-up"}


def parse_script(text: str) -> list[Event]:
    events = []
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        action, args = parts[0], tuple(parts[1:])
        if action not in _ACTIONS:
            raise ValueError(f"line {lineno}: unknown event {action!r}")
        events.append(Event(action, args, lineno))
    return events


def run_script(events: list[Event] | str, *, seed: int = 0,
               sim_rtt: float = SIM_RTT_SECONDS) -> ScriptResult:
    if isinstance(events, str):
        events = parse_script(events)
    env = SimEnvironment(seed=seed)
    result = ScriptResult(stats=ScenarioStats())
    stats = result.stats
    latency_total = 0.0
    for event in events:
        if event.action == "issue":
            env.issue(event.args[0])
        elif event.action == "revoke":
            reason = RevocationReason.KEY_COMPROMISE
            if len(event.args) > 1:
                reason = RevocationReason[event.args[1].upper()]
            env.revoke(event.args[0], reason)
        elif event.action == "advance-clock":
            env.clock.advance(parse_duration(event.args[0]))
        elif event.action == "upstream-down":
            env.set_upstream_down(True)
        elif event.action == "upstream-up":
            env.set_upstream_down(False)
        elif event.action == "handshake":
            mode = HandshakeMode(event.args[1] if len(event.args) > 1 else "stapled")
            outcome = env.handshake(event.args[0], mode)
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
            result.outcomes.append((event.args[0], outcome))
    stats.client_ocsp_queries = env.upstream.requests
    if stats.handshakes:
        stats.mean_handshake_latency = latency_total / stats.handshakes
    return result
