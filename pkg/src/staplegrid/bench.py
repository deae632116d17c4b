"""Benchmark harness: end-to-end request timing and frame-size measurement.

Every benchmarked response is decoded and signature-verified, so the
numbers describe useful work, not garbage throughput. A run aborts with
a partial report when more than the allowed fraction of requests fail.
"""

from __future__ import annotations

import datetime
import json
import math
import threading
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import httpx

from .codec import (
    CertId,
    CertMeta,
    HashAlg,
    OcspRequest,
    ResponseStatus,
    compute_cert_id,
    decode_ocsp_response,
    encode_ocsp_request,
    verify_ocsp_signature,
)
from .errors import StaplegridError, UpstreamUnreachable
from .transport import OCSP_REQUEST_MEDIA

DEFAULT_FAIL_LIMIT = 0.01


class BenchAborted(StaplegridError):
    """Failure budget exceeded; a partial report was written."""


@dataclass
class BenchResult:
    requests: int
    wall_time: float
    avg_request_time: float
    p50: float
    p95: float
    p99: float
    workers: int
    failures: int

    def summary(self) -> str:
        return (
            f"requests: {self.requests}  workers: {self.workers}  "
            f"failures: {self.failures}\n"
            f"wall_time: {self.wall_time:.3f}s  avg: {self.avg_request_time * 1000:.3f}ms\n"
            f"p50: {self.p50 * 1000:.3f}ms  p95: {self.p95 * 1000:.3f}ms  "
            f"p99: {self.p99 * 1000:.3f}ms"
        )


@dataclass
class FrameMeasurement:
    request_bytes: int
    response_bytes: int
    total_bytes: int

    def summary(self) -> str:
        return (f"request_bytes: {self.request_bytes}\n"
                f"response_bytes: {self.response_bytes}\n"
                f"total_bytes: {self.total_bytes}")


def _percentile(sorted_latencies: list[float], q: float) -> float:
    # nearest-rank; monotone in q by construction
    rank = max(1, math.ceil(q * len(sorted_latencies)))
    return sorted_latencies[rank - 1]


def write_report(path: str | Path, kind: str, payload: dict) -> None:
    record = {"kind": kind,
              "at": datetime.datetime.now(datetime.timezone.utc).isoformat(),
              **payload}
    with Path(path).open("a") as fh:
        fh.write(json.dumps(record) + "\n")


def bench_requests(
    endpoint: str,
    cert_ids: list[CertId],
    trust_anchors: list[CertMeta],
    n: int,
    workers: int = 1,
    *,
    report_path: str | Path | None = None,
    fail_limit: float = DEFAULT_FAIL_LIMIT,
    timeout: float = 10.0,
) -> BenchResult:
    """n full request/verify cycles against `endpoint`, spread over workers.

    Requests cycle through cert_ids. Latency is the complete HTTP round
    trip (connection reuse allowed) plus decode and signature verification.
    """
    if not cert_ids:
        raise ValueError("bench needs at least one CertID to query")
    bodies = [encode_ocsp_request(OcspRequest(cert_ids=(cid,))) for cid in cert_ids]
    latencies: list[list[float]] = [[] for _ in range(workers)]
    failures = [0] * workers
    abort = threading.Event()
    now = datetime.datetime.now(datetime.timezone.utc)

    counts = [n // workers + (1 if i < n % workers else 0) for i in range(workers)]

    def run_worker(worker: int) -> None:
        with httpx.Client(timeout=timeout) as client:
            for j in range(counts[worker]):
                if abort.is_set():
                    return
                body = bodies[(worker + j * workers) % len(bodies)]
                started = time.perf_counter()
                try:
                    response = client.post(
                        endpoint, content=body,
                        headers={"Content-Type": OCSP_REQUEST_MEDIA})
                    if response.status_code != 200:
                        raise UpstreamUnreachable(f"HTTP {response.status_code}")
                    decoded = decode_ocsp_response(response.content)
                    if decoded.response_status is not ResponseStatus.SUCCESSFUL:
                        raise UpstreamUnreachable(
                            f"status {decoded.response_status.name}")
                    verify_ocsp_signature(decoded, trust_anchors, now)
                except (httpx.HTTPError, StaplegridError):
                    failures[worker] += 1
                    if sum(failures) > fail_limit * n:
                        abort.set()
                        return
                else:
                    latencies[worker].append(time.perf_counter() - started)

    wall_started = time.perf_counter()
    threads = [threading.Thread(target=run_worker, args=(i,)) for i in range(workers)]
    for thread in threads:
        thread.start()
    for thread in threads:
        thread.join()
    wall_time = time.perf_counter() - wall_started

    flat = sorted(lat for bucket in latencies for lat in bucket)
    completed = len(flat)
    failed = sum(failures)
    result = BenchResult(
        requests=completed,
        wall_time=wall_time,
        avg_request_time=wall_time / completed if completed else 0.0,
        p50=_percentile(flat, 0.50) if flat else 0.0,
        p95=_percentile(flat, 0.95) if flat else 0.0,
        p99=_percentile(flat, 0.99) if flat else 0.0,
        workers=workers,
        failures=failed,
    )
    if report_path is not None:
        write_report(report_path, "bench_requests",
                     {**asdict(result), "endpoint": endpoint,
                      "requested": n, "partial": abort.is_set()})
    if abort.is_set():
        raise BenchAborted(
            f"{failed} of {n} requests failed (> {fail_limit:.0%}); partial report kept")
    return result


def measure_frame(
    endpoint: str,
    cert_der: bytes,
    issuer_der: bytes,
    *,
    nonce: bytes | None = None,
    hash_alg: HashAlg = HashAlg.SHA1,
    trust_anchors: list[CertMeta] | None = None,
    report_path: str | Path | None = None,
    timeout: float = 10.0,
) -> FrameMeasurement:
    """Exact HTTP body byte counts of one query cycle."""
    from .codec import parse_certificate

    cert = parse_certificate(cert_der)
    cert_id = compute_cert_id(cert, parse_certificate(issuer_der), hash_alg)
    body = encode_ocsp_request(OcspRequest(cert_ids=(cert_id,), nonce=nonce))
    try:
        response = httpx.post(endpoint, content=body,
                              headers={"Content-Type": OCSP_REQUEST_MEDIA},
                              timeout=timeout)
    except httpx.HTTPError as exc:
        raise UpstreamUnreachable(f"POST {endpoint}: {exc}") from exc
    if response.status_code != 200:
        raise UpstreamUnreachable(f"POST {endpoint}: HTTP {response.status_code}")
    decoded = decode_ocsp_response(response.content)
    if trust_anchors and decoded.response_status is ResponseStatus.SUCCESSFUL:
        verify_ocsp_signature(decoded, trust_anchors,
                              datetime.datetime.now(datetime.timezone.utc))
    measurement = FrameMeasurement(
        request_bytes=len(body),
        response_bytes=len(response.content),
        total_bytes=len(body) + len(response.content),
    )
    if report_path is not None:
        write_report(report_path, "frame", {**asdict(measurement), "endpoint": endpoint})
    return measurement
