"""staplegrid command line.

Subcommands: ca {init,issue,revoke,crl}, responder serve,
cache {fetch,staple,maintain,export,serve}, sc {build,check,verify},
sim {run,replay}, bench {requests,frame}.

Exit codes: 0 success, 1 operational error, 2 usage error.
"""

from __future__ import annotations

import datetime
import functools
import json
import sys
from pathlib import Path

import click
import httpx

from .authority import CertificateAuthority
from .bench import bench_requests, measure_frame
from .cache import StapleCache
from .codec import RevocationReason, compute_cert_id, parse_certificate
from .codec import pem as pemcodec
from .dlms import HandshakeMode, replay_attack_scenario, run_scenario, run_script
from .errors import StaplegridError
from .responder import ResponderConfig
from .responder.config import load_settings
from .signed_collection import (
    CollectionStatus,
    CountingSigner,
    build_collection,
    dump_collection,
    load_collection,
    save_collection,
    status_at,
    verify_collection,
)
from .transport import HttpOcspTransport


def operational(func):
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except StaplegridError as exc:
            raise click.ClickException(str(exc)) from exc
    return wrapper


def _parse_serial(text: str) -> int:
    text = text.strip().lower()
    if text.startswith("0x"):
        return int(text, 16)
    try:
        return int(text, 10)
    except ValueError:
        return int(text, 16)


def _utcnow() -> datetime.datetime:
    return datetime.datetime.now(datetime.timezone.utc)


@click.group()
def cli() -> None:
    """PKI revocation stack: responder, staple cache, collections, simulator."""


# --------------------------------------------------------------------------
# ca
# --------------------------------------------------------------------------

@cli.group()
def ca() -> None:
    """Fixture certificate authority over a state directory."""


@ca.command("init")
@click.option("--dir", "state_dir", required=True, type=click.Path(), help="state directory")
@click.option("--dn", default="CN=rootca, O=aa, C=aa", show_default=True)
@click.option("--seed", type=int, default=None, help="deterministic key/serial seed")
@click.option("--validity-days", type=int, default=3650, show_default=True)
@operational
def ca_init(state_dir: str, dn: str, seed: int | None, validity_days: int) -> None:
    authority = CertificateAuthority.generate_root(dn, seed=seed, validity_days=validity_days)
    authority.save(state_dir)
    click.echo(f"root {authority.root_cert.subject_dn} "
               f"serial {authority.root_cert.serial_number:#x} -> {state_dir}")


@ca.command("issue")
@click.option("--dir", "state_dir", required=True, type=click.Path(exists=True))
@click.option("--dn", required=True, help="subject DN, e.g. 'CN=meter-1, O=aa'")
@click.option("--aia", default=None, help="OCSP URL for the AIA extension")
@click.option("--crl-dp", default=None, help="CRL distribution point URL")
@click.option("--days", type=int, default=365, show_default=True)
@operational
def ca_issue(state_dir: str, dn: str, aia: str | None, crl_dp: str | None, days: int) -> None:
    authority = CertificateAuthority.load(state_dir)
    meta = authority.issue_cert(dn, aia_url=aia, crl_dp_url=crl_dp, validity_days=days)
    authority.save(state_dir)
    click.echo(f"issued {meta.subject_dn} serial {meta.serial_number:#x}")
    click.echo(str(Path(state_dir) / "issued" / f"{meta.serial_number:032x}.pem"))


@ca.command("revoke")
@click.option("--dir", "state_dir", required=True, type=click.Path(exists=True))
@click.option("--serial", required=True, help="serial (hex or decimal)")
@click.option("--reason", default="key_compromise", show_default=True,
              type=click.Choice([r.name.lower() for r in RevocationReason]))
@operational
def ca_revoke(state_dir: str, serial: str, reason: str) -> None:
    authority = CertificateAuthority.load(state_dir)
    authority.revoke(_parse_serial(serial), RevocationReason[reason.upper()], _utcnow())
    authority.save(state_dir)
    click.echo(f"revoked {_parse_serial(serial):#x} ({reason})")


@ca.command("crl")
@click.option("--dir", "state_dir", required=True, type=click.Path(exists=True))
@click.option("--out", default=None, type=click.Path(), help="defaults to <dir>/crl.pem")
@click.option("--next-update-days", type=int, default=None,
              help="omit for a CRL without nextUpdate")
@operational
def ca_crl(state_dir: str, out: str | None, next_update_days: int | None) -> None:
    authority = CertificateAuthority.load(state_dir)
    now = _utcnow()
    next_update = now + datetime.timedelta(days=next_update_days) if next_update_days else None
    snapshot = authority.emit_crl(now, next_update)
    authority.save(state_dir)
    path = Path(out) if out else Path(state_dir) / "crl.pem"
    path.write_bytes(pemcodec.encode(snapshot.raw, pemcodec.X509_CRL))
    click.echo(f"CRL with {len(snapshot.entries)} entries -> {path}")


# --------------------------------------------------------------------------
# responder
# --------------------------------------------------------------------------

@cli.group()
def responder() -> None:
    """Hybrid (CRL-blacklist) OCSP responder service."""


@responder.command("serve")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="key=value config file; STAPLEGRID_* env vars override")
@click.option("--listen", default=None, help="host:port")
@click.option("--crl-source", default=None, help="CRL URL or file path")
@click.option("--issuer-cert", default=None, type=click.Path(exists=True))
@click.option("--signing-key", default=None, type=click.Path(exists=True))
@click.option("--signing-cert", default=None, type=click.Path(exists=True))
@click.option("--refresh-interval", type=int, default=None)
@click.option("--response-validity", type=int, default=None)
@click.option("--fixed-time", default=None, help="freeze the responder clock (ISO time)")
@operational
def responder_serve(config_path, listen, crl_source, issuer_cert, signing_key,
                    signing_cert, refresh_interval, response_validity, fixed_time) -> None:
    from .service import serve

    settings = load_settings(config_path)
    overrides = {
        "listen_address": listen, "crl_source": crl_source,
        "issuer_cert": issuer_cert, "signing_key": signing_key,
        "signing_cert": signing_cert, "fixed_time": fixed_time,
        "refresh_interval": refresh_interval, "response_validity": response_validity,
    }
    settings.update({k: str(v) for k, v in overrides.items() if v is not None})
    for required in ("issuer_cert", "signing_key", "crl_source"):
        if not settings.get(required):
            raise click.UsageError(f"missing required setting {required}")
    config = ResponderConfig.from_settings(settings)
    click.echo(f"serving hybrid responder on http://{config.listen_address} "
               f"(CRL source: {config.crl_source})")
    serve(config, foreground=True)


# --------------------------------------------------------------------------
# cache
# --------------------------------------------------------------------------

@cli.group()
def cache() -> None:
    """Stapling cache: fetch, staple, maintain, export, serve."""


def _open_cache(store_path: str, anchor_paths: tuple[str, ...]) -> StapleCache:
    anchors = [parse_certificate(Path(p).read_bytes()) for p in anchor_paths]
    cache_obj, quarantined = StapleCache.recover(
        store_path, HttpOcspTransport(), anchors)
    if quarantined:
        click.echo(f"quarantined {len(quarantined)} corrupt rows", err=True)
    return cache_obj


@cache.command("fetch")
@click.option("--store", "store_path", default=None, type=click.Path())
@click.option("--cert", "cert_path", required=True, type=click.Path(exists=True))
@click.option("--issuer", "issuer_path", required=True, type=click.Path(exists=True))
@click.option("--anchor", "anchor_paths", multiple=True, type=click.Path(exists=True),
              help="trust anchor PEM (repeatable); defaults to the issuer")
@click.option("--server", default=None, help="cache service URL (thin-client mode)")
@operational
def cache_fetch(store_path, cert_path, issuer_path, anchor_paths, server) -> None:
    cert_bytes = Path(cert_path).read_bytes()
    issuer_bytes = Path(issuer_path).read_bytes()
    if server:
        response = httpx.post(f"{server}/cache/fetch", json={
            "certificate_pem": cert_bytes.decode(),
            "issuer_pem": issuer_bytes.decode(),
        }, timeout=30)
        response.raise_for_status()
        click.echo(json.dumps(response.json(), indent=2))
        return
    if not store_path:
        raise click.UsageError("either --store or --server is required")
    cache_obj = _open_cache(store_path, anchor_paths or (issuer_path,))
    entry = cache_obj.lookup_or_fetch(cert_bytes, issuer_bytes)
    click.echo(f"ID: {entry.id}  serial: {entry.serial_number}  "
               f"status: {entry.cert_status}  next_update: {entry.next_update}")


@cache.command("staple")
@click.option("--store", "store_path", default=None, type=click.Path())
@click.option("--serial", required=True)
@click.option("--out", default=None, type=click.Path(), help="write DER here")
@click.option("--pem", is_flag=True, help="armor the output as OCSP RESPONSE")
@click.option("--server", default=None, help="cache service URL (thin-client mode)")
@operational
def cache_staple(store_path, serial, out, pem, server) -> None:
    serial_number = str(_parse_serial(serial))
    if server:
        response = httpx.get(f"{server}/cache/staple/{serial_number}", timeout=30)
        if response.status_code == 404:
            raise click.ClickException(f"no cache row for serial {serial_number}")
        response.raise_for_status()
        staple = response.content
        entry_line = f"serial: {serial_number} ({len(staple)} bytes from {server})"
    else:
        if not store_path:
            raise click.UsageError("either --store or --server is required")
        cache_obj = _open_cache(store_path, ())
        staple, entry = cache_obj.get_staple(serial_number)
        entry_line = (f"serial: {entry.serial_number}  status: {entry.cert_status}  "
                      f"stale: {entry.stale}")
    payload = pemcodec.encode(staple, pemcodec.OCSP_RESPONSE) if pem else staple
    if out:
        Path(out).write_bytes(payload)
        click.echo(f"{entry_line} -> {out}")
    else:
        sys.stdout.buffer.write(payload)


@cache.command("maintain")
@click.option("--store", "store_path", default=None, type=click.Path())
@click.option("--anchor", "anchor_paths", multiple=True, type=click.Path(exists=True))
@click.option("--server", default=None, help="cache service URL (thin-client mode)")
@operational
def cache_maintain(store_path, anchor_paths, server) -> None:
    if server:
        response = httpx.post(f"{server}/cache/maintain", timeout=120)
        response.raise_for_status()
        click.echo(json.dumps(response.json(), indent=2))
        return
    if not store_path:
        raise click.UsageError("either --store or --server is required")
    cache_obj = _open_cache(store_path, anchor_paths)
    report = cache_obj.maintain()
    click.echo(datetime.datetime.now(datetime.timezone.utc).strftime("%Y-%m-%d %H:%M:%S"))
    if report.render():
        click.echo(report.render())
    click.echo(f"checked={report.checked} updated={len(report.updated)} "
               f"skipped={len(report.skipped)} failed={len(report.failed)}")


@cache.command("export")
@click.option("--store", "store_path", default=None, type=click.Path())
@click.option("--server", default=None, help="cache service URL (thin-client mode)")
@operational
def cache_export(store_path, server) -> None:
    if server:
        response = httpx.get(f"{server}/cache/export", timeout=30)
        response.raise_for_status()
        click.echo(response.text)
        return
    if not store_path:
        raise click.UsageError("either --store or --server is required")
    cache_obj = _open_cache(store_path, ())
    click.echo(cache_obj.export_table())


@cache.command("serve")
@click.option("--store", "store_path", required=True, type=click.Path())
@click.option("--anchor", "anchor_paths", multiple=True, required=True,
              type=click.Path(exists=True))
@click.option("--listen", default="127.0.0.1:8081", show_default=True)
@operational
def cache_serve(store_path, anchor_paths, listen) -> None:
    from .service import RunningService, create_app

    cache_obj = _open_cache(store_path, anchor_paths)
    host, _, port = listen.rpartition(":")
    app = create_app(cache=cache_obj)
    click.echo(f"serving staple cache on http://{listen} (store: {store_path})")
    RunningService(app, host, int(port)).run_foreground()


# --------------------------------------------------------------------------
# sc (signed collections)
# --------------------------------------------------------------------------

@cli.group()
def sc() -> None:
    """Signed collections: one signature over many revocation bits."""


def _load_signing_key(path: str | None):
    from cryptography.hazmat.primitives import serialization
    from cryptography.hazmat.primitives.asymmetric import ec

    if path is None:
        return ec.generate_private_key(ec.SECP256R1())
    key = serialization.load_pem_private_key(Path(path).read_bytes(), None)
    if not isinstance(key, ec.EllipticCurvePrivateKey):
        raise click.ClickException("signing key must be an EC private key")
    return key


@sc.command("build")
@click.option("--out", required=True, type=click.Path())
@click.option("--name", default="sc-0", show_default=True)
@click.option("--bits", type=int, required=True, help="collection bit count")
@click.option("--revoked", default="", help="comma-separated revoked indices")
@click.option("--key", "key_path", default=None, type=click.Path(exists=True),
              help="EC private key PEM; generated (and saved) when omitted")
@operational
def sc_build(out, name, bits, revoked, key_path) -> None:
    from cryptography.hazmat.primitives import serialization

    key = _load_signing_key(key_path)
    statuses = [False] * bits
    for token in filter(None, (t.strip() for t in revoked.split(","))):
        statuses[int(token)] = True
    signer = CountingSigner(key)
    collection = build_collection(name, statuses, _utcnow(), signer)
    save_collection(collection, out)
    if key_path is None:
        generated = Path(out).with_suffix(".key.pem")
        generated.write_bytes(key.private_bytes(
            serialization.Encoding.PEM, serialization.PrivateFormat.PKCS8,
            serialization.NoEncryption()))
        click.echo(f"generated signing key -> {generated}")
    click.echo(f"{collection.bit_count} bits, {signer.sign_count} signature operation -> {out}")


@sc.command("check")
@click.argument("path", type=click.Path(exists=True))
@click.option("--index", type=int, default=None, help="bit index to look up")
@operational
def sc_check(path, index) -> None:
    collection = load_collection(path)
    if index is None:
        click.echo(dump_collection(collection))
        return
    status = status_at(collection, index)
    click.echo(f"{collection.name}[{index}] = "
               f"{'1 (REVOKED)' if status is CollectionStatus.REVOKED else '0 (VALID)'}")


@sc.command("verify")
@click.argument("path", type=click.Path(exists=True))
@click.option("--pub", "pub_path", required=True, type=click.Path(exists=True),
              help="EC public (or private) key PEM")
@operational
def sc_verify(path, pub_path) -> None:
    from cryptography.hazmat.primitives import serialization

    pem_bytes = Path(pub_path).read_bytes()
    try:
        public_key = serialization.load_pem_public_key(pem_bytes)
    except ValueError:
        public_key = serialization.load_pem_private_key(pem_bytes, None).public_key()
    collection = load_collection(path)
    if verify_collection(collection, public_key):
        click.echo("signature: OK")
    else:
        raise click.ClickException("signature: FAILED")


# --------------------------------------------------------------------------
# sim
# --------------------------------------------------------------------------

@cli.group()
def sim() -> None:
    """Deterministic DLMS handshake scenarios."""


@sim.command("run")
@click.option("--mode", type=click.Choice(["stapled", "direct"]), default="stapled",
              show_default=True)
@click.option("-n", "--clients", "n_clients", type=int, default=100, show_default=True)
@click.option("--shared-certs", type=int, default=None,
              help="distinct certificates shared by the clients")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--script", "script_path", type=click.Path(exists=True), default=None,
              help="declarative event script (overrides --mode/-n)")
@click.option("--json", "as_json", is_flag=True, help="machine-readable output")
@operational
def sim_run(mode, n_clients, shared_certs, seed, script_path, as_json) -> None:
    if script_path:
        result = run_script(Path(script_path).read_text(), seed=seed)
        stats = result.stats
        if not as_json:
            for name, outcome in result.outcomes:
                reason = f" ({outcome.reason.value})" if outcome.reason else ""
                click.echo(f"handshake {name}: {outcome.verdict.value}{reason}")
    else:
        stats = run_scenario(n_clients, HandshakeMode(mode),
                             shared_certs=shared_certs, seed=seed)
    if as_json:
        click.echo(json.dumps(stats.__dict__))
    else:
        click.echo(stats.summary())


@sim.command("replay")
@click.option("--in-window", is_flag=True,
              help="replay before nextUpdate to show the exposure window")
@click.option("--seed", type=int, default=0, show_default=True)
@operational
def sim_replay(in_window, seed) -> None:
    advance = datetime.timedelta(days=3) if in_window else None
    outcome = replay_attack_scenario(advance=advance, seed=seed)
    reason = f" ({outcome.reason.value})" if outcome.reason else ""
    click.echo(f"replayed staple: {outcome.verdict.value}{reason}")
    if in_window and outcome.accepted:
        click.echo("in-window replay accepted: exposure bounded by the 7-day validity")


# --------------------------------------------------------------------------
# bench
# --------------------------------------------------------------------------

@cli.group()
def bench() -> None:
    """Latency and frame-size measurements against a live responder."""


@bench.command("requests")
@click.option("--endpoint", required=True, help="OCSP POST endpoint URL")
@click.option("--ca-dir", "ca_dir", required=True, type=click.Path(exists=True),
              help="authority state dir supplying certs and the trust anchor")
@click.option("-n", "--requests", "n", type=int, default=1000, show_default=True)
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--report", "report_path", type=click.Path(), default=None)
@operational
def bench_requests_cmd(endpoint, ca_dir, n, workers, report_path) -> None:
    authority = CertificateAuthority.load(ca_dir)
    if not authority.issued:
        raise click.ClickException(f"{ca_dir} has no issued certificates to query")
    cert_ids = [compute_cert_id(meta, authority.root_cert)
                for meta in authority.issued.values()]
    result = bench_requests(endpoint, cert_ids, [authority.root_cert], n,
                            workers=workers, report_path=report_path)
    click.echo(result.summary())


@bench.command("frame")
@click.option("--endpoint", required=True)
@click.option("--cert", "cert_path", required=True, type=click.Path(exists=True))
@click.option("--issuer", "issuer_path", required=True, type=click.Path(exists=True))
@click.option("--nonce", is_flag=True, help="include a 16-byte nonce")
@click.option("--report", "report_path", type=click.Path(), default=None)
@operational
def bench_frame_cmd(endpoint, cert_path, issuer_path, nonce, report_path) -> None:
    import secrets

    measurement = measure_frame(
        endpoint,
        Path(cert_path).read_bytes(),
        Path(issuer_path).read_bytes(),
        nonce=secrets.token_bytes(16) if nonce else None,
        report_path=report_path,
    )
    click.echo(measurement.summary())
    click.echo("reference total from the original measurement setup: 1841 bytes")


def main() -> None:
    cli(prog_name="staplegrid")


if __name__ == "__main__":
    main()
