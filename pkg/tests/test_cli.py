"""CLI behavior: subcommand flows, exit codes, config loading."""

import json
import re

import pytest
from click.testing import CliRunner

from staplegrid.cli import cli
from staplegrid.codec import parse_certificate, parse_crl
from staplegrid.responder.config import load_settings

from conftest import FIXED_NOW


@pytest.fixture()
def runner() -> CliRunner:
    return CliRunner()


def test_ca_init_issue_produces_parseable_pem(runner, tmp_path):
    state = tmp_path / "ca"
    result = runner.invoke(cli, ["ca", "init", "--dir", str(state), "--seed", "5"])
    assert result.exit_code == 0, result.output
    root = parse_certificate((state / "root.pem").read_bytes())
    assert root.is_self_signed

    result = runner.invoke(cli, [
        "ca", "issue", "--dir", str(state), "--dn", "CN=meter-7, O=aa",
        "--aia", "http://127.0.0.1:8080/ocsp"])
    assert result.exit_code == 0, result.output
    pem_path = result.output.strip().splitlines()[-1]
    meta = parse_certificate(open(pem_path, "rb").read())
    assert meta.aia_ocsp_url == "http://127.0.0.1:8080/ocsp"
    assert meta.issuer_dn == root.subject_dn


def test_ca_revoke_and_crl(runner, tmp_path):
    state = tmp_path / "ca"
    runner.invoke(cli, ["ca", "init", "--dir", str(state)])
    issued = runner.invoke(cli, ["ca", "issue", "--dir", str(state), "--dn", "CN=m, O=aa"])
    serial_hex = re.search(r"serial (0x[0-9a-f]+)", issued.output).group(1)

    revoked = runner.invoke(cli, [
        "ca", "revoke", "--dir", str(state), "--serial", serial_hex,
        "--reason", "superseded"])
    assert revoked.exit_code == 0, revoked.output

    crl = runner.invoke(cli, ["ca", "crl", "--dir", str(state)])
    assert crl.exit_code == 0, crl.output
    snapshot = parse_crl((state / "crl.pem").read_bytes())
    assert [e.serial_number for e in snapshot.entries] == [int(serial_hex, 16)]


def test_ca_revoke_unknown_serial_exits_1(runner, tmp_path):
    state = tmp_path / "ca"
    runner.invoke(cli, ["ca", "init", "--dir", str(state)])
    result = runner.invoke(cli, ["ca", "revoke", "--dir", str(state), "--serial", "0xdead"])
    assert result.exit_code == 1
    assert "never issued" in result.output


def test_unknown_subcommand_exits_2(runner):
    assert runner.invoke(cli, ["frobnicate"]).exit_code == 2
    assert runner.invoke(cli, ["ca", "explode"]).exit_code == 2


def test_help_on_every_level(runner):
    for args in ([], ["ca"], ["responder"], ["cache"], ["sc"], ["sim"], ["bench"]):
        result = runner.invoke(cli, args + ["--help"])
        assert result.exit_code == 0
        assert "Usage" in result.output


def test_sim_run_stapled_reports_zero_server_queries(runner):
    result = runner.invoke(cli, ["sim", "run", "--mode", "stapled", "-n", "10", "--json"])
    assert result.exit_code == 0, result.output
    stats = json.loads(result.output)
    assert stats["server_ocsp_queries"] == 0
    assert stats["accepts"] == 10


def test_sim_run_direct_counts_queries(runner):
    result = runner.invoke(cli, ["sim", "run", "--mode", "direct", "-n", "7"])
    assert result.exit_code == 0
    assert "server_ocsp_queries: 7" in result.output


def test_sim_replay_modes(runner):
    expired = runner.invoke(cli, ["sim", "replay"])
    assert expired.exit_code == 0
    assert "REJECT (STALE_RESPONSE)" in expired.output
    fresh = runner.invoke(cli, ["sim", "replay", "--in-window"])
    assert fresh.exit_code == 0
    assert "ACCEPT" in fresh.output


def test_sim_script_file(runner, tmp_path):
    script = tmp_path / "scenario.txt"
    script.write_text(
        "issue meter-1\n"
        "handshake meter-1 stapled\n"
        "revoke meter-1\n"
        "advance-clock 7d1h\n"
        "handshake meter-1 stapled\n")
    result = runner.invoke(cli, ["sim", "run", "--script", str(script)])
    assert result.exit_code == 0, result.output
    assert "handshake meter-1: ACCEPT" in result.output
    assert "handshake meter-1: REJECT (STALE_RESPONSE)" in result.output


def test_sc_build_check_verify(runner, tmp_path):
    out = tmp_path / "fleet.sgsc"
    built = runner.invoke(cli, [
        "sc", "build", "--out", str(out), "--bits", "64", "--revoked", "3,17"])
    assert built.exit_code == 0, built.output
    assert "1 signature operation" in built.output
    key_path = tmp_path / "fleet.key.pem"
    assert key_path.exists()

    revoked = runner.invoke(cli, ["sc", "check", str(out), "--index", "3"])
    assert "1 (REVOKED)" in revoked.output
    valid = runner.invoke(cli, ["sc", "check", str(out), "--index", "4"])
    assert "0 (VALID)" in valid.output
    dump = runner.invoke(cli, ["sc", "check", str(out)])
    assert "bit_count: 64" in dump.output

    verified = runner.invoke(cli, ["sc", "verify", str(out), "--pub", str(key_path)])
    assert verified.exit_code == 0
    assert "OK" in verified.output

    blob = bytearray(out.read_bytes())
    blob[10] ^= 0x01
    out.write_bytes(bytes(blob))
    tampered = runner.invoke(cli, ["sc", "verify", str(out), "--pub", str(key_path)])
    assert tampered.exit_code == 1


def test_cache_requires_store_or_server(runner, tmp_path):
    result = runner.invoke(cli, ["cache", "export"])
    assert result.exit_code == 2


def test_cache_cli_against_live_responder(runner, tmp_path, authority, leaf):
    from staplegrid.codec import encode_crl
    from staplegrid.codec import pem as pemcodec
    from staplegrid.responder import HybridResponder, ResponderConfig
    from staplegrid.service import RunningService, create_app
    import socket

    with socket.socket() as probe:
        probe.bind(("127.0.0.1", 0))
        port = probe.getsockname()[1]
    crl_raw = encode_crl(authority.root_cert.subject_dn.raw, FIXED_NOW, None,
                         [], authority.root_key)
    config = ResponderConfig(
        issuer_cert=authority.root_cert, signing_key=authority.root_key,
        signing_cert=authority.root_cert, crl_source="<memory>")
    responder = HybridResponder(config, crl_loader=lambda: crl_raw)
    responder.refresh_blacklist()
    service = RunningService(create_app(responder=responder,
                                        refresh_in_background=False),
                             "127.0.0.1", port).start()
    try:
        meter = authority.issue_cert(
            "CN=cli-meter, O=aa", aia_url=f"{service.base_url}/ocsp")
        cert_path = tmp_path / "meter.pem"
        issuer_path = tmp_path / "root.pem"
        cert_path.write_bytes(pemcodec.encode(meter.raw_der, pemcodec.CERTIFICATE))
        issuer_path.write_bytes(pemcodec.encode(authority.root_cert.raw_der,
                                                pemcodec.CERTIFICATE))
        store = tmp_path / "staples.db"
        fetched = runner.invoke(cli, [
            "cache", "fetch", "--store", str(store),
            "--cert", str(cert_path), "--issuer", str(issuer_path)])
        assert fetched.exit_code == 0, fetched.output
        assert "status: GOOD" in fetched.output

        stapled = runner.invoke(cli, [
            "cache", "staple", "--store", str(store),
            "--serial", str(meter.serial_number),
            "--out", str(tmp_path / "staple.der")])
        assert stapled.exit_code == 0, stapled.output
        from staplegrid.codec import decode_ocsp_response

        decoded = decode_ocsp_response((tmp_path / "staple.der").read_bytes())
        assert decoded.single_responses[0].cert_id.serial_number == meter.serial_number

        maintained = runner.invoke(cli, [
            "cache", "maintain", "--store", str(store),
            "--anchor", str(issuer_path)])
        assert maintained.exit_code == 0, maintained.output
        assert "don't need update" in maintained.output

        exported = runner.invoke(cli, ["cache", "export", "--store", str(store)])
        assert "ocsp_responses: 1 rows" in exported.output

        frame = runner.invoke(cli, [
            "bench", "frame", "--endpoint", f"{service.base_url}/ocsp",
            "--cert", str(cert_path), "--issuer", str(issuer_path)])
        assert frame.exit_code == 0, frame.output
        assert "total_bytes:" in frame.output
        assert "1841" in frame.output
    finally:
        service.stop()


def test_settings_file_and_env_override(tmp_path, monkeypatch):
    config = tmp_path / "responder.conf"
    config.write_text(
        "# responder settings\n"
        "listen_address = 127.0.0.1:9999\n"
        "refresh_interval = 1800\n"
        "crl_source = /tmp/x.crl\n")
    settings = load_settings(config, env={})
    assert settings == {"listen_address": "127.0.0.1:9999",
                        "refresh_interval": "1800",
                        "crl_source": "/tmp/x.crl"}
    overridden = load_settings(config, env={"STAPLEGRID_REFRESH_INTERVAL": "60",
                                            "STAPLEGRID_RESPONSE_VALIDITY": "86400"})
    assert overridden["refresh_interval"] == "60"
    assert overridden["response_validity"] == "86400"
    bad = tmp_path / "bad.conf"
    bad.write_text("not a key value line\n")
    with pytest.raises(ValueError):
        load_settings(bad, env={})
