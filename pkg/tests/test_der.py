"""DER primitive round trips and no-crash guarantees."""

import datetime

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from staplegrid.codec import der
from staplegrid.errors import MalformedDer


@given(st.integers(min_value=-(2 ** 160), max_value=2 ** 160))
def test_integer_round_trip(value):
    encoded = der.encode_integer(value)
    reader = der.Reader(encoded)
    assert reader.read_integer() == value
    assert reader.at_end()


def test_integer_minimal_encoding_enforced():
    with pytest.raises(MalformedDer):
        der.parse_integer(b"\x00\x7f")
    with pytest.raises(MalformedDer):
        der.parse_integer(b"\xff\x80")
    with pytest.raises(MalformedDer):
        der.parse_integer(b"")


@given(st.lists(st.integers(min_value=0, max_value=2 ** 28), min_size=0, max_size=8))
def test_oid_round_trip(tail):
    dotted = ".".join(str(a) for a in [1, 3] + tail)
    content, _ = der.top_level(der.encode_oid(dotted), der.OID, "OID")
    assert der.parse_oid(content) == dotted


@given(st.binary(max_size=300))
def test_octet_string_round_trip(payload):
    reader = der.Reader(der.encode_octet_string(payload))
    assert reader.read(der.OCTET_STRING) == payload


def test_times_round_trip():
    dt = datetime.datetime(2024, 6, 26, 9, 0, 42, tzinfo=datetime.timezone.utc)
    tag_content = der.Reader(der.encode_generalized_time(dt)).read_any()
    assert der.parse_time(tag_content[0], tag_content[1]) == dt
    # UTCTime branch (pre-2050) and the century pivot
    utc = der.Reader(der.encode_x509_time(dt)).read_any()
    assert utc[0] == der.UTC_TIME
    assert der.parse_time(utc[0], utc[1]) == dt
    assert der.parse_time(der.UTC_TIME, b"490101000000Z").year == 2049
    assert der.parse_time(der.UTC_TIME, b"500101000000Z").year == 1950


def test_time_rejects_malformed():
    for bad in (b"2024", b"20240626090042", b"20240626090042.5Z", b"abcdefghijklmZ"):
        with pytest.raises(MalformedDer):
            der.parse_time(der.GENERALIZED_TIME, bad)


def test_indefinite_and_reserved_lengths_rejected():
    with pytest.raises(MalformedDer):
        der.Reader(b"\x30\x80\x00\x00").read_any()
    with pytest.raises(MalformedDer):
        der.Reader(b"\x30\xff").read_any()
    # long form used for a short length is non-minimal
    with pytest.raises(MalformedDer):
        der.Reader(b"\x04\x81\x05hello").read_any()


def test_trailing_data_rejected():
    blob = der.encode_sequence(der.encode_integer(1)) + b"\x00"
    with pytest.raises(MalformedDer):
        der.top_level(blob, der.SEQUENCE)


@settings(max_examples=300)
@given(st.binary(max_size=64))
def test_reader_never_crashes_on_garbage(blob):
    reader = der.Reader(blob)
    try:
        while not reader.at_end():
            reader.read_any()
    except MalformedDer:
        pass


def test_bit_string_padding_rules():
    assert der.parse_bit_string(b"\x00\xab\xcd") == b"\xab\xcd"
    with pytest.raises(MalformedDer):
        der.parse_bit_string(b"")
    with pytest.raises(MalformedDer):
        der.parse_bit_string(b"\x09\xab")
