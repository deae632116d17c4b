"""Signed collections: packing, lookup, tamper detection, assignment."""

import dataclasses
import datetime
import random

import pytest
from cryptography.hazmat.primitives.asymmetric import ec
from hypothesis import given, settings
from hypothesis import strategies as st

from staplegrid.errors import CollectionFull, IndexOutOfRange, MalformedDer
from staplegrid.signed_collection import (
    CollectionAssignment,
    CollectionStatus,
    CountingSigner,
    SignedCollection,
    assign_index,
    build_collection,
    dump_collection,
    load_collection,
    save_collection,
    status_at,
    verify_collection,
)

ISSUED_AT = datetime.datetime(2024, 6, 19, 10, 0, 0, tzinfo=datetime.timezone.utc)


@pytest.fixture(scope="module")
def signer() -> CountingSigner:
    return CountingSigner(ec.generate_private_key(ec.SECP256R1()))


def test_all_clear_bitmap_verifies(signer):
    collection = build_collection("sc-clear", [False] * 100, ISSUED_AT, signer)
    assert collection.bitmap == bytes(13)
    assert verify_collection(collection, signer.public_key())


def test_lookup_matches_source_for_every_index(signer):
    rng = random.Random(5)
    statuses = [rng.random() < 0.3 for _ in range(501)]
    collection = build_collection("sc-rand", statuses, ISSUED_AT, signer)
    for i, revoked in enumerate(statuses):
        expected = CollectionStatus.REVOKED if revoked else CollectionStatus.VALID
        assert status_at(collection, i) is expected


def test_bit_semantics(signer):
    collection = build_collection("sc-bits", [True, False], ISSUED_AT, signer)
    assert status_at(collection, 0) is CollectionStatus.REVOKED
    assert status_at(collection, 1) is CollectionStatus.VALID
    with pytest.raises(IndexOutOfRange):
        status_at(collection, 2)
    with pytest.raises(IndexOutOfRange):
        status_at(collection, -1)


def test_exactly_one_signature_regardless_of_size():
    signer = CountingSigner(ec.generate_private_key(ec.SECP256R1()))
    build_collection("sc-small", [False] * 8, ISSUED_AT, signer)
    assert signer.sign_count == 1
    build_collection("sc-large", [True] * 100_000, ISSUED_AT, signer)
    assert signer.sign_count == 2


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2 ** 32))
def test_any_signed_field_mutation_fails_verification(seed, signer):
    rng = random.Random(seed)
    statuses = [rng.random() < 0.5 for _ in range(64)]
    collection = build_collection("sc-mut", statuses, ISSUED_AT, signer)
    mutation = rng.choice(["bitmap", "name", "issued_at", "bit_count"])
    if mutation == "bitmap":
        flipped = bytearray(collection.bitmap)
        flipped[rng.randrange(len(flipped))] ^= 1 << rng.randrange(8)
        mutated = dataclasses.replace(collection, bitmap=bytes(flipped))
    elif mutation == "name":
        mutated = dataclasses.replace(collection, name=collection.name + "x")
    elif mutation == "issued_at":
        mutated = dataclasses.replace(
            collection, issued_at=collection.issued_at + datetime.timedelta(seconds=1))
    else:
        extended = collection.bitmap + b"\x00"
        mutated = dataclasses.replace(collection, bit_count=collection.bit_count + 8,
                                      bitmap=extended)
    assert verify_collection(collection, signer.public_key())
    assert not verify_collection(mutated, signer.public_key())


def test_trailing_bits_must_be_zero():
    with pytest.raises(MalformedDer):
        SignedCollection("sc", ISSUED_AT, 4, b"\x0f", b"sig")
    with pytest.raises(MalformedDer):
        SignedCollection("sc", ISSUED_AT, 9, b"\xff", b"sig")  # length mismatch


def test_file_round_trip(tmp_path, signer):
    statuses = [i % 3 == 0 for i in range(1000)]
    collection = build_collection("sc-file", statuses, ISSUED_AT, signer)
    path = tmp_path / "bits.sgsc"
    save_collection(collection, path)
    assert path.read_bytes()[:4] == b"SGSC"
    loaded = load_collection(path)
    assert loaded == collection
    assert verify_collection(loaded, signer.public_key())


def test_load_rejects_bad_magic(tmp_path):
    path = tmp_path / "bad.sgsc"
    path.write_bytes(b"NOPE" + b"\x00" * 32)
    with pytest.raises(MalformedDer):
        load_collection(path)


def test_dump_mentions_fields(signer):
    collection = build_collection("sc-dump", [True, False, True], ISSUED_AT, signer)
    text = dump_collection(collection)
    assert "name: sc-dump" in text
    assert "bit_count: 3" in text
    assert "revoked_bits: 2" in text
    assert "101" in text


def test_assignment_is_stable_and_dense():
    assignment = CollectionAssignment(bit_count=4)
    pair_a = assign_index(assignment, 1001)
    pair_b = assign_index(assignment, 1002)
    assert assign_index(assignment, 1001) == pair_a
    assert pair_a != pair_b
    assert pair_a[1] == 0 and pair_b[1] == 1
    assert pair_a[0] == pair_b[0] == "sc-0"


def test_assignment_collection_full():
    assignment = CollectionAssignment(bit_count=2)
    assign_index(assignment, 1)
    assign_index(assignment, 2)
    with pytest.raises(CollectionFull):
        assign_index(assignment, 3)
    # a new generation reopens capacity; earlier pairs stay stable
    assignment.add_generation("sc-1")
    assert assign_index(assignment, 3) == ("sc-1", 0)
    assert assign_index(assignment, 1) == ("sc-0", 0)
