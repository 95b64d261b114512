import hashlib

import pytest

from employchain.hashing import ZERO_ADDRESS, Address, digest, encode, hash_fields
from oracles import sha256_address


def test_digest_is_sha256():
    assert digest(b"abc") == hashlib.sha256(b"abc").digest()


def test_encode_is_length_prefixed():
    assert encode("ab", 7) == b"\x00\x00\x00\x02ab" + b"\x00\x00\x00\x017"


def test_encode_nested_lists_count_items():
    inner = b"\x00\x00\x00\x01x"
    body = b"\x00\x00\x00\x01" + inner
    assert encode(["x"]) == len(body).to_bytes(4, "big") + body


def test_field_boundaries_matter():
    assert hash_fields("ab", "c") != hash_fields("a", "bc")


def test_booleans_are_refused():
    with pytest.raises(TypeError):
        encode(True)


def test_floats_are_refused():
    with pytest.raises(TypeError):
        encode(1.5)


def test_address_from_seed_matches_reference():
    for seed in ("alice", "bob", "ünïcode"):
        assert Address.from_seed(seed).raw == sha256_address(seed)


def test_address_hex_round_trip():
    a = Address.from_seed("alice")
    assert Address.from_hex(a.hex) == a
    assert str(a) == a.hex and len(a.hex) == 40


@pytest.mark.parametrize("text", ["00" * 19, "AB" * 20, "zz" * 20, ""])
def test_address_from_hex_rejects_non_canonical(text):
    with pytest.raises(ValueError):
        Address.from_hex(text)


def test_address_size_is_enforced():
    with pytest.raises(ValueError):
        Address(b"short")


def test_derived_addresses_differ_from_accounts():
    assert Address.derive("alice") != Address.from_seed("alice")
    assert Address.derive("x", 1, "sc_deposit") != Address.derive("x", 1, "sc_application")


def test_zero_address():
    assert ZERO_ADDRESS.raw == bytes(20)


def test_no_collisions_over_ten_thousand_seeds():
    seen = {Address.from_seed(f"seed-{i}") for i in range(10_000)}
    assert len(seen) == 10_000
