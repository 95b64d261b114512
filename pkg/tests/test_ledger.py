import json

import pytest

from employchain.errors import ChainFormatError, DuplicateAccountError, IdentityError, PreconditionError
from employchain.hashing import ZERO_ADDRESS, ZERO_HASH, Address
from employchain.ledger import (
    CHAIN_HEADER, Ledger, Transaction, block_from_line, export_chain, make_payload,
    parse_chain, parse_payload, validate_blocks, validate_chain_text,
)
from employchain.errors import ContractError

A, B = Address.from_seed("a"), Address.from_seed("b")


@pytest.fixture
def ledger():
    return Ledger([("a", 100), ("b", 5)])


def test_genesis_block(ledger):
    assert ledger.height == 0
    g = ledger.blocks[0]
    assert g.prev_hash == ZERO_HASH and g.index == 0
    assert all(tx.is_system for tx in g.tx_list)
    assert ledger.balance(A) == 100 and ledger.balance(B) == 5
    assert ledger.total_supply() == 105


def test_negative_genesis_refused():
    with pytest.raises(PreconditionError):
        Ledger([("a", -1)])


def test_duplicate_account_refused(ledger):
    with pytest.raises(DuplicateAccountError):
        ledger.create_account("a")


def test_create_account_is_recorded(ledger):
    c = ledger.create_account("c")
    block = ledger.seal_block()
    assert ledger.balance(c) == 0
    assert block.tx_list[0].is_system and json.loads(block.tx_list[0].payload) == ["create", "c"]


def test_unknown_address_raises(ledger):
    with pytest.raises(IdentityError):
        ledger.balance(Address.from_seed("nobody"))


def test_transfer_executes_at_seal(ledger):
    r = ledger.transact(A, B, 30)
    assert r.accepted
    assert ledger.balance(A) == 100  # reads see sealed state only
    ledger.seal_block()
    assert ledger.balance(A) == 70 and ledger.balance(B) == 35
    assert ledger.nonce(A) == 1
    assert ledger.receipt(r.tx_id).ok


def test_overdraw_rejected_at_submission(ledger):
    r = ledger.transact(B, A, 6)
    assert not r.accepted and r.signal == "overdraw"


def test_overdraw_at_execution_fails_but_consumes_nonce(ledger):
    assert ledger.transact(B, A, 5).accepted
    r2 = ledger.transact(B, A, 5)  # admitted against the sealed balance
    assert r2.accepted
    ledger.seal_block()
    rc = ledger.receipt(r2.tx_id)
    assert not rc.ok and rc.reason.startswith("overdraw")
    assert ledger.nonce(B) == 2 and ledger.balance(B) == 0


def test_stale_and_gapped_nonces(ledger):
    tx = Transaction(A, B, 1, "", 1)
    assert ledger.submit_transaction(tx).accepted
    assert ledger.submit_transaction(tx).signal == "stale-nonce"
    assert ledger.submit_transaction(Transaction(A, B, 1, "", 5)).signal == "bad-nonce"


def test_forged_tx_id_rejected(ledger):
    tx = Transaction(A, B, 1, "", 1, tx_id=b"\x01" * 32)
    assert ledger.submit_transaction(tx).signal == "integrity"


def test_system_sender_cannot_submit(ledger):
    assert ledger.submit_transaction(Transaction(ZERO_ADDRESS, A, 1, "", 1)).signal == "identity"


def test_unknown_sender(ledger):
    r = ledger.transact(Address.from_seed("ghost"), A, 0)
    assert not r.accepted and r.signal == "identity"


def test_payload_to_non_contract_fails(ledger):
    r = ledger.transact(A, B, 0, make_payload("anything"))
    ledger.seal_block()
    assert ledger.receipt(r.tx_id).reason.startswith("identity")


def test_payload_round_trip():
    p = make_payload("f", A, b"\x01\x02", 3, "x", True)
    assert parse_payload(p) == ("f", [A.hex, "0102", 3, "x", 1])


@pytest.mark.parametrize("bad", ["", "{}", "[]", "[1]", '["f", 1]', "not json"])
def test_parse_payload_rejects(bad):
    with pytest.raises(ContractError):
        parse_payload(bad)


def test_chain_links_and_validates(ledger):
    for i in range(3):
        ledger.transact(A, B, 1)
        ledger.seal_block()
    blocks = ledger.blocks
    for prev, cur in zip(blocks, blocks[1:]):
        assert cur.prev_hash == prev.block_hash
    assert ledger.validate_chain().valid


def test_empty_blocks_allowed(ledger):
    b = ledger.seal_block()
    assert b.tx_list == () and ledger.validate_chain().valid


def test_export_round_trip(ledger):
    ledger.transact(A, B, 3)
    ledger.seal_block()
    text = ledger.export()
    assert text.startswith(CHAIN_HEADER + "\n")
    assert parse_chain(text) == ledger.blocks
    assert export_chain(parse_chain(text)) == text


def test_validate_reports_first_bad_height(ledger):
    ledger.transact(A, B, 3)
    ledger.seal_block()
    ledger.seal_block()
    lines = ledger.export().split("\n")
    obj = json.loads(lines[2])
    obj["txs"][0]["amount"] = 4
    lines[2] = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    report = validate_chain_text("\n".join(lines))
    assert not report.valid and report.height == 1


def test_validate_blocks_detects_relink(ledger):
    ledger.seal_block()
    blocks = list(ledger.blocks)
    blocks.reverse()
    assert validate_blocks(blocks).height == 0


def test_empty_and_headerless_chain_invalid():
    assert not validate_chain_text("").valid
    assert not validate_chain_text(CHAIN_HEADER + "\n").valid
    assert not validate_blocks([]).valid


def test_non_canonical_line_rejected(ledger):
    line = ledger.export().split("\n")[1]
    with pytest.raises(ChainFormatError):
        block_from_line(" " + line, 0)
