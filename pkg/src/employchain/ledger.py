"""Append-only, hash-chained transaction ledger.

The ledger keeps accounts with integer balances and nonces, a pending pool,
and a list of sealed blocks.  Sealing is explicit: :meth:`Ledger.seal_block`
executes every pending transaction in submission order, dispatching contract
calls to the :class:`Contract` installed at the recipient address, and
appends a block that records each transaction together with its execution
receipt.  Failed transactions stay in the block with ``status="failed"``.

Administrative facts (genesis funding, account creation, registry updates)
are recorded as *system records*: transactions from :data:`ZERO_ADDRESS`
with nonce 0.  With them the chain alone is enough to replay the full state.
"""

from __future__ import annotations

import copy
import inspect
import json
import threading
from dataclasses import dataclass
from typing import Any, Iterable, Sequence

from .errors import (
    ChainFormatError,
    ContractError,
    DuplicateAccountError,
    IdentityError,
    PreconditionError,
)
from .hashing import ZERO_ADDRESS, ZERO_HASH, Address, hash_fields

CHAIN_HEADER = "DES-CHAIN 1"
MAX_CALL_DEPTH = 8


def make_payload(function: str, *args) -> str:
    """Canonical call data: compact JSON array ``[function, *args]``.

    Addresses and byte strings are rendered as lowercase hex text.
    """
    return json.dumps([function, *(_render_arg(a) for a in args)],
                      separators=(",", ":"), ensure_ascii=True)


def parse_payload(payload: str) -> tuple[str, list]:
    try:
        call = json.loads(payload)
    except ValueError as exc:
        raise ContractError(f"payload is not JSON: {exc}", "bad-payload") from None
    if not isinstance(call, list) or not call or not isinstance(call[0], str):
        raise ContractError("payload must be [function, *args]", "bad-payload")
    if make_payload(*call) != payload:
        raise ContractError("payload is not canonical", "bad-payload")
    return call[0], call[1:]


def _render_arg(value):
    if isinstance(value, Address):
        return value.hex
    if isinstance(value, (bytes, bytearray)):
        return bytes(value).hex()
    if isinstance(value, bool):
        return int(value)
    if isinstance(value, (int, str)):
        return value
    raise TypeError(f"unsupported call argument {value!r}")


def _render_output(value) -> str:
    if value is None:
        return ""
    return str(_render_arg(value))


@dataclass
class Account:
    address: Address
    balance: int = 0
    nonce: int = 0
    seed: str | None = None
    is_contract: bool = False


@dataclass(frozen=True)
class Transaction:
    sender: Address
    recipient: Address
    amount: int
    payload: str = ""
    nonce: int = 0
    tx_id: bytes = b""

    def __post_init__(self):
        if not self.tx_id:
            object.__setattr__(self, "tx_id", self.compute_id())

    def compute_id(self) -> bytes:
        return hash_fields(self.sender, self.recipient, self.amount, self.payload, self.nonce)

    @property
    def is_system(self) -> bool:
        return self.sender == ZERO_ADDRESS

    def fields(self) -> list:
        return [self.sender, self.recipient, self.amount, self.payload, self.nonce, self.tx_id]


@dataclass(frozen=True)
class Event:
    contract: Address
    name: str
    args: tuple = ()

    def fields(self) -> list:
        return [self.contract, self.name, list(self.args)]


@dataclass(frozen=True)
class Receipt:
    """Execution outcome of one transaction inside a block."""

    status: str
    reason: str = ""
    output: str = ""
    events: tuple[Event, ...] = ()

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def fields(self) -> list:
        return [self.status, self.reason, self.output, [e.fields() for e in self.events]]


@dataclass(frozen=True)
class TxReceipt:
    """Submission outcome: whether the transaction entered the pending pool."""

    tx_id: bytes
    accepted: bool
    reason: str = ""

    @property
    def signal(self) -> str:
        return self.reason.split(":", 1)[0] if self.reason else ""


@dataclass(frozen=True)
class Block:
    index: int
    prev_hash: bytes
    tx_list: tuple[Transaction, ...] = ()
    receipts: tuple[Receipt, ...] = ()
    block_hash: bytes = b""

    def __post_init__(self):
        if not self.block_hash:
            object.__setattr__(self, "block_hash", self.compute_hash())

    def compute_hash(self) -> bytes:
        return hash_fields(
            self.index,
            self.prev_hash,
            [tx.fields() for tx in self.tx_list],
            [r.fields() for r in self.receipts],
        )

    def entries(self):
        return zip(self.tx_list, self.receipts)


@dataclass(frozen=True)
class ValidationReport:
    valid: bool
    length: int
    height: int | None = None
    reason: str = ""

    def as_dict(self) -> dict:
        return {"valid": self.valid, "length": self.length,
                "height": self.height, "reason": self.reason}


class Contract:
    """Base class for contracts hosted by a :class:`Ledger`.

    Subclasses list callable method names in ``entrypoints``; each method
    receives the :class:`CallContext` followed by the decoded payload args.
    Contracts with ``journaled = True`` are snapshotted before every
    transaction and restored if it fails.
    """

    entrypoints: tuple[str, ...] = ()
    journaled = True

    def invoke(self, ctx: "CallContext", function: str, args: Sequence) -> Any:
        if function not in self.entrypoints:
            raise ContractError(f"no entrypoint {function!r}", "unknown-function")
        method = getattr(self, function)
        try:
            inspect.signature(method).bind(ctx, *args)
        except TypeError as exc:
            raise ContractError(f"{function}: {exc}", "bad-arguments") from None
        return method(ctx, *args)


class CallContext:
    """Execution environment handed to contract entrypoints."""

    def __init__(self, ledger: "Ledger", height: int, tx: Transaction):
        self.ledger = ledger
        self.height = height
        self.tx = tx
        self.events: list[Event] = []
        self._frames: list[tuple[Address, Address, int]] = []

    @property
    def address(self) -> Address:
        """Address of the executing contract."""
        return self._frames[-1][0]

    @property
    def caller(self) -> Address:
        return self._frames[-1][1]

    @property
    def value(self) -> int:
        return self._frames[-1][2]

    @property
    def origin(self) -> Address:
        return self.tx.sender

    def invoke(self, target: Address, function: str, args: Sequence,
               caller: Address, value: int = 0) -> Any:
        contract = self.ledger.contracts.get(target)
        if contract is None:
            raise ContractError(f"no contract at {target}", "identity")
        if len(self._frames) >= MAX_CALL_DEPTH:
            raise ContractError("call depth exceeded", "call-depth")
        self._frames.append((target, caller, value))
        try:
            return contract.invoke(self, function, args)
        finally:
            self._frames.pop()

    def call(self, target: Address, function: str, *args) -> Any:
        """Internal call from the executing contract."""
        return self.invoke(target, function, [_render_arg(a) for a in args], caller=self.address)

    def view(self, target: Address) -> Contract:
        contract = self.ledger.contracts.get(target)
        if contract is None:
            raise ContractError(f"no contract at {target}", "identity")
        return contract

    def transfer(self, recipient: Address, amount: int) -> None:
        self.ledger._move(self.address, recipient, amount)

    def emit(self, name: str, *args) -> None:
        self.events.append(Event(self.address, name, tuple(_render_arg(a) for a in args)))

    def create_contract(self, address: Address, contract: Contract) -> None:
        if address in self.ledger.accounts:
            raise ContractError(f"address {address} already in use", "duplicate")
        self.ledger.install(address, contract)


class Ledger:
    """Single-writer ledger; reads are lock-protected and see sealed state only."""

    def __init__(self, genesis: Iterable[tuple[bytes | str, int]] = (), *, seal_genesis: bool = True):
        self._lock = threading.RLock()
        self.accounts: dict[Address, Account] = {}
        self.contracts: dict[Address, Contract] = {}
        self.blocks: list[Block] = []
        self._pending: list[Transaction] = []
        self._index: dict[bytes, tuple[int, int]] = {}
        for seed, amount in genesis:
            if amount < 0:
                raise PreconditionError("genesis balance must be non-negative")
            addr = self._register_account(seed)
            self._pending.append(Transaction(ZERO_ADDRESS, addr, amount,
                                             make_payload("genesis", _seed_text(seed))))
        if seal_genesis:
            self.seal_block()

    # -- accounts ---------------------------------------------------------

    def _register_account(self, seed: bytes | str) -> Address:
        text = _seed_text(seed)
        if not text:
            raise PreconditionError("seed must be non-empty")
        addr = Address.from_seed(text)
        if addr in self.accounts:
            raise DuplicateAccountError(f"account for seed {text!r} already exists")
        self.accounts[addr] = Account(addr, seed=text)
        return addr

    def create_account(self, seed: bytes | str) -> Address:
        """Register a zero-balance account; the creation is recorded in the next block."""
        with self._lock:
            addr = self._register_account(seed)
            self._pending.append(Transaction(ZERO_ADDRESS, addr, 0,
                                             make_payload("create", _seed_text(seed))))
            return addr

    def install(self, address: Address, contract: Contract) -> None:
        """Host ``contract`` at ``address`` (creating its account)."""
        self.accounts.setdefault(address, Account(address, is_contract=True))
        self.accounts[address].is_contract = True
        self.contracts[address] = contract

    def record_system(self, recipient: Address, function: str, *args) -> Transaction:
        """Queue a system record addressed to a hosted contract."""
        with self._lock:
            tx = Transaction(ZERO_ADDRESS, recipient, 0, make_payload(function, *args))
            self._pending.append(tx)
            return tx

    def balance(self, addr: Address) -> int:
        with self._lock:
            return self._account(addr).balance

    def nonce(self, addr: Address) -> int:
        with self._lock:
            return self._account(addr).nonce

    def _account(self, addr: Address) -> Account:
        try:
            return self.accounts[addr]
        except KeyError:
            raise IdentityError(f"unknown address {addr}") from None

    def total_supply(self) -> int:
        with self._lock:
            return sum(a.balance for a in self.accounts.values())

    def balances(self) -> dict[Address, int]:
        with self._lock:
            return {a: acc.balance for a, acc in self.accounts.items()}

    # -- submission -------------------------------------------------------

    @property
    def pending(self) -> tuple[Transaction, ...]:
        return tuple(self._pending)

    def next_nonce(self, addr: Address) -> int:
        with self._lock:
            acc = self._account(addr)
            return acc.nonce + 1 + sum(1 for tx in self._pending if tx.sender == addr)

    def submit_transaction(self, tx: Transaction) -> TxReceipt:
        with self._lock:
            reason = self._admission_error(tx)
            if reason:
                return TxReceipt(tx.tx_id, False, reason)
            self._pending.append(tx)
            return TxReceipt(tx.tx_id, True)

    def _admission_error(self, tx: Transaction) -> str:
        if tx.is_system:
            return "identity: system address cannot submit transactions"
        if tx.tx_id != tx.compute_id():
            return "integrity: tx_id does not match contents"
        acc = self.accounts.get(tx.sender)
        if acc is None:
            return f"identity: unknown sender {tx.sender}"
        if acc.is_contract:
            return "identity: contract accounts cannot originate transactions"
        expected = self.next_nonce(tx.sender)
        if tx.nonce < expected:
            return f"stale-nonce: got {tx.nonce}, expected {expected}"
        if tx.nonce > expected:
            return f"bad-nonce: got {tx.nonce}, expected {expected}"
        if tx.amount < 0:
            return "precondition: negative amount"
        if tx.amount > acc.balance:
            return f"overdraw: amount {tx.amount} exceeds balance {acc.balance}"
        return ""

    def transact(self, sender: Address, recipient: Address, amount: int = 0,
                 payload: str = "") -> TxReceipt:
        """Build a transaction with the sender's next nonce and submit it."""
        with self._lock:
            nonce = self.next_nonce(sender) if sender in self.accounts else 1
            return self.submit_transaction(Transaction(sender, recipient, amount, payload, nonce))

    # -- sealing ----------------------------------------------------------

    def seal_block(self) -> Block:
        with self._lock:
            index = len(self.blocks)
            prev = self.blocks[-1].block_hash if self.blocks else ZERO_HASH
            txs = tuple(self._pending)
            self._pending = []
            receipts = tuple(self._execute(tx, index) for tx in txs)
            block = Block(index, prev, txs, receipts)
            for pos, tx in enumerate(txs):
                self._index.setdefault(tx.tx_id, (index, pos))
            self.blocks.append(block)
            return block

    def _execute(self, tx: Transaction, height: int) -> Receipt:
        if tx.is_system:
            return self._execute_system(tx, height)
        acc = self.accounts.get(tx.sender)
        if acc is None or acc.is_contract:
            return Receipt("failed", f"identity: sender {tx.sender} cannot transact")
        if tx.nonce != acc.nonce + 1:
            return Receipt("failed", f"stale-nonce: got {tx.nonce}, expected {acc.nonce + 1}")
        acc.nonce += 1
        if tx.amount < 0 or tx.amount > acc.balance:
            return Receipt("failed", f"overdraw: amount {tx.amount} exceeds balance {acc.balance}")
        if tx.recipient not in self.accounts:
            return Receipt("failed", f"identity: unknown recipient {tx.recipient}")
        return self._run(tx, height, caller=tx.sender)

    def _execute_system(self, tx: Transaction, height: int) -> Receipt:
        try:
            function, args = parse_payload(tx.payload)
        except ContractError as exc:
            return Receipt("failed", exc.reason)
        if function in ("genesis", "create"):
            if function == "genesis" and height != 0:
                return Receipt("failed", "mint-forbidden: genesis funding only at height 0")
            if function == "create" and tx.amount:
                return Receipt("failed", "mint-forbidden: account creation carries no value")
            if len(args) != 1 or not isinstance(args[0], str) or Address.from_seed(args[0]) != tx.recipient:
                return Receipt("failed", "bad-payload: seed does not match recipient")
            acc = self.accounts.get(tx.recipient)
            if acc is None:
                acc = self.accounts[tx.recipient] = Account(tx.recipient, seed=args[0])
            acc.balance += tx.amount
            return Receipt("ok")
        if tx.amount:
            return Receipt("failed", "mint-forbidden: system records carry no value")
        return self._run(tx, height, caller=ZERO_ADDRESS)

    def _run(self, tx: Transaction, height: int, caller: Address) -> Receipt:
        saved = self._snapshot()
        ctx = CallContext(self, height, tx)
        try:
            if tx.amount:
                self._move(caller, tx.recipient, tx.amount)
            if tx.recipient in self.contracts:
                function, args = parse_payload(tx.payload)
                output = ctx.invoke(tx.recipient, function, args, caller=caller, value=tx.amount)
            elif tx.payload:
                raise ContractError(f"{tx.recipient} is not a contract", "identity")
            else:
                output = None
        except ContractError as exc:
            self._restore(saved)
            return Receipt("failed", exc.reason)
        return Receipt("ok", "", _render_output(output), tuple(ctx.events))

    def _move(self, src: Address, dst: Address, amount: int) -> None:
        if amount < 0:
            raise ContractError("negative transfer", "precondition")
        source = self.accounts.get(src)
        target = self.accounts.get(dst)
        if source is None or target is None:
            raise ContractError("transfer between unknown accounts", "identity")
        if source.balance < amount:
            raise ContractError(f"{src} holds {source.balance} < {amount}", "overdraw")
        source.balance -= amount
        target.balance += amount

    def _snapshot(self):
        balances = {a: acc.balance for a, acc in self.accounts.items()}
        contracts = {a: (copy.deepcopy(c) if c.journaled else c) for a, c in self.contracts.items()}
        return balances, contracts

    def _restore(self, saved) -> None:
        balances, contracts = saved
        for addr in list(self.accounts):
            if addr not in balances:
                del self.accounts[addr]
            else:
                self.accounts[addr].balance = balances[addr]
        self.contracts = contracts

    # -- inspection -------------------------------------------------------

    @property
    def height(self) -> int:
        return len(self.blocks) - 1

    @property
    def head_hash(self) -> bytes:
        return self.blocks[-1].block_hash if self.blocks else ZERO_HASH

    def receipt(self, tx_id: bytes) -> Receipt | None:
        """Execution receipt of a sealed transaction, or None if not sealed."""
        with self._lock:
            loc = self._index.get(tx_id)
            if loc is None:
                return None
            height, pos = loc
            return self.blocks[height].receipts[pos]

    def validate_chain(self) -> ValidationReport:
        with self._lock:
            return validate_blocks(self.blocks)

    def export(self) -> str:
        with self._lock:
            return export_chain(self.blocks)


def _seed_text(seed: bytes | str) -> str:
    if isinstance(seed, bytes):
        return seed.decode("utf-8")
    return seed


def _block_fault(block: Block, i: int, prev: bytes) -> str:
    if block.index != i:
        return f"index {block.index} at position {i}"
    if block.prev_hash != prev:
        return "prev_hash does not link to predecessor"
    if len(block.tx_list) != len(block.receipts):
        return "transaction/receipt count mismatch"
    for tx in block.tx_list:
        if tx.tx_id != tx.compute_id():
            return f"tx_id mismatch for {tx.tx_id.hex()[:12]}"
    if block.block_hash != block.compute_hash():
        return "block_hash does not recompute"
    return ""


def validate_blocks(blocks: Sequence[Block]) -> ValidationReport:
    """Recompute every digest and link; report the first bad height."""
    n = len(blocks)
    if n == 0:
        return ValidationReport(False, 0, None, "empty chain")
    prev = ZERO_HASH
    for i, block in enumerate(blocks):
        fault = _block_fault(block, i, prev)
        if fault:
            return ValidationReport(False, n, i, fault)
        prev = block.block_hash
    return ValidationReport(True, n)


# -- line-delimited chain files ---------------------------------------------

def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def block_to_dict(block: Block) -> dict:
    txs = []
    for tx, rc in block.entries():
        txs.append({
            "sender": tx.sender.hex,
            "recipient": tx.recipient.hex,
            "amount": tx.amount,
            "payload": tx.payload,
            "nonce": tx.nonce,
            "tx_id": tx.tx_id.hex(),
            "receipt": {
                "status": rc.status,
                "reason": rc.reason,
                "output": rc.output,
                "events": [[e.contract.hex, e.name, list(e.args)] for e in rc.events],
            },
        })
    return {
        "index": block.index,
        "prev_hash": block.prev_hash.hex(),
        "txs": txs,
        "block_hash": block.block_hash.hex(),
    }


def block_line(block: Block) -> str:
    return _dumps(block_to_dict(block))


def export_chain(blocks: Iterable[Block]) -> str:
    return "\n".join([CHAIN_HEADER, *(block_line(b) for b in blocks)]) + "\n"


def _expect(cond: bool, message: str, height: int) -> None:
    if not cond:
        raise ChainFormatError(message, height)


def _int(obj, key, height) -> int:
    value = obj.get(key)
    _expect(type(value) is int, f"{key} must be an integer", height)
    return value


def _str(obj, key, height) -> str:
    value = obj.get(key)
    _expect(isinstance(value, str), f"{key} must be a string", height)
    return value


def _hexbytes(obj, key, height, size) -> bytes:
    text = _str(obj, key, height)
    try:
        raw = bytes.fromhex(text)
    except ValueError:
        raise ChainFormatError(f"{key} is not hex", height) from None
    _expect(len(raw) == size and raw.hex() == text, f"{key} is not canonical hex", height)
    return raw


def block_from_line(line: str, height: int) -> Block:
    """Parse one block line strictly; the line must be in canonical form."""
    try:
        obj = json.loads(line)
    except ValueError as exc:
        raise ChainFormatError(f"malformed JSON: {exc}", height) from None
    _expect(isinstance(obj, dict), "block must be an object", height)
    _expect(_dumps(obj) == line, "block line is not canonical", height)
    _expect(set(obj) == {"index", "prev_hash", "txs", "block_hash"}, "unexpected block keys", height)
    txs, receipts = [], []
    _expect(isinstance(obj["txs"], list), "txs must be a list", height)
    for item in obj["txs"]:
        _expect(isinstance(item, dict), "tx must be an object", height)
        _expect(set(item) == {"sender", "recipient", "amount", "payload", "nonce", "tx_id", "receipt"},
                "unexpected tx keys", height)
        tx = Transaction(
            Address(_hexbytes(item, "sender", height, 20)),
            Address(_hexbytes(item, "recipient", height, 20)),
            _int(item, "amount", height),
            _str(item, "payload", height),
            _int(item, "nonce", height),
            _hexbytes(item, "tx_id", height, 32),
        )
        rc = item["receipt"]
        _expect(isinstance(rc, dict) and set(rc) == {"status", "reason", "output", "events"},
                "malformed receipt", height)
        events = []
        _expect(isinstance(rc["events"], list), "events must be a list", height)
        for ev in rc["events"]:
            _expect(isinstance(ev, list) and len(ev) == 3 and isinstance(ev[1], str)
                    and isinstance(ev[2], list), "malformed event", height)
            for arg in ev[2]:
                _expect(type(arg) in (int, str), "event args must be int or str", height)
            events.append(Event(Address(_hexbytes({"c": ev[0]}, "c", height, 20)), ev[1], tuple(ev[2])))
        receipts.append(Receipt(_str(rc, "status", height), _str(rc, "reason", height),
                                _str(rc, "output", height), tuple(events)))
        txs.append(tx)
    return Block(
        _int(obj, "index", height),
        _hexbytes(obj, "prev_hash", height, 32),
        tuple(txs),
        tuple(receipts),
        _hexbytes(obj, "block_hash", height, 32),
    )


def parse_chain(text: str) -> list[Block]:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0] != CHAIN_HEADER:
        raise ChainFormatError(f"missing {CHAIN_HEADER!r} header")
    return [block_from_line(line, h) for h, line in enumerate(lines[1:])]


def validate_chain_text(text: str) -> ValidationReport:
    """Validate a chain file: strict parsing, then digest and link checks."""
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0] != CHAIN_HEADER:
        return ValidationReport(False, 0, None, "missing chain header")
    n = len(lines) - 1
    if n == 0:
        return ValidationReport(False, 0, None, "empty chain")
    prev = ZERO_HASH
    for h, line in enumerate(lines[1:]):
        try:
            block = block_from_line(line, h)
        except ChainFormatError as exc:
            return ValidationReport(False, n, h, str(exc))
        fault = _block_fault(block, h, prev)
        if fault:
            return ValidationReport(False, n, h, fault)
        prev = block.block_hash
    return ValidationReport(True, n)
