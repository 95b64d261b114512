"""Employment contracts: deposit escrow, application registry, relationship tracker.

A job is three cooperating contracts created together by the platform
factory (``deploy_job``).  Each one stores the addresses of the other two:

* :class:`DepositContract` escrows ``k * n * hours_per_day * time_wage``
  tokens and pays a worker only when called by its relationship contract.
* :class:`ApplicationContract` stores the offer and issues one
  identification code per applying worker.
* :class:`RelationshipContract` hires workers against their codes, counts
  matured hours, triggers the payment on a worker's last workday and, once
  every position has concluded, issues the certification code (if enabled).

Contract call payloads are canonical JSON arrays, see
:func:`employchain.ledger.make_payload`.  Entrypoints:

====================  ===========================================  ==========
contract              payload                                      value
====================  ===========================================  ==========
platform              ["deploy_job",k,n,hours,wage,desc,certify]    deposit
platform              ["register",role,address]  (system only)     0
application           ["apply"]                                    0
relationship          ["hire",worker,code]                         0
relationship          ["workday",worker]                           0
deposit               ["payment",worker,amount]                    0
====================  ===========================================  ==========
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import ContractError, IdentityError, PreconditionError
from .hashing import ZERO_ADDRESS, Address, hash_fields
from .ledger import Block, Contract, Ledger, Transaction, TxReceipt, make_payload, parse_payload
from .lifecycle import AuthorityRegistry, register

PLATFORM_ADDRESS = Address.derive("platform")


@dataclass(frozen=True)
class JobOffer:
    employer: Address
    positions: int = 1
    workdays: int = 1
    hours_per_day: int = 8
    time_wage: int = 10
    description: str = ""
    certify: bool = True

    def __post_init__(self):
        for name in ("positions", "workdays", "hours_per_day"):
            value = getattr(self, name)
            if type(value) is not int or value < 1:
                raise PreconditionError(f"{name} must be an integer >= 1")
        if type(self.time_wage) is not int or self.time_wage < 0:
            raise PreconditionError("time_wage must be a non-negative integer")

    @property
    def agreed_hours(self) -> int:
        return self.workdays * self.hours_per_day

    @property
    def wage_per_worker(self) -> int:
        return self.agreed_hours * self.time_wage

    @property
    def required_deposit(self) -> int:
        return self.positions * self.wage_per_worker


@dataclass(frozen=True)
class JobRef:
    deposit: Address
    application: Address
    relationship: Address

    @property
    def key(self) -> str:
        return self.application.hex


def job_addresses(employer: Address, nonce: int) -> JobRef:
    """Addresses of the contracts created by ``employer``'s transaction ``nonce``."""
    return JobRef(
        Address.derive(employer, nonce, "sc_deposit"),
        Address.derive(employer, nonce, "sc_application"),
        Address.derive(employer, nonce, "sc_relationship"),
    )


def identification_code(application: Address, worker: Address, height: int) -> bytes:
    return hash_fields(application, worker, height)


def certification_code(relationship: Address, height: int,
                       payments: Sequence[tuple[Address, int]]) -> bytes:
    return hash_fields(relationship, height, [[w, amount] for w, amount in payments])


def _address(value) -> Address:
    try:
        return Address.from_hex(value)
    except (TypeError, ValueError):
        raise ContractError(f"not an address: {value!r}", "bad-arguments") from None


def _code(value) -> bytes:
    try:
        raw = bytes.fromhex(value)
    except (TypeError, ValueError):
        raise ContractError(f"not a code: {value!r}", "bad-arguments") from None
    if len(raw) != 32:
        raise ContractError("codes are 32 bytes", "bad-arguments")
    return raw


def _count(value, name: str) -> int:
    if type(value) is not int:
        raise ContractError(f"{name} must be an integer", "bad-arguments")
    return value


def _registry(ctx) -> AuthorityRegistry:
    return ctx.view(PLATFORM_ADDRESS).registry


class Platform(Contract):
    """Factory creating the three contracts of a job; also hosts the registry."""

    entrypoints = ("deploy_job", "register")
    journaled = False

    def __init__(self, registry: AuthorityRegistry):
        self.registry = registry

    def deploy_job(self, ctx, positions, workdays, hours_per_day, time_wage, description, certify):
        employer = ctx.caller
        if not self.registry.is_employer(employer):
            raise ContractError(f"{employer} is not an authorized employer", "authority")
        if not isinstance(description, str):
            raise ContractError("description must be text", "bad-arguments")
        try:
            offer = JobOffer(employer, _count(positions, "positions"), _count(workdays, "workdays"),
                             _count(hours_per_day, "hours_per_day"), _count(time_wage, "time_wage"),
                             description, bool(_count(certify, "certify")))
        except PreconditionError as exc:
            raise ContractError(str(exc), "bad-arguments") from None
        deposit = ctx.value
        if deposit < offer.required_deposit:
            raise ContractError(f"deposit {deposit} does not cover wages {offer.required_deposit}",
                                "insolvency-protection")
        if deposit > offer.required_deposit:
            raise ContractError(f"deposit {deposit} exceeds wages {offer.required_deposit}",
                                "deposit-mismatch")
        job = job_addresses(employer, ctx.tx.nonce)
        ctx.create_contract(job.deposit, DepositContract(job.deposit, job.application, job.relationship))
        ctx.create_contract(job.application, ApplicationContract(
            job.application, offer, ctx.height, job.deposit, job.relationship))
        ctx.create_contract(job.relationship, RelationshipContract(
            job.relationship, employer, job.application, job.deposit))
        ctx.transfer(job.deposit, deposit)
        ctx.view(job.deposit).escrow_balance = deposit
        ctx.emit("job_deployed", employer, job.deposit, job.application, job.relationship,
                 offer.positions, offer.workdays, offer.hours_per_day, offer.time_wage,
                 deposit, int(offer.certify), offer.description)
        return job.application

    def register(self, ctx, role, addr):
        if ctx.caller != ZERO_ADDRESS:
            raise ContractError("registry updates come from the authority only", "authority")
        if role not in ("employer", "worker"):
            raise ContractError(f"unknown role {role!r}", "bad-arguments")
        addr = _address(addr)
        self.registry.add(role, addr)
        ctx.emit("registered", role, addr)


@dataclass
class DepositContract(Contract):
    address: Address
    application: Address
    relationship: Address
    escrow_balance: int = 0
    paid: dict = field(default_factory=dict)

    entrypoints = ("payment",)

    def payment(self, ctx, worker, amount):
        if ctx.caller != self.relationship:
            raise ContractError(f"payment called by {ctx.caller}, only the relationship "
                                "contract may pay", "authorization")
        worker = _address(worker)
        amount = _count(amount, "amount")
        if worker in self.paid:
            raise ContractError(f"{worker} was already paid", "idempotency")
        expected = ctx.view(self.application).offer.wage_per_worker
        if amount != expected:
            raise ContractError(f"amount {amount} differs from agreed wage {expected}", "amount")
        if amount > self.escrow_balance:
            raise ContractError("escrow cannot cover the wage", "insolvency-protection")
        ctx.transfer(worker, amount)
        self.escrow_balance -= amount
        self.paid[worker] = amount
        ctx.emit("payment", worker, amount, ctx.caller)


@dataclass
class ApplicationContract(Contract):
    address: Address
    offer: JobOffer
    created_height: int
    deposit: Address
    relationship: Address
    applicants: dict = field(default_factory=dict)

    entrypoints = ("apply",)

    def apply(self, ctx):
        worker = ctx.caller
        if not _registry(ctx).is_worker(worker):
            raise ContractError(f"{worker} is not an authorized worker", "authority")
        rel = ctx.view(self.relationship)
        if rel.concluded_all(self.offer):
            raise ContractError("job concluded", "closed")
        if rel.filled >= self.offer.positions:
            raise ContractError("no open positions", "closed")
        code = self.applicants.get(worker)
        if code is None:
            code = self.applicants[worker] = identification_code(self.address, worker,
                                                                 self.created_height)
        ctx.emit("applied", worker, code)
        return code


@dataclass
class RelationshipContract(Contract):
    address: Address
    employer: Address
    application: Address
    deposit: Address
    hired: dict = field(default_factory=dict)
    concluded: dict = field(default_factory=dict)
    payments: list = field(default_factory=list)
    certification: bytes | None = None

    entrypoints = ("hire", "workday")

    @property
    def filled(self) -> int:
        return len(self.hired) + len(self.concluded)

    def concluded_all(self, offer: JobOffer) -> bool:
        return len(self.concluded) >= offer.positions

    def _require_employer(self, ctx) -> None:
        if ctx.caller != self.employer:
            raise ContractError(f"{ctx.caller} is not this job's employer", "authorization")

    def hire(self, ctx, worker, code):
        self._require_employer(ctx)
        worker = _address(worker)
        code = _code(code)
        app = ctx.view(self.application)
        offer = app.offer
        if self.concluded_all(offer):
            raise ContractError("job concluded", "closed")
        if worker in self.hired or worker in self.concluded:
            raise ContractError(f"{worker} already hired", "duplicate")
        if self.filled >= offer.positions:
            raise ContractError("all positions are filled", "capacity")
        expected = identification_code(app.address, worker, app.created_height)
        if app.applicants.get(worker) != expected or code != expected:
            raise ContractError("identification code is not valid for this worker", "validity")
        self.hired[worker] = 0
        ctx.emit("hired", worker)

    def workday(self, ctx, worker):
        self._require_employer(ctx)
        worker = _address(worker)
        if worker in self.concluded:
            raise ContractError(f"{worker} already concluded", "overrun")
        if worker not in self.hired:
            raise ContractError(f"{worker} is not hired", "membership")
        offer = ctx.view(self.application).offer
        self.hired[worker] += offer.hours_per_day
        ctx.emit("workday", worker, self.hired[worker])
        if self.hired[worker] < offer.agreed_hours:
            return self.hired[worker]
        self.concluded[worker] = self.hired.pop(worker)
        amount = offer.wage_per_worker
        ctx.call(self.deposit, "payment", worker, amount)
        self.payments.append((worker, amount))
        if self.concluded_all(offer):
            ctx.emit("job_concluded", len(self.concluded))
            if offer.certify:
                self.certification = certification_code(self.address, ctx.height, self.payments)
                ctx.emit("certified", self.certification)
        return self.concluded[worker]


# -- reads -----------------------------------------------------------------

@dataclass(frozen=True)
class RelationshipView:
    hired: dict
    matured_hours: dict
    concluded: frozenset
    certification: bytes | None


def _contract(ledger: Ledger, addr: Address, kind: type):
    contract = ledger.contracts.get(addr)
    if not isinstance(contract, kind):
        raise IdentityError(f"no {kind.__name__} at {addr}")
    return contract


def query_relationship(ledger: Ledger, relationship: Address) -> RelationshipView:
    with ledger._lock:
        rel = _contract(ledger, relationship, RelationshipContract)
        matured = dict(rel.hired)
        matured.update(rel.concluded)
        return RelationshipView(dict(rel.hired), matured, frozenset(rel.concluded), rel.certification)


def escrow_balance(ledger: Ledger, deposit: Address) -> int:
    with ledger._lock:
        return _contract(ledger, deposit, DepositContract).escrow_balance


def total_escrow(ledger: Ledger) -> int:
    with ledger._lock:
        return sum(c.escrow_balance for c in ledger.contracts.values()
                   if isinstance(c, DepositContract))


def offer_of(ledger: Ledger, application: Address) -> JobOffer:
    return _contract(ledger, application, ApplicationContract).offer


# -- chain construction and replay -----------------------------------------

def registry_of(ledger: Ledger) -> AuthorityRegistry:
    return ledger.contracts[PLATFORM_ADDRESS].registry


def open_chain(genesis: Iterable[tuple[str | bytes, int]] = (), employers: Iterable = (),
               workers: Iterable = ()) -> Ledger:
    """Ledger with the platform installed and a sealed genesis block.

    ``employers``/``workers`` are seeds of genesis accounts to register.
    """
    ledger = Ledger(genesis, seal_genesis=False)
    registry = AuthorityRegistry(ledger=ledger)
    ledger.install(PLATFORM_ADDRESS, Platform(registry))
    registry.on_register = lambda role, addr: ledger.record_system(
        PLATFORM_ADDRESS, "register", role, addr)
    for seed in employers:
        register(registry, "employer", Address.from_seed(seed))
    for seed in workers:
        register(registry, "worker", Address.from_seed(seed))
    ledger.seal_block()
    return ledger


def fresh_ledger() -> Ledger:
    """Empty ledger with the platform installed, ready to re-execute blocks."""
    ledger = Ledger(seal_genesis=False)
    ledger.install(PLATFORM_ADDRESS, Platform(AuthorityRegistry(ledger=ledger)))
    return ledger


def execute_block(ledger: Ledger, txs: Iterable[Transaction]) -> Block:
    """Queue ``txs`` verbatim (system records take effect eagerly) and seal them."""
    registry = registry_of(ledger)
    for tx in txs:
        if tx.is_system:
            _queue_record(ledger, registry, tx)
        elif not ledger.submit_transaction(tx).accepted:
            # admission is advisory here; execution decides the outcome
            ledger._pending.append(tx)
    return ledger.seal_block()


def replay_chain(blocks: Sequence[Block], on_block=None) -> tuple[Ledger, int | None]:
    """Re-execute ``blocks`` from scratch.

    Returns the rebuilt ledger and the first height whose recomputed block
    differs from the given one (None when every block reproduces exactly).
    ``on_block(ledger, block)`` is called after each sealed block.
    """
    ledger = fresh_ledger()
    for block in blocks:
        sealed = execute_block(ledger, block.tx_list)
        if on_block is not None:
            on_block(ledger, sealed)
        if sealed.block_hash != block.block_hash:
            return ledger, block.index
    return ledger, None


def _queue_record(ledger: Ledger, registry: AuthorityRegistry, tx: Transaction) -> None:
    # system records take effect eagerly, exactly as the live calls did
    try:
        function, args = parse_payload(tx.payload)
    except ContractError:
        function, args = "", []
    if function in ("genesis", "create") and args and isinstance(args[0], str):
        if Address.from_seed(args[0]) not in ledger.accounts and args[0]:
            ledger._register_account(args[0])
    elif function == "register" and len(args) == 2 and args[0] in ("employer", "worker"):
        try:
            registry.add(args[0], Address.from_hex(args[1]))
        except ValueError:
            pass
    ledger._pending.append(tx)


def verify_certification(blocks: Sequence[Block], job: JobRef | Address) -> bool:
    """Recompute a job's certification code from chain events alone."""
    rel = job.relationship if isinstance(job, JobRef) else None
    app = job.application if isinstance(job, JobRef) else job
    payments: list[tuple[Address, int]] = []
    deposit = None
    for block in blocks:
        for _, rc in block.entries():
            for ev in rc.events if rc.ok else ():
                if ev.name == "job_deployed" and ev.args[2] == app.hex:
                    deposit = Address.from_hex(ev.args[1])
                    rel = Address.from_hex(ev.args[3])
                elif ev.name == "payment" and ev.contract == deposit:
                    payments.append((Address.from_hex(ev.args[0]), ev.args[1]))
                elif ev.name == "certified" and ev.contract == rel:
                    return ev.args[0] == certification_code(rel, block.index, payments).hex()
    return False


# -- client ----------------------------------------------------------------

def _submit(ledger: Ledger, sender: Address, recipient: Address, amount: int,
            function: str, *args) -> TxReceipt:
    return ledger.transact(sender, recipient, amount, make_payload(function, *args))


def deploy_job(ledger: Ledger, employer: Address, offer: JobOffer,
               deposit: int | None = None) -> tuple[TxReceipt, JobRef]:
    """Submit a job deployment; returns the receipt and the job's future addresses."""
    if deposit is None:
        deposit = offer.required_deposit
    with ledger._lock:
        nonce = ledger.next_nonce(employer) if employer in ledger.accounts else 1
        receipt = _submit(ledger, employer, PLATFORM_ADDRESS, deposit, "deploy_job",
                          offer.positions, offer.workdays, offer.hours_per_day, offer.time_wage,
                          offer.description, int(offer.certify))
    return receipt, job_addresses(employer, nonce)


def apply(ledger: Ledger, worker: Address, application: Address) -> TxReceipt:
    return _submit(ledger, worker, application, 0, "apply")


def hire(ledger: Ledger, employer: Address, relationship: Address, worker: Address,
         code: bytes) -> TxReceipt:
    return _submit(ledger, employer, relationship, 0, "hire", worker, code)


def record_workday(ledger: Ledger, employer: Address, relationship: Address,
                   worker: Address) -> TxReceipt:
    return _submit(ledger, employer, relationship, 0, "workday", worker)


def payment(ledger: Ledger, caller: Address, deposit: Address, worker: Address,
            amount: int) -> TxReceipt:
    """Direct (external) payment call; only ever succeeds for the relationship contract."""
    return _submit(ledger, caller, deposit, 0, "payment", worker, amount)
