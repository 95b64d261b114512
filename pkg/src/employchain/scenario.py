"""Line-oriented scenario files and the deterministic scenario runner.

A scenario file starts with the header ``DES-SCENARIO 1``.  Every other
non-blank line is one step; ``#`` starts a comment.  Tokens are split with
shell quoting rules, so descriptions may contain spaces when quoted.

Declarations (must precede use)::

    seed 7                           # seeds the network delivery schedule
    genesis alice 1000               # account with an initial balance
    account mallory                  # zero-balance account created later
    employer alice                   # register in the authority whitelist
    worker bob
    tag adversarial                  # net violations are expected

Actions::

    deploy alice farm k=1 n=2 hours=8 wage=10 [deposit=N] [certify=yes|no] [desc="..."]
    apply bob farm
    hire alice farm bob [code=<name>|<hex>]
    workday alice farm bob
    pay mallory farm bob [amount=N]  # direct payment call on the deposit
    transfer alice bob 5
    replay alice                     # resubmit alice's last transaction verbatim
    seal
    query farm [state=conclusion]
    tamper 2 drop|amount|byte        # mutate a copy of the sealed chain
    expect rejected|ok|<signal>      # outcome of the preceding action

Pending transactions are sealed at the end of the run.
"""

from __future__ import annotations

import json
import shlex
from dataclasses import dataclass, field
from pathlib import Path

from .contracts import (
    JobOffer, JobRef, deploy_job, apply as apply_call, escrow_balance,
    hire as hire_call, identification_code, open_chain, payment as payment_call,
    query_relationship, record_workday, total_escrow, verify_certification,
)
from .errors import EmploychainError, ScenarioError
from .hashing import Address
from .ledger import Ledger, Transaction, ValidationReport, export_chain, validate_chain_text
from .lifecycle import ConformanceReport, derive_state, monitor
from .petrinet import FiringSequence, Violation, build_farming_net, conformance
from .trace import Trace, trace_from_blocks

SCENARIO_HEADER = "DES-SCENARIO 1"

DECLARATIONS = ("seed", "genesis", "account", "employer", "worker", "tag")
ACTIONS = ("deploy", "apply", "hire", "workday", "pay", "transfer", "replay",
           "seal", "query", "tamper", "expect")


@dataclass(frozen=True)
class Step:
    line: int
    verb: str
    args: tuple[str, ...]
    options: dict = field(default_factory=dict)

    def opt(self, key: str, default=None):
        return self.options.get(key, default)


@dataclass
class Scenario:
    seed: int = 0
    genesis: list[tuple[str, int]] = field(default_factory=list)
    accounts: list[str] = field(default_factory=list)
    employers: list[str] = field(default_factory=list)
    workers: list[str] = field(default_factory=list)
    tags: set[str] = field(default_factory=set)
    steps: list[Step] = field(default_factory=list)
    name: str = ""

    @property
    def actors(self) -> list[str]:
        return self.genesis_names() + self.accounts

    def genesis_names(self) -> list[str]:
        return [s for s, _ in self.genesis]

    @property
    def adversarial(self) -> bool:
        return "adversarial" in self.tags


_ARITY = {
    "deploy": 2, "apply": 2, "hire": 3, "workday": 3, "pay": 3, "transfer": 3,
    "replay": 1, "seal": 0, "query": 1, "tamper": 2, "expect": 1,
}
_OPTIONS = {
    "deploy": {"k", "n", "hours", "wage", "deposit", "certify", "desc"},
    "hire": {"code"},
    "pay": {"amount"},
    "query": {"state"},
}


def _int(text: str, what: str, line: int, minimum: int = 0) -> int:
    try:
        value = int(text)
    except ValueError:
        raise ScenarioError(f"{what} must be an integer, got {text!r}", line) from None
    if value < minimum:
        raise ScenarioError(f"{what} must be >= {minimum}", line)
    return value


def parse_scenario(text: str, name: str = "") -> Scenario:
    lines = text.splitlines()
    if not lines or lines[0].strip() != SCENARIO_HEADER:
        raise ScenarioError(f"missing {SCENARIO_HEADER!r} header", 1)
    sc = Scenario(name=name)
    known: set[str] = set()
    jobs: set[str] = set()
    for lineno, raw in enumerate(lines[1:], start=2):
        try:
            tokens = shlex.split(raw, comments=True)
        except ValueError as exc:
            raise ScenarioError(str(exc), lineno) from None
        if not tokens:
            continue
        verb, rest = tokens[0], tokens[1:]
        if verb in DECLARATIONS:
            _declare(sc, known, verb, rest, lineno)
            continue
        if verb not in ACTIONS:
            raise ScenarioError(f"unknown verb {verb!r}", lineno)
        args = [t for t in rest if "=" not in t]
        options = dict(t.split("=", 1) for t in rest if "=" in t)
        if len(args) != _ARITY[verb]:
            raise ScenarioError(f"{verb} takes {_ARITY[verb]} arguments, got {len(args)}", lineno)
        unknown = set(options) - _OPTIONS.get(verb, set())
        if unknown:
            raise ScenarioError(f"unknown option(s) for {verb}: {', '.join(sorted(unknown))}", lineno)
        step = Step(lineno, verb, tuple(args), options)
        _check_refs(step, known, jobs)
        sc.steps.append(step)
    return sc


def _declare(sc: Scenario, known: set, verb: str, rest: list, line: int) -> None:
    if verb == "seed":
        if len(rest) != 1:
            raise ScenarioError("seed takes one integer", line)
        sc.seed = _int(rest[0], "seed", line)
    elif verb == "genesis":
        if len(rest) != 2:
            raise ScenarioError("genesis takes a name and a balance", line)
        if rest[0] in known:
            raise ScenarioError(f"actor {rest[0]!r} declared twice", line)
        sc.genesis.append((rest[0], _int(rest[1], "balance", line)))
        known.add(rest[0])
    elif verb == "account":
        if len(rest) != 1 or rest[0] in known:
            raise ScenarioError("account takes one new name", line)
        sc.accounts.append(rest[0])
        known.add(rest[0])
    elif verb in ("employer", "worker"):
        if len(rest) != 1:
            raise ScenarioError(f"{verb} takes one name", line)
        if rest[0] not in known:
            raise ScenarioError(f"undeclared actor {rest[0]!r}", line)
        if rest[0] not in sc.genesis_names():
            raise ScenarioError("only genesis accounts can be registered", line)
        (sc.employers if verb == "employer" else sc.workers).append(rest[0])
    elif verb == "tag":
        sc.tags.update(rest)


def _check_refs(step: Step, known: set, jobs: set) -> None:
    def actor(name):
        if name not in known:
            raise ScenarioError(f"undeclared actor {name!r}", step.line)

    def job(name):
        if name not in jobs:
            raise ScenarioError(f"unknown job {name!r}", step.line)

    a = step.args
    if step.verb == "deploy":
        actor(a[0])
        if a[1] in jobs:
            raise ScenarioError(f"job {a[1]!r} deployed twice", step.line)
        for key in ("k", "n", "hours"):
            _int(step.opt(key, "1"), key, step.line, 1)
        _int(step.opt("wage", "0"), "wage", step.line)
        if "deposit" in step.options:
            _int(step.opt("deposit"), "deposit", step.line)
        if step.opt("certify", "yes") not in ("yes", "no"):
            raise ScenarioError("certify must be yes or no", step.line)
        jobs.add(a[1])
    elif step.verb == "apply":
        actor(a[0]), job(a[1])
    elif step.verb in ("hire", "workday", "pay"):
        actor(a[0]), job(a[1]), actor(a[2])
        if step.verb == "pay" and "amount" in step.options:
            _int(step.opt("amount"), "amount", step.line)
    elif step.verb == "transfer":
        actor(a[0]), actor(a[1])
        _int(a[2], "amount", step.line)
    elif step.verb == "replay":
        actor(a[0])
    elif step.verb == "query":
        job(a[0])
    elif step.verb == "tamper":
        _int(a[0], "height", step.line)
        if a[1] not in ("drop", "amount", "byte"):
            raise ScenarioError("tamper mode must be drop, amount or byte", step.line)


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    return parse_scenario(path.read_text(encoding="utf-8"), name=path.stem)


# -- running ---------------------------------------------------------------

@dataclass
class Outcome:
    """Fate of one submitted action: admission result, then execution result."""
    line: int
    verb: str
    tx: Transaction | None
    admitted: bool
    reason: str = ""

    def final(self, ledger: Ledger) -> tuple[bool, str]:
        if not self.admitted or self.tx is None:
            return False, self.reason
        rc = ledger.receipt(self.tx.tx_id)
        if rc is None:
            return False, "unsealed"
        return rc.ok, rc.reason


@dataclass
class Snapshot:
    height: int
    balances: dict[str, int]
    escrow: int

    @property
    def total(self) -> int:
        return sum(self.balances.values()) + self.escrow


@dataclass
class ScenarioResult:
    scenario: Scenario
    ledger: Ledger
    trace: Trace
    report: ConformanceReport
    nets: dict[str, FiringSequence | Violation]
    validation: ValidationReport
    history: list[Snapshot]
    jobs: dict[str, JobRef]
    log: list[str] = field(default_factory=list)
    failures: list[str] = field(default_factory=list)

    @property
    def chain(self):
        return self.ledger.blocks

    @property
    def conserved(self) -> bool:
        return len({s.total for s in self.history}) <= 1

    @property
    def net_conformant(self) -> bool:
        return all(r.conformant for r in self.nets.values())

    @property
    def ok(self) -> bool:
        nets_ok = self.net_conformant or self.scenario.adversarial
        return (self.validation.valid and self.conserved and self.report.conformant
                and nets_ok and not self.failures)

    def summary(self) -> dict:
        return {
            "scenario": self.scenario.name,
            "ok": self.ok,
            "height": self.ledger.height,
            "head_hash": self.ledger.head_hash.hex(),
            "valid": self.validation.valid,
            "conserved": self.conserved,
            "supply": self.history[-1].total if self.history else 0,
            "fsm_conformant": self.report.conformant,
            "net_conformant": self.net_conformant,
            "adversarial": self.scenario.adversarial,
            "jobs": {
                name: {
                    "application": ref.application.hex,
                    "state": str(self.report.final_states.get(ref.key, "S0_idle")),
                    "net": self.nets[ref.key].as_dict() if ref.key in self.nets else None,
                    "certified": verify_certification(self.chain, ref),
                }
                for name, ref in self.jobs.items()
            },
            "balances": self.history[-1].balances if self.history else {},
            "escrow": self.history[-1].escrow if self.history else 0,
            "failures": list(self.failures),
        }


class _Runner:
    def __init__(self, sc: Scenario):
        self.sc = sc
        self.addr = {name: Address.from_seed(name) for name in sc.actors}
        self.ledger = open_chain(sc.genesis, sc.employers, sc.workers)
        for name in sc.accounts:
            self.ledger.create_account(name)
        self.jobs: dict[str, JobRef] = {}
        self.offers: dict[str, JobOffer] = {}
        self.last_tx: dict[str, Transaction] = {}
        self.outcomes: list[Outcome] = []
        self.expects: list[tuple[Step, Outcome]] = []
        self.history: list[Snapshot] = []
        self.log: list[str] = []
        self.failures: list[str] = []
        self.snapshot()

    def snapshot(self) -> None:
        bal = {}
        for name, a in self.addr.items():
            if a in self.ledger.accounts:
                bal[name] = self.ledger.balance(a)
        self.history.append(Snapshot(self.ledger.height, bal, total_escrow(self.ledger)))

    def seal(self) -> None:
        block = self.ledger.seal_block()
        self.log.append(f"sealed block {block.index} with {len(block.tx_list)} tx")
        self.snapshot()

    def _record(self, step: Step, sender: str, receipt) -> Outcome:
        tx = None
        if receipt.accepted:
            tx = self.ledger.pending[-1]
            self.last_tx[sender] = tx
        out = Outcome(step.line, step.verb, tx, receipt.accepted, receipt.reason)
        self.outcomes.append(out)
        if not receipt.accepted:
            self.log.append(f"line {step.line}: {step.verb} rejected ({receipt.reason})")
        return out

    def _code(self, step: Step, ref: JobRef, worker: str) -> bytes:
        given = step.opt("code")
        if given is not None and given not in self.addr:
            try:
                return bytes.fromhex(given)
            except ValueError:
                raise ScenarioError(f"code must be an actor name or hex, got {given!r}", step.line) from None
        holder = self.addr[given if given is not None else worker]
        app = self.ledger.contracts.get(ref.application)
        created = app.created_height if app is not None else self.ledger.height + 1
        return identification_code(ref.application, holder, created)

    def run(self, step: Step) -> None:
        getattr(self, "do_" + step.verb)(step)

    def do_deploy(self, step: Step) -> None:
        employer, job = step.args
        try:
            offer = JobOffer(self.addr[employer], int(step.opt("k", 1)), int(step.opt("n", 1)),
                             int(step.opt("hours", 8)), int(step.opt("wage", 10)),
                             step.opt("desc", ""), step.opt("certify", "yes") == "yes")
        except EmploychainError as exc:
            raise ScenarioError(str(exc), step.line) from None
        deposit = int(step.opt("deposit", offer.required_deposit))
        receipt, ref = deploy_job(self.ledger, self.addr[employer], offer, deposit)
        self.jobs[job] = ref
        self.offers[job] = offer
        self._record(step, employer, receipt)

    def do_apply(self, step: Step) -> None:
        worker, job = step.args
        self._record(step, worker, apply_call(self.ledger, self.addr[worker], self.jobs[job].application))

    def do_hire(self, step: Step) -> None:
        employer, job, worker = step.args
        ref = self.jobs[job]
        code = self._code(step, ref, worker)
        self._record(step, employer, hire_call(self.ledger, self.addr[employer], ref.relationship,
                                               self.addr[worker], code))

    def do_workday(self, step: Step) -> None:
        employer, job, worker = step.args
        self._record(step, employer, record_workday(self.ledger, self.addr[employer],
                                                    self.jobs[job].relationship, self.addr[worker]))

    def do_pay(self, step: Step) -> None:
        caller, job, worker = step.args
        amount = int(step.opt("amount", self.offers[job].wage_per_worker))
        self._record(step, caller, payment_call(self.ledger, self.addr[caller], self.jobs[job].deposit,
                                                self.addr[worker], amount))

    def do_transfer(self, step: Step) -> None:
        src, dst, amount = step.args
        self._record(step, src, self.ledger.transact(self.addr[src], self.addr[dst], int(amount)))

    def do_replay(self, step: Step) -> None:
        (actor,) = step.args
        tx = self.last_tx.get(actor)
        if tx is None:
            raise ScenarioError(f"{actor} has no transaction to replay", step.line)
        receipt = self.ledger.submit_transaction(tx)
        out = Outcome(step.line, step.verb, tx if receipt.accepted else None,
                      receipt.accepted, receipt.reason)
        self.outcomes.append(out)
        self.log.append(f"line {step.line}: replay {'accepted' if receipt.accepted else 'rejected'}"
                        f"{'' if receipt.accepted else ' (' + receipt.reason + ')'}")

    def do_seal(self, step: Step) -> None:
        self.seal()

    def do_query(self, step: Step) -> None:
        (job,) = step.args
        ref = self.jobs[job]
        try:
            state = derive_state(self.ledger, ref)
        except EmploychainError:
            state = None
        view = None
        if ref.relationship in self.ledger.contracts:
            view = query_relationship(self.ledger, ref.relationship)
        escrow = escrow_balance(self.ledger, ref.deposit) if ref.deposit in self.ledger.contracts else 0
        self.log.append(f"line {step.line}: {job} state={state} escrow={escrow} "
                        f"matured={sum(view.matured_hours.values()) if view else 0}")
        want = step.opt("state")
        if want is not None and str(state) != want:
            self.failures.append(f"line {step.line}: {job} is {state}, expected {want}")

    def do_tamper(self, step: Step) -> None:
        height, mode = int(step.args[0]), step.args[1]
        if height > self.ledger.height:
            raise ScenarioError(f"block {height} is not sealed yet", step.line)
        text = tamper_chain(self.ledger.export(), height, mode)
        report = validate_chain_text(text)
        detected = not report.valid and report.height == height
        self.log.append(f"line {step.line}: tamper {mode} at {height} -> "
                        f"{'detected' if detected else 'MISSED'} ({report.reason})")
        if not detected:
            self.failures.append(f"line {step.line}: tampering block {height} went undetected")

    def do_expect(self, step: Step) -> None:
        if not self.outcomes:
            raise ScenarioError("expect must follow an action", step.line)
        self.expects.append((step, self.outcomes[-1]))

    def check_expectations(self) -> None:
        for step, out in self.expects:
            ok, reason = out.final(self.ledger)
            want = step.args[0]
            if want == "ok":
                met = ok
            elif want == "rejected":
                met = not ok
            else:
                met = not ok and reason.split(":", 1)[0] == want
            verdict = "met" if met else "UNMET"
            self.log.append(f"line {step.line}: expect {want} {verdict} ({reason or 'ok'})")
            if not met:
                self.failures.append(f"line {step.line}: expected {want}, got {reason or 'ok'}")


def tamper_chain(text: str, height: int, mode: str) -> str:
    """Return ``text`` with sealed block ``height`` altered.

    ``drop`` removes the block's last transaction, ``amount`` bumps the first
    transaction's amount, ``byte`` flips one byte in the middle of its line.
    """
    lines = text.split("\n")
    i = height + 1
    line = lines[i]
    if mode == "byte":
        mid = len(line) // 2
        ch = line[mid]
        lines[i] = line[:mid] + ("0" if ch != "0" else "1") + line[mid + 1:]
        return "\n".join(lines)
    obj = json.loads(line)
    if mode == "drop":
        if obj["txs"]:
            obj["txs"].pop()
        else:
            obj["index"] += 1
    elif mode == "amount":
        if obj["txs"]:
            obj["txs"][0]["amount"] += 1
        else:
            obj["prev_hash"] = "f" * 64
    lines[i] = json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True)
    return "\n".join(lines)


def run_scenario(sc: Scenario) -> ScenarioResult:
    """Execute ``sc`` step by step; deterministic for a given scenario."""
    runner = _Runner(sc)
    for step in sc.steps:
        runner.run(step)
    if runner.ledger.pending:
        runner.seal()
    runner.check_expectations()
    blocks = runner.ledger.blocks
    trace = trace_from_blocks(blocks)
    report = monitor(trace)
    nets: dict[str, FiringSequence | Violation] = {}
    for job in trace.jobs():
        offer = trace.offer(job)
        net, m0 = build_farming_net(n=offer["n"], k=offer["k"])
        nets[job] = conformance(trace.for_job(job), net, m0)
    validation = validate_chain_text(export_chain(blocks))
    if any(s.escrow != sum(runner.ledger.balance(r.deposit) for r in runner.jobs.values()
                           if r.deposit in runner.ledger.contracts)
           for s in runner.history[-1:]):
        runner.failures.append("escrow bookkeeping differs from deposit balances")
    return ScenarioResult(sc, runner.ledger, trace, report, nets, validation, runner.history,
                          dict(runner.jobs), runner.log, runner.failures)
