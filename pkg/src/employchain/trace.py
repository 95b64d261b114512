"""Execution traces reconstructed from sealed blocks.

A trace is an ordered list of :class:`TraceRecord`.  Successful transactions
contribute one record per contract event they emitted; failed transactions
contribute a single record whose ``outcome`` carries the failure reason.
Nothing outside the chain is consulted, so any auditor holding the chain
file derives the same trace.

File format: a ``DES-TRACE 1`` header line followed by one canonical JSON
object per record (sorted keys, compact separators).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import ContractError, ScenarioError
from .ledger import Block, parse_payload

TRACE_HEADER = "DES-TRACE 1"

# contract event name -> trace kind
EVENT_KINDS = {
    "job_deployed": "deploy_job",
    "applied": "apply",
    "hired": "hire",
    "workday": "record_workday",
    "payment": "payment",
    "job_concluded": "conclusion",
    "certified": "certification",
    "registered": "register",
}

# payload function name -> trace kind, for failed calls
CALL_KINDS = {
    "deploy_job": "deploy_job",
    "apply": "apply",
    "hire": "hire",
    "workday": "record_workday",
    "payment": "payment",
    "register": "register",
    "genesis": "genesis",
    "create": "create_account",
}


@dataclass(frozen=True)
class TraceRecord:
    height: int
    tx_id: str
    kind: str
    actor: str
    target: str
    job: str = ""
    outcome: str = "ok"
    deltas: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.outcome == "ok"

    @property
    def worker(self) -> str:
        return self.deltas.get("worker", "")

    def to_dict(self) -> dict:
        return {
            "height": self.height,
            "tx_id": self.tx_id,
            "kind": self.kind,
            "actor": self.actor,
            "target": self.target,
            "job": self.job,
            "outcome": self.outcome,
            "deltas": dict(self.deltas),
        }

    def line(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"), ensure_ascii=True)


class Trace(list):
    """List of :class:`TraceRecord` with job helpers."""

    def jobs(self) -> list[str]:
        seen = []
        for r in self:
            if r.kind == "deploy_job" and r.ok and r.job not in seen:
                seen.append(r.job)
        return seen

    def for_job(self, job: str) -> "Trace":
        return Trace(r for r in self if r.job == job)

    def offer(self, job: str) -> dict:
        for r in self:
            if r.kind == "deploy_job" and r.ok and r.job == job:
                return r.deltas
        raise KeyError(job)

    def dumps(self) -> str:
        return "\n".join([TRACE_HEADER, *(r.line() for r in self)]) + "\n"


def _deploy_deltas(args: Sequence) -> dict:
    employer, dep, app, rel, k, n, hours, wage, deposit, certify, desc = args
    return {
        "employer": employer, "deposit_addr": dep, "application_addr": app,
        "relationship_addr": rel, "k": k, "n": n, "hours_per_day": hours,
        "time_wage": wage, "deposit": deposit, "certify": certify, "description": desc,
    }


def _event_deltas(name: str, args: Sequence) -> dict:
    if name == "job_deployed":
        return _deploy_deltas(args)
    if name == "applied":
        return {"worker": args[0], "code": args[1]}
    if name == "hired":
        return {"worker": args[0]}
    if name == "workday":
        return {"worker": args[0], "matured_hours": args[1]}
    if name == "payment":
        return {"worker": args[0], "amount": args[1], "caller": args[2]}
    if name == "certified":
        return {"code": args[0]}
    if name == "job_concluded":
        return {"workers": args[0]}
    if name == "registered":
        return {"role": args[0], "address": args[1]}
    return {"args": list(args)}


def trace_from_blocks(blocks: Iterable[Block]) -> Trace:
    trace = Trace()
    job_of: dict[str, str] = {}
    for block in blocks:
        for tx, rc in block.entries():
            tx_id = tx.tx_id.hex()
            sender = tx.sender.hex
            if not rc.ok:
                try:
                    function, _ = parse_payload(tx.payload) if tx.payload else ("transfer", [])
                except ContractError:
                    function = "invalid"
                kind = CALL_KINDS.get(function, function)
                trace.append(TraceRecord(block.index, tx_id, kind, sender, tx.recipient.hex,
                                         job_of.get(tx.recipient.hex, ""), rc.reason, {}))
                continue
            if tx.is_system and not rc.events:
                function, args = parse_payload(tx.payload)
                trace.append(TraceRecord(block.index, tx_id, CALL_KINDS.get(function, function),
                                         sender, tx.recipient.hex, "", "ok",
                                         {"seed": args[0], "amount": tx.amount}))
                continue
            if not rc.events:
                trace.append(TraceRecord(block.index, tx_id, "transfer", sender, tx.recipient.hex,
                                         "", "ok", {"amount": tx.amount}))
                continue
            for ev in rc.events:
                target = ev.contract.hex
                deltas = _event_deltas(ev.name, ev.args)
                if ev.name == "job_deployed":
                    job = deltas["application_addr"]
                    for key in ("deposit_addr", "application_addr", "relationship_addr"):
                        job_of[deltas[key]] = job
                else:
                    job = job_of.get(target, "")
                actor = deltas["caller"] if ev.name == "payment" else sender
                trace.append(TraceRecord(block.index, tx_id, EVENT_KINDS.get(ev.name, ev.name),
                                         actor, target, job, "ok", deltas))
    return trace


def parse_trace(text: str) -> Trace:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0] != TRACE_HEADER:
        raise ScenarioError(f"missing {TRACE_HEADER!r} header", 1)
    trace = Trace()
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            obj = json.loads(line)
            trace.append(TraceRecord(
                obj["height"], obj["tx_id"], obj["kind"], obj["actor"], obj["target"],
                obj["job"], obj["outcome"], obj["deltas"],
            ))
        except (ValueError, KeyError, TypeError) as exc:
            raise ScenarioError(f"bad trace record: {exc}", lineno) from None
    return trace
