"""Employment lifecycle state machine, authority registry and trace monitor.

The machine has four states and five events::

    S0_idle           --new_job_offer--> awaiting_appliers
    awaiting_appliers --application----> awaiting_appliers   (internal)
    awaiting_appliers --hiring---------> relationship
    relationship      --workday--------> relationship        (internal)
    relationship      --payment--------> conclusion

Every other (state, event) pair is rejected.  A job with ``k`` positions is
monitored as ``k`` copies of this machine, one per position; the job-level
state is the aggregate described in :func:`aggregate_state`.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Callable, Iterable

from .errors import IdentityError, PreconditionError
from .hashing import Address
from .trace import Trace, trace_from_blocks

REPORT_HEADER = "DES-CONFORMANCE 1"


class LifecycleState(str, enum.Enum):
    S0_IDLE = "S0_idle"
    AWAITING_APPLIERS = "awaiting_appliers"
    RELATIONSHIP = "relationship"
    CONCLUSION = "conclusion"

    def __str__(self) -> str:
        return self.value


class EventKind(str, enum.Enum):
    NEW_JOB_OFFER = "new_job_offer"
    APPLICATION = "application"
    HIRING = "hiring"
    WORKDAY = "workday"
    PAYMENT = "payment"

    def __str__(self) -> str:
        return self.value


S = LifecycleState
E = EventKind

EDGES: dict[tuple[LifecycleState, EventKind], LifecycleState] = {
    (S.S0_IDLE, E.NEW_JOB_OFFER): S.AWAITING_APPLIERS,
    (S.AWAITING_APPLIERS, E.APPLICATION): S.AWAITING_APPLIERS,
    (S.AWAITING_APPLIERS, E.HIRING): S.RELATIONSHIP,
    (S.RELATIONSHIP, E.WORKDAY): S.RELATIONSHIP,
    (S.RELATIONSHIP, E.PAYMENT): S.CONCLUSION,
}

# position along the machine's only path; derived states never decrease
PHASE = {S.S0_IDLE: 0, S.AWAITING_APPLIERS: 1, S.RELATIONSHIP: 2, S.CONCLUSION: 3}

# trace kind -> lifecycle event
TRACE_EVENTS = {
    "deploy_job": E.NEW_JOB_OFFER,
    "apply": E.APPLICATION,
    "hire": E.HIRING,
    "record_workday": E.WORKDAY,
    "payment": E.PAYMENT,
}


@dataclass(frozen=True)
class LifecycleEvent:
    kind: EventKind
    actor: str = ""
    job: str = ""


@dataclass(frozen=True)
class InvalidTransition:
    state: LifecycleState
    event: EventKind

    def __bool__(self) -> bool:
        return False


def transition(state: LifecycleState, event: EventKind | LifecycleEvent) -> LifecycleState | InvalidTransition:
    """Next state along a lifecycle edge, or :class:`InvalidTransition`."""
    kind = event.kind if isinstance(event, LifecycleEvent) else EventKind(event)
    state = LifecycleState(state)
    nxt = EDGES.get((state, kind))
    if nxt is None:
        return InvalidTransition(state, kind)
    return nxt


def aggregate_state(positions: Iterable[LifecycleState] | None) -> LifecycleState:
    """Job state from per-position states.

    No job -> S0; nobody hired yet -> awaiting_appliers; every position
    concluded -> conclusion; otherwise relationship.
    """
    if positions is None:
        return S.S0_IDLE
    positions = list(positions)
    if not positions or all(p is S.S0_IDLE for p in positions):
        return S.S0_IDLE
    if all(p is S.CONCLUSION for p in positions):
        return S.CONCLUSION
    if any(p in (S.RELATIONSHIP, S.CONCLUSION) for p in positions):
        return S.RELATIONSHIP
    return S.AWAITING_APPLIERS


# -- central authority --------------------------------------------------------

ROLES = ("employer", "worker")


@dataclass
class AuthorityRegistry:
    """Whitelist of legally enabled employers and workers.

    ``ledger`` (optional) is used to check that registered addresses exist;
    ``on_register`` is called once per new membership, which is how chain
    builders record registrations on-chain.
    """

    employers: set = field(default_factory=set)
    workers: set = field(default_factory=set)
    ledger: object = field(default=None, repr=False, compare=False)
    on_register: Callable[[str, Address], None] | None = field(default=None, repr=False, compare=False)

    def members(self, role: str) -> set:
        if role == "employer":
            return self.employers
        if role == "worker":
            return self.workers
        raise PreconditionError(f"unknown role {role!r}")

    def add(self, role: str, addr: Address) -> bool:
        members = self.members(role)
        if addr in members:
            return False
        members.add(addr)
        return True

    def is_employer(self, addr: Address) -> bool:
        return addr in self.employers

    def is_worker(self, addr: Address) -> bool:
        return addr in self.workers


def register(registry: AuthorityRegistry, role: str, addr: Address) -> AuthorityRegistry:
    """Add ``addr`` to ``role``; idempotent."""
    registry.members(role)
    ledger = registry.ledger
    if ledger is not None and addr not in ledger.accounts:
        raise IdentityError(f"unknown address {addr}")
    if registry.add(role, addr) and registry.on_register is not None:
        registry.on_register(role, addr)
    return registry


# -- state derivation ------------------------------------------------------

def _job_key(job) -> str:
    if isinstance(job, str):
        return job
    if isinstance(job, Address):
        return job.hex
    return job.application.hex


def derive_state(chain, job, chain_height: int | None = None) -> LifecycleState:
    """Lifecycle state of ``job`` as recorded in ``chain`` up to ``chain_height``.

    ``chain`` is a ledger or a block list; ``job`` an application address
    (or its hex) or any object with an ``application`` attribute.
    """
    blocks = list(getattr(chain, "blocks", chain))
    if chain_height is None:
        chain_height = len(blocks) - 1
    key = _job_key(job)
    full = trace_from_blocks(blocks)
    if key not in full.jobs():
        raise IdentityError(f"unknown job {key}")
    trace = Trace(r for r in full if r.height <= chain_height and r.job == key and r.ok)
    if key not in trace.jobs():
        return S.S0_IDLE
    k = trace.offer(key)["k"]
    hired = sum(1 for r in trace if r.kind == "hire")
    paid = sum(1 for r in trace if r.kind == "payment")
    if hired == 0:
        return S.AWAITING_APPLIERS
    if paid >= k:
        return S.CONCLUSION
    return S.RELATIONSHIP


# -- monitor ---------------------------------------------------------------

@dataclass(frozen=True)
class ReportEntry:
    index: int
    event: EventKind
    job: str
    state_before: LifecycleState
    verdict: str
    state_after: LifecycleState

    @property
    def ok(self) -> bool:
        return self.verdict == "ok"

    def line(self) -> str:
        return json.dumps({
            "index": self.index, "event": self.event.value, "job": self.job,
            "state_before": self.state_before.value, "verdict": self.verdict,
            "state_after": self.state_after.value,
        }, sort_keys=True, separators=(",", ":"))


@dataclass
class ConformanceReport:
    entries: list[ReportEntry] = field(default_factory=list)
    final_states: dict[str, LifecycleState] = field(default_factory=dict)

    @property
    def conformant(self) -> bool:
        return all(e.ok for e in self.entries)

    @property
    def violations(self) -> list[ReportEntry]:
        return [e for e in self.entries if not e.ok]

    @property
    def final_state(self) -> LifecycleState:
        """State of the last job seen (S0 if the trace holds no job)."""
        if not self.final_states:
            return S.S0_IDLE
        return list(self.final_states.values())[-1]

    def dumps(self) -> str:
        return "\n".join([REPORT_HEADER, *(e.line() for e in self.entries)]) + "\n"


def monitor(trace: Iterable) -> ConformanceReport:
    """Replay successful trace events through :func:`transition`.

    Records whose kind has no lifecycle event (certification, transfers,
    registry records) and failed records are ignored; a rejected call never
    moved the chain.
    """
    report = ConformanceReport()
    positions: dict[str, list[LifecycleState]] = {}
    assigned: dict[str, dict[str, int]] = {}
    for index, record in enumerate(trace):
        event = TRACE_EVENTS.get(record.kind)
        if event is None or not record.ok:
            continue
        job = record.job
        slots = positions.get(job)
        slot = None
        if event is E.NEW_JOB_OFFER:
            if slots is None:
                k = int(record.deltas.get("k", 1))
                slots = positions[job] = [S.S0_IDLE] * k
                assigned[job] = {}
                before = S.S0_IDLE
                after = transition(before, event)
                if after:
                    slots[:] = [after] * k
                report.entries.append(ReportEntry(index, event, job, before,
                                                  "ok" if after else "violation",
                                                  after or before))
                report.final_states[job] = aggregate_state(slots)
                continue
        elif slots is not None:
            if event in (E.APPLICATION, E.HIRING):
                slot = next((i for i, s in enumerate(slots) if s is S.AWAITING_APPLIERS), None)
            else:
                slot = assigned[job].get(record.worker)
        before = slots[slot] if slot is not None else aggregate_state(slots)
        after = transition(before, event)
        if after and slot is not None:
            slots[slot] = after
            if event is E.HIRING:
                assigned[job][record.worker] = slot
            report.entries.append(ReportEntry(index, event, job, before, "ok", after))
        else:
            report.entries.append(ReportEntry(index, event, job, before, "violation", before))
        if slots is not None:
            report.final_states[job] = aggregate_state(slots)
    return report
