"""Seeded generator of adversarial call sequences against the contracts.

Each sequence deploys a few jobs, then interleaves random calls from every
party: honest and forged hires, workdays by outsiders, direct payment calls
from arbitrary accounts with arbitrary amounts, replays of old transactions
and random sealing.  Finally the employer finishes every hired worker's
workdays so each relationship runs to completion.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from employchain.contracts import (
    JobOffer, apply, deploy_job, hire, identification_code, open_chain, payment,
    query_relationship, record_workday,
)
from employchain.hashing import Address

EMPLOYERS = ["emp_a", "emp_b"]
WORKERS = ["w1", "w2", "w3"]
OUTSIDERS = ["mallory", "trudy"]


@dataclass
class Run:
    ledger: object
    jobs: list = field(default_factory=list)      # (JobRef, JobOffer)
    attempts: int = 0
    payment_attempts: int = 0


def _addr(name):
    return Address.from_seed(name)


def _code(ledger, ref, worker, rng):
    app = ledger.contracts.get(ref.application)
    created = app.created_height if app is not None else ledger.height + 1
    roll = rng.random()
    if roll < 0.7:
        return identification_code(ref.application, worker, created)
    if roll < 0.85:
        other = _addr(rng.choice(WORKERS))
        return identification_code(ref.application, other, created)
    return rng.randbytes(32)


def adversarial_run(seed: int, steps: int = 30) -> Run:
    rng = random.Random(seed)
    genesis = [(e, 10_000) for e in EMPLOYERS] + [(w, 0) for w in WORKERS] + [(o, 500) for o in OUTSIDERS]
    ledger = open_chain(genesis, employers=EMPLOYERS, workers=WORKERS)
    run = Run(ledger)
    everyone = EMPLOYERS + WORKERS + OUTSIDERS
    for _ in range(rng.randint(1, 2)):
        emp = rng.choice(EMPLOYERS)
        offer = JobOffer(_addr(emp), rng.randint(1, 2), rng.randint(1, 3), rng.randint(1, 8),
                         rng.randint(1, 20), certify=rng.random() < 0.7)
        receipt, ref = deploy_job(ledger, _addr(emp), offer)
        if receipt.accepted:
            run.jobs.append((ref, offer))
    ledger.seal_block()
    sent = []
    for _ in range(steps):
        ref, offer = rng.choice(run.jobs)
        action = rng.choice(["apply", "apply", "hire", "hire", "workday", "pay", "pay", "replay", "seal"])
        actor = _addr(rng.choice(everyone))
        worker = _addr(rng.choice(WORKERS if rng.random() < 0.8 else OUTSIDERS))
        run.attempts += 1
        if action == "apply":
            applicant = worker if rng.random() < 0.7 else actor
            r = apply(ledger, applicant, ref.application)
        elif action == "hire":
            caller = offer.employer if rng.random() < 0.6 else actor
            r = hire(ledger, caller, ref.relationship, worker, _code(ledger, ref, worker, rng))
        elif action == "workday":
            caller = offer.employer if rng.random() < 0.6 else actor
            r = record_workday(ledger, caller, ref.relationship, worker)
        elif action == "pay":
            run.payment_attempts += 1
            amount = offer.wage_per_worker if rng.random() < 0.5 else rng.randint(0, 500)
            r = payment(ledger, actor, ref.deposit, worker, amount)
        elif action == "replay" and sent:
            r = ledger.submit_transaction(rng.choice(sent))
        else:
            ledger.seal_block()
            continue
        if r.accepted:
            sent.append(ledger.pending[-1])
        if rng.random() < 0.3:
            ledger.seal_block()
    ledger.seal_block()
    # drive every hired worker to the end of their agreed workdays
    for ref, offer in run.jobs:
        for _ in range(offer.workdays + 1):
            view = query_relationship(ledger, ref.relationship)
            for w in sorted(view.hired):
                record_workday(ledger, offer.employer, ref.relationship, w)
            ledger.seal_block()
    return run
