"""Acceptance criteria, one test per criterion.

Each test prints a single ``ACCEPTANCE C<n> PASS|FAIL`` line; the lines are
repeated in the pytest terminal summary.  Run alone with::

    pytest tests/test_acceptance.py -v -s
"""

from __future__ import annotations

import itertools
import time
from importlib import resources

import pytest

from employchain.contracts import replay_chain, total_escrow
from employchain.hashing import Address
from employchain.ledger import validate_chain_text
from employchain.lifecycle import EDGES, EventKind, LifecycleState, derive_state, transition
from employchain.network import simulate
from employchain.petrinet import build_farming_net, conformance, deadlocks, reachability
from employchain.scenario import parse_scenario, run_scenario
from employchain.trace import trace_from_blocks
from adversary import WORKERS, adversarial_run
from oracles import enumerate_states, lifecycle_edges

RESULTS: dict[str, tuple[bool, str]] = {}
BUNDLED = resources.files("employchain") / "scenarios"


def corpus():
    return sorted(p.name[:-4] for p in BUNDLED.iterdir() if p.name.endswith(".scn"))


def bundled(name):
    return parse_scenario((BUNDLED / f"{name}.scn").read_text("utf-8"), name=name)


def verdict(criterion: str, ok: bool, detail: str) -> None:
    line = f"ACCEPTANCE {criterion} {'PASS' if ok else 'FAIL'}: {detail}"
    RESULTS[criterion] = (ok, line)
    print(line)
    assert ok, line


def test_c1_seven_marking_reachability_graph():
    start = time.perf_counter()
    net, m0 = build_farming_net(n=2, k=1)
    graph = reachability(net, m0)
    dead = deadlocks(graph, net)
    elapsed = time.perf_counter() - start
    final = net.marking({"P4": 1, "P7": 1})
    ok = len(graph.nodes) == 7 and dead == {final} and elapsed < 1.0
    verdict("C1", ok, f"{len(graph.nodes)} markings, deadlocks {[net.as_dict(m) for m in dead]}, "
                      f"{elapsed * 1000:.1f} ms")


def test_c2_oracle_equivalence():
    start = time.perf_counter()
    mismatches = []
    for n, k in itertools.product(range(1, 11), range(1, 4)):
        net, m0 = build_farming_net(n=n, k=k)
        graph = reachability(net, m0)
        states, dead = enumerate_states(n, k)
        if set(graph.nodes) != states or len(graph.nodes) != len(states):
            mismatches.append(f"set n={n},k={k}")
        if deadlocks(graph, net) != dead:
            mismatches.append(f"deadlocks n={n},k={k}")
        if k == 1 and len(graph.nodes) != n + 5:
            mismatches.append(f"count n={n}: {len(graph.nodes)} != {n + 5}")
    elapsed = time.perf_counter() - start
    ok = not mismatches and elapsed < 30.0
    verdict("C2", ok, f"30 (n,k) pairs, {len(mismatches)} mismatches {mismatches[:3]}, {elapsed:.2f} s")


def test_c3_happy_path():
    sc = bundled("happy_n2")
    result = run_scenario(sc)
    worker = Address.from_seed("picker")
    before = result.history[0].balances["picker"]
    delta = result.ledger.balance(worker) - before
    ref = result.jobs["harvest"]
    escrow = total_escrow(result.ledger)
    certs = [r for r in result.trace if r.kind == "certification" and r.ok]
    state = derive_state(result.ledger, ref)
    net, m0 = build_farming_net(n=2, k=1)
    seq = conformance(result.trace.for_job(ref.key), net, m0)
    fired = getattr(seq, "transitions", None)
    offer = sc.steps[0].options
    ok = (offer == {"k": "1", "n": "2", "hours": "8", "wage": "10", "desc": "tomato harvest"}
          and delta == 160 and escrow == 0 and len(certs) == 1
          and state is LifecycleState.CONCLUSION and seq.conformant
          and fired == ["T1", "T2", "T3", "T3", "T4"])
    verdict("C3", ok, f"worker +{delta}, escrow {escrow}, {len(certs)} certification(s), "
                      f"state {state}, firing {fired}")


def test_c4_sole_caller_security():
    runs = 1000
    foreign_payments = 0
    attempts = 0
    wrong_credit = []
    relationships = 0
    for seed in range(runs):
        run = adversarial_run(seed)
        attempts += run.payment_attempts
        ledger = run.ledger
        trace = trace_from_blocks(ledger.blocks)
        owed = {w: 0 for w in WORKERS}
        for ref, offer in run.jobs:
            paid = [r for r in trace if r.kind == "payment" and r.ok and r.target == ref.deposit.hex]
            foreign_payments += sum(1 for r in paid if r.deltas["caller"] != ref.relationship.hex)
            hired = {r.worker for r in trace if r.kind == "hire" and r.ok and r.job == ref.key}
            relationships += len(hired)
            for w in hired:
                credits = [r.deltas["amount"] for r in paid if r.worker == w]
                if credits != [offer.agreed_hours * offer.time_wage]:
                    wrong_credit.append((seed, w, credits))
            if {r.worker for r in paid} - hired:
                wrong_credit.append((seed, "unhired payee", sorted({r.worker for r in paid} - hired)))
            for w in hired:
                name = next(n for n in WORKERS if Address.from_seed(n).hex == w)
                owed[name] += offer.agreed_hours * offer.time_wage
        for name, amount in owed.items():
            if ledger.balance(Address.from_seed(name)) != amount:
                wrong_credit.append((seed, name, "balance"))
    ok = foreign_payments == 0 and not wrong_credit and attempts > 0 and relationships > 0
    verdict("C4", ok, f"{runs} sequences, {attempts} direct payment attempts, "
                      f"{relationships} relationships, {foreign_payments} foreign payments, "
                      f"{len(wrong_credit)} credit errors")


def test_c5_conservation_over_corpus():
    broken = []
    checked = 0
    for name in corpus():
        result = run_scenario(bundled(name))
        totals = []

        def on_block(ledger, block):
            users = sum(acc.balance for acc in ledger.accounts.values() if not acc.is_contract)
            totals.append(users + total_escrow(ledger))

        _, mismatch = replay_chain(result.chain, on_block)
        checked += len(totals)
        if mismatch is not None or len(set(totals)) != 1 or not result.conserved:
            broken.append(name)
    verdict("C5", not broken, f"{len(corpus())} scenarios, {checked} heights checked, broken: {broken}")


def test_c6_single_byte_mutation_integrity():
    result = run_scenario(bundled("twenty_blocks"))
    text = result.ledger.export()
    assert len(result.chain) == 20
    header, *lines = text.split("\n")
    lines = lines[:-1]  # trailing newline
    offsets = []
    pos = len(header) + 1
    for h, line in enumerate(lines):
        offsets.append((h, pos, pos + len(line) + 1))  # block bytes include the line's newline
        pos += len(line) + 1
    raw = text.encode("ascii")
    missed = []
    tested = 0
    for h, lo, hi in offsets:
        for i in range(lo, hi):
            b = raw[i]
            new = b"x" if b != ord("x") else b"y"
            mutated = raw[:i] + new + raw[i + 1:]
            report = validate_chain_text(mutated.decode("ascii"))
            tested += 1
            if report.valid or report.height != h:
                missed.append((h, i - lo, report.height))
    verdict("C6", not missed, f"{tested} byte positions over 20 blocks, {len(missed)} misreported")


def test_c7_determinism_and_convergence():
    differing = []
    for name in corpus():
        a, b = run_scenario(bundled(name)), run_scenario(bundled(name))
        if a.trace.dumps() != b.trace.dumps() or a.ledger.head_hash != b.ledger.head_hash \
                or a.ledger.export() != b.ledger.export():
            differing.append(name)
    blocks = run_scenario(bundled("multi_worker_k3")).chain
    diverged = []
    for seed in range(10):
        report = simulate(blocks, 3, seed, delays=[(seed % 5, seed % 3, 3 + seed)])
        again = simulate(blocks, 3, seed, delays=[(seed % 5, seed % 3, 3 + seed)])
        if not (report.converged and report.matches_reference) or report != again:
            diverged.append(seed)
    ok = not differing and not diverged
    verdict("C7", ok, f"{len(corpus())} scenarios replayed twice ({len(differing)} differ), "
                      f"10 seeds x 3 nodes ({len(diverged)} diverged)")


def test_c8_fsm_totality():
    accepted = set()
    rejected = 0
    for state, event in itertools.product(LifecycleState, EventKind):
        nxt = transition(state, event)
        if nxt:
            accepted.add((state.value, event.value, nxt.value))
        else:
            rejected += 1
    ok = accepted == lifecycle_edges() and len(accepted) == 5 and rejected == 15 and len(EDGES) == 5
    verdict("C8", ok, f"20 pairs, {len(accepted)} accepted, {rejected} rejected")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v", "-s"]))
