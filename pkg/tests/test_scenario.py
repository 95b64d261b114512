from importlib import resources

import pytest

from employchain.errors import ScenarioError
from employchain.lifecycle import LifecycleState
from employchain.scenario import SCENARIO_HEADER, load_scenario, parse_scenario, run_scenario, tamper_chain
from employchain.ledger import validate_chain_text

BUNDLED = resources.files("employchain") / "scenarios"


def bundled(name):
    return parse_scenario((BUNDLED / f"{name}.scn").read_text("utf-8"), name=name)


def corpus():
    return sorted(p.name[:-4] for p in BUNDLED.iterdir() if p.name.endswith(".scn"))


@pytest.mark.parametrize("name", corpus())
def test_bundled_scenarios_pass(name):
    result = run_scenario(bundled(name))
    assert result.ok, result.failures
    assert result.validation.valid and result.conserved and result.report.conformant


def test_happy_path_figures():
    result = run_scenario(bundled("happy_n2"))
    s = result.summary()
    assert s["balances"] == {"farm_owner": 840, "picker": 160} and s["escrow"] == 0
    job = s["jobs"]["harvest"]
    assert job["state"] == "conclusion" and job["certified"]
    assert job["net"]["sequence"] == ["T1", "T2", "T3", "T3", "T4"]


def test_fraud_scenario_keeps_escrow():
    result = run_scenario(bundled("fraud_direct_payment"))
    pays = [r for r in result.trace if r.kind == "payment"]
    assert [r.ok for r in pays] == [False, False, False, True]
    assert all(r.outcome.startswith("authorization") for r in pays if not r.ok)
    assert result.nets[result.jobs["harvest"].key].conformant


def test_generic_variant_has_no_certification():
    result = run_scenario(bundled("generic_no_cert"))
    ref = result.jobs["filing"]
    assert result.nets[ref.key].transitions == ["T1", "T2", "T3", "T3", "T3"]
    assert not any(r.kind == "certification" for r in result.trace)


def test_empty_scenario():
    result = run_scenario(bundled("empty"))
    assert result.trace.jobs() == [] and result.report.final_state is LifecycleState.S0_IDLE
    assert result.ok


def test_run_is_deterministic():
    a, b = run_scenario(bundled("multi_worker_k3")), run_scenario(bundled("multi_worker_k3"))
    assert a.trace.dumps() == b.trace.dumps() and a.ledger.head_hash == b.ledger.head_hash


def test_unmet_expectation_fails_run():
    sc = parse_scenario(f"""{SCENARIO_HEADER}
genesis e 100
genesis w 0
employer e
worker w
deploy e j k=1 n=1 hours=1 wage=1
expect authority
""")
    result = run_scenario(sc)
    assert not result.ok and "expected authority" in result.failures[0]


def test_query_state_mismatch_fails_run():
    sc = parse_scenario(f"""{SCENARIO_HEADER}
genesis e 100
employer e
deploy e j k=1 n=1 hours=1 wage=1
seal
query j state=conclusion
""")
    assert not run_scenario(sc).ok


@pytest.mark.parametrize("body,line", [
    ("frobnicate", 2),
    ("genesis a 1\ngenesis a 2", 3),
    ("apply ghost job", 2),
    ("genesis a 1\napply a job", 3),
    ("genesis a x", 2),
    ("genesis a 1\ndeploy a j k=0", 3),
    ("genesis a 1\ndeploy a j colour=red", 3),
    ("genesis a 1\ndeploy a j certify=maybe", 3),
    ("account a\nemployer a", 3),
    ("seal extra", 2),
    ("tamper 1 smash", 2),
    ('deploy "unterminated', 2),
])
def test_parse_errors_carry_line_numbers(body, line):
    with pytest.raises(ScenarioError) as err:
        parse_scenario(SCENARIO_HEADER + "\n" + body + "\n")
    assert err.value.line == line
    assert str(err.value).startswith(f"line {line}:")


def test_missing_header():
    with pytest.raises(ScenarioError):
        parse_scenario("seal\n")


def test_expect_needs_preceding_action():
    sc = parse_scenario(SCENARIO_HEADER + "\nexpect ok\n")
    with pytest.raises(ScenarioError):
        run_scenario(sc)


@pytest.mark.parametrize("mode", ["drop", "amount", "byte"])
def test_tamper_chain_modes_are_detected(mode):
    result = run_scenario(bundled("happy_n2"))
    text = result.ledger.export()
    for h in range(result.ledger.height + 1):
        report = validate_chain_text(tamper_chain(text, h, mode))
        assert not report.valid and report.height == h


def test_load_scenario_from_file(tmp_path):
    p = tmp_path / "mine.scn"
    p.write_text((BUNDLED / "happy_n2.scn").read_text("utf-8"))
    sc = load_scenario(p)
    assert sc.name == "mine" and sc.seed == 1 and sc.employers == ["farm_owner"]
