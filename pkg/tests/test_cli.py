import json

from employchain.cli import bundled_scenarios, main


def run(capsys, *argv):
    code = main(list(argv))
    return code, json.loads(capsys.readouterr().out)


def test_scenarios_listed(capsys):
    code, out = run(capsys, "scenarios")
    assert code == 0 and out["scenarios"] == bundled_scenarios()
    assert {"happy_n2", "fraud_direct_payment", "empty"} <= set(out["scenarios"])


def test_run_writes_outputs(capsys, tmp_path):
    code, out = run(capsys, "run", "happy_n2", "--out", str(tmp_path))
    assert code == 0 and out["ok"]
    for name in ("chain.des", "trace.des", "conformance.des", "report.json", "balances.png", "log.txt"):
        assert (tmp_path / name).exists(), name
    assert (tmp_path / "balances.png").read_bytes()[:4] == b"\x89PNG"
    assert json.loads((tmp_path / "report.json").read_text()) == out


def test_verify_and_tamper(capsys, tmp_path):
    run(capsys, "run", "happy_n2", "--out", str(tmp_path), "--no-plot")
    chain = tmp_path / "chain.des"
    code, out = run(capsys, "verify", str(chain))
    assert code == 0 and out["valid"] and out["replay_mismatch"] is None
    text = chain.read_text()
    chain.write_text(text.replace('"amount":160', '"amount":161', 1))
    code, out = run(capsys, "verify", str(chain))
    assert code == 1 and not out["valid"]


def test_conformance_command(capsys, tmp_path):
    run(capsys, "run", "happy_n2", "--out", str(tmp_path), "--no-plot")
    code, out = run(capsys, "conformance", str(tmp_path / "trace.des"), "--n", "2", "--k", "1")
    assert code == 0 and out["fsm_conformant"] and out["net_conformant"]
    # the same trace does not fit a net with three workdays: T4 never enables
    code, out = run(capsys, "conformance", str(tmp_path / "trace.des"), "--n", "3", "--k", "1")
    assert code == 1 and not out["net_conformant"]


def test_reachability_command(capsys, tmp_path):
    dot, png, netf = tmp_path / "g.dot", tmp_path / "g.png", tmp_path / "farm.net"
    code, out = run(capsys, "reachability", "--n", "2", "--k", "1", "--dot", str(dot),
                    "--plot", str(png), "--net", str(netf))
    assert code == 0 and out["nodes"] == 7 and out["deadlocks"] == [{"P4": 1, "P7": 1}]
    assert dot.read_text().startswith("digraph") and png.exists()
    assert netf.read_text().startswith("DES-NET 1")


def test_net_sim_command(capsys):
    code, out = run(capsys, "net-sim", "--nodes", "3", "--seed", "4", "--scenario", "happy_n2",
                    "--delay", "2:1:15")
    assert code == 0 and out["converged"] and out["matches_reference"]
    assert len(set(out["head_hashes"])) == 1


def test_bad_input_exit_code(capsys, tmp_path):
    bad = tmp_path / "bad.scn"
    bad.write_text("DES-SCENARIO 1\nfly away\n")
    code, out = run(capsys, "run", str(bad))
    assert code == 2 and "line 2" in out["error"]
    code, out = run(capsys, "run", "no-such-scenario")
    assert code == 2
