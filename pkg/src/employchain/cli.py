"""Command line interface.

Every command prints a JSON report on stdout and exits 0 on success (valid,
conformant, converged), 1 when the check fails and 2 on malformed input.
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path

from .contracts import replay_chain
from .errors import EmploychainError
from .ledger import parse_chain, validate_chain_text
from .lifecycle import monitor
from .network import simulate
from .petrinet import build_farming_net, conformance, deadlocks, dump_net, reachability, to_dot
from .scenario import load_scenario, parse_scenario, run_scenario
from .trace import Trace, parse_trace

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


def bundled_scenarios() -> list[str]:
    root = resources.files("employchain") / "scenarios"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".scn"))


def _scenario(ref: str):
    path = Path(ref)
    if path.exists():
        return load_scenario(path)
    name = ref[:-4] if ref.endswith(".scn") else ref
    if name in bundled_scenarios():
        text = (resources.files("employchain") / "scenarios" / f"{name}.scn").read_text("utf-8")
        return parse_scenario(text, name=name)
    raise FileNotFoundError(f"no scenario file or bundled scenario named {ref!r}")


def _emit(report: dict) -> None:
    json.dump(report, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


def cmd_run(args) -> int:
    result = run_scenario(_scenario(args.scenario))
    report = result.summary()
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "chain.des").write_text(result.ledger.export(), encoding="utf-8")
        (out / "trace.des").write_text(result.trace.dumps(), encoding="utf-8")
        (out / "conformance.des").write_text(result.report.dumps(), encoding="utf-8")
        (out / "log.txt").write_text("\n".join(result.log) + "\n", encoding="utf-8")
        files = ["chain.des", "trace.des", "conformance.des", "log.txt", "report.json"]
        if not args.no_plot:
            from .plotting import plot_history
            plot_history(result.history, out / "balances.png", title=result.scenario.name)
            files.append("balances.png")
        report["files"] = files
        (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n",
                                         encoding="utf-8")
    _emit(report)
    return EXIT_OK if result.ok else EXIT_FAIL


def cmd_verify(args) -> int:
    text = Path(args.chain).read_text(encoding="utf-8")
    validation = validate_chain_text(text)
    report = {"chain": args.chain, **validation.as_dict(), "replay_mismatch": None}
    if validation.valid:
        _, mismatch = replay_chain(parse_chain(text))
        report["replay_mismatch"] = mismatch
    _emit(report)
    return EXIT_OK if validation.valid and report["replay_mismatch"] is None else EXIT_FAIL


def cmd_reachability(args) -> int:
    net, m0 = build_farming_net(n=args.n, k=args.k)
    graph = reachability(net, m0, ceiling=args.ceiling)
    dead = deadlocks(graph, net)
    report = {
        "n": args.n, "k": args.k,
        "nodes": len(graph.nodes), "edges": len(graph.edges),
        "initial": net.as_dict(graph.initial),
        "deadlocks": [net.as_dict(m) for m in graph.nodes if m in dead],
        "markings": [net.as_dict(m) for m in graph.nodes],
    }
    if args.dot:
        Path(args.dot).write_text(to_dot(net, graph), encoding="utf-8")
        report["dot"] = args.dot
    if args.net:
        Path(args.net).write_text(dump_net(net, m0), encoding="utf-8")
        report["net"] = args.net
    if args.plot:
        from .plotting import plot_reachability
        plot_reachability(net, graph, args.plot)
        report["plot"] = args.plot
    _emit(report)
    return EXIT_OK


def cmd_conformance(args) -> int:
    trace = parse_trace(Path(args.trace).read_text(encoding="utf-8"))
    fsm = monitor(trace)
    net, m0 = build_farming_net(n=args.n, k=args.k)
    jobs = {}
    for job in trace.jobs() or [""]:
        result = conformance(trace.for_job(job) if job else Trace(trace), net, m0)
        jobs[job or "-"] = result.as_dict()
    net_ok = all(j["conformant"] for j in jobs.values())
    report = {
        "trace": args.trace, "n": args.n, "k": args.k,
        "fsm_conformant": fsm.conformant,
        "fsm_violations": [json.loads(e.line()) for e in fsm.violations],
        "final_states": {job: str(s) for job, s in fsm.final_states.items()},
        "net": jobs, "net_conformant": net_ok,
    }
    _emit(report)
    return EXIT_OK if fsm.conformant and net_ok else EXIT_FAIL


def _delay(text: str) -> tuple[int, int, int]:
    try:
        round_, node, steps = (int(x) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError("delay must be ROUND:NODE:STEPS") from None
    return round_, node, steps


def cmd_net_sim(args) -> int:
    sc = _scenario(args.scenario)
    seed = sc.seed if args.seed is None else args.seed
    result = run_scenario(sc)
    if any(node >= args.nodes or node < 0 for _, node, _ in args.delay):
        raise ValueError("delay refers to a node outside the network")
    sim = simulate(result.chain, args.nodes, seed, args.delay)
    report = {"scenario": sc.name, "reference_head": result.ledger.head_hash.hex(), **sim.as_dict()}
    _emit(report)
    return EXIT_OK if sim.converged and sim.matches_reference else EXIT_FAIL


def cmd_scenarios(args) -> int:
    _emit({"scenarios": bundled_scenarios()})
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="employchain",
                                     description="Decentralized employment ledger toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="execute a scenario and report")
    p.add_argument("scenario", help="scenario file or bundled scenario name")
    p.add_argument("--out", help="directory for chain, trace, report and figure")
    p.add_argument("--no-plot", action="store_true", help="skip the balance figure")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("verify", help="validate and replay a chain file")
    p.add_argument("chain")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("reachability", help="reachability graph of the farming net")
    p.add_argument("--n", type=int, default=2, help="workdays per position")
    p.add_argument("--k", type=int, default=1, help="positions / applicants")
    p.add_argument("--ceiling", type=int, default=10**6)
    p.add_argument("--dot", help="write the graph in DOT format")
    p.add_argument("--net", help="write the net definition file")
    p.add_argument("--plot", help="render the graph to an image file")
    p.set_defaults(func=cmd_reachability)

    p = sub.add_parser("conformance", help="check a trace file against the FSM and the net")
    p.add_argument("trace")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.set_defaults(func=cmd_conformance)

    p = sub.add_parser("net-sim", help="replicate a scenario's chain across simulated nodes")
    p.add_argument("--nodes", type=int, default=3)
    p.add_argument("--seed", type=int, help="delivery schedule seed (default: scenario seed)")
    p.add_argument("--scenario", required=True)
    p.add_argument("--delay", type=_delay, action="append", default=[],
                   metavar="ROUND:NODE:STEPS", help="hold deliveries to NODE after ROUND")
    p.set_defaults(func=cmd_net_sim)

    p = sub.add_parser("scenarios", help="list bundled scenarios")
    p.set_defaults(func=cmd_scenarios)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (EmploychainError, OSError, ValueError) as exc:
        _emit({"error": str(exc), "kind": type(exc).__name__})
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
