"""Place/transition nets, reachability graphs and trace-to-firing conformance.

Markings are plain tuples of token counts aligned with ``PetriNet.places``.

The farming employment net built by :func:`build_farming_net` has places
P1 (new job) .. P7 (salable goods) and transitions T1 (new job offer),
T2 (hiring), T3 (workday), T4 (certification).  For ``n`` workdays per
position and ``k`` positions its arcs are::

    T1: P1(1)                     -> P2(n*k) + P3(n*k) + P5(1)
    T2: P4(1) + P2(1)             -> P2(1) + P5(n)
    T3: P3(1) + P5(1)             -> P6(1)
    T4: P2(n*k) + P5(1) + P6(n*k) -> P7(1) + P4(k)

with initial marking P1 = 1, P4 = k.  P5 holds workday capacity: hiring
grants ``n`` units, each workday spends one, and T4 spends the unit seeded
by T1.  T2 only reads P2 (wages must be on deposit before anyone is hired),
so once T4 has drained the deposit the returned applicants cannot be hired
again and the final marking P4 = k, P7 = 1 is dead.  The seeded unit lets
one workday mature concurrently with the first hire, which gives the
n = 2, k = 1 graph its seven markings.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .errors import BoundednessError, FiringError, NetError, ScenarioError, ShapeError

Marking = tuple
NET_HEADER = "DES-NET 1"
DEFAULT_CEILING = 10**6

# trace kind -> farming transition
TRACE_TRANSITIONS = {
    "deploy_job": "T1",
    "hire": "T2",
    "record_workday": "T3",
    "certification": "T4",
}


@dataclass(frozen=True)
class PetriNet:
    places: tuple[str, ...]
    transitions: tuple[str, ...]
    input_arcs: tuple[tuple[str, str, int], ...] = ()
    output_arcs: tuple[tuple[str, str, int], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "places", tuple(self.places))
        object.__setattr__(self, "transitions", tuple(self.transitions))
        object.__setattr__(self, "input_arcs", tuple(tuple(a) for a in self.input_arcs))
        object.__setattr__(self, "output_arcs", tuple(tuple(a) for a in self.output_arcs))
        if len(set(self.places)) != len(self.places):
            raise NetError("duplicate place name")
        if len(set(self.transitions)) != len(self.transitions):
            raise NetError("duplicate transition name")
        if set(self.places) & set(self.transitions):
            raise NetError("places and transitions must have distinct names")
        pidx = {p: i for i, p in enumerate(self.places)}
        tset = set(self.transitions)
        pre = {t: [] for t in self.transitions}
        post = {t: [] for t in self.transitions}
        for arcs, table in ((self.input_arcs, pre), (self.output_arcs, post)):
            seen = set()
            for a in arcs:
                if len(a) != 3:
                    raise NetError(f"arc must be (place, transition, weight): {a!r}")
                p, t, w = a
                if p not in pidx or t not in tset:
                    raise NetError(f"arc refers to unknown node: {a!r}")
                if type(w) is not int or w < 1:
                    raise NetError(f"arc weight must be an integer >= 1: {a!r}")
                if (p, t) in seen:
                    raise NetError(f"duplicate arc {p}-{t}")
                seen.add((p, t))
                table[t].append((pidx[p], w))
        # (place index, weight) lists in place order, per transition
        object.__setattr__(self, "_pre", {t: tuple(sorted(v)) for t, v in pre.items()})
        object.__setattr__(self, "_post", {t: tuple(sorted(v)) for t, v in post.items()})

    def marking(self, tokens: Mapping[str, int] | None = None) -> Marking:
        tokens = dict(tokens or {})
        unknown = set(tokens) - set(self.places)
        if unknown:
            raise ShapeError(f"unknown places {sorted(unknown)}")
        return tuple(int(tokens.get(p, 0)) for p in self.places)

    def as_dict(self, m: Marking) -> dict[str, int]:
        """Non-zero entries of a marking."""
        return {p: v for p, v in zip(self.places, m) if v}

    def label(self, m: Marking) -> str:
        return " ".join(f"{p}:{v}" for p, v in self.as_dict(m).items()) or "0"

    def weight(self, source: str, target: str) -> int:
        """Weight of the arc source -> target, 0 if absent."""
        for p, t, w in self.input_arcs:
            if (p, t) == (source, target):
                return w
        for p, t, w in self.output_arcs:
            if (t, p) == (source, target):
                return w
        return 0


def _check_shape(net: PetriNet, m: Sequence[int]) -> None:
    if len(m) != len(net.places):
        raise ShapeError(f"marking has {len(m)} entries, net has {len(net.places)} places")
    if any(v < 0 for v in m):
        raise ShapeError("marking has negative entries")


def _enabled(net: PetriNet, m: Sequence[int], t: str) -> bool:
    return all(m[i] >= w for i, w in net._pre[t])


def enabled(net: PetriNet, m: Sequence[int]) -> frozenset[str]:
    _check_shape(net, m)
    return frozenset(t for t in net.transitions if _enabled(net, m, t))


def fire(net: PetriNet, m: Sequence[int], t: str) -> Marking:
    _check_shape(net, m)
    if t not in net._pre:
        raise FiringError(f"unknown transition {t!r}")
    if not _enabled(net, m, t):
        raise FiringError(f"{t} is not enabled at {net.label(tuple(m))}")
    out = list(m)
    for i, w in net._pre[t]:
        out[i] -= w
    for i, w in net._post[t]:
        out[i] += w
    return tuple(out)


@dataclass
class ReachabilityGraph:
    initial: Marking
    nodes: list[Marking] = field(default_factory=list)
    edges: list[tuple[Marking, str, Marking]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.nodes)

    def successors(self, m: Marking) -> list[tuple[str, Marking]]:
        return [(t, dst) for src, t, dst in self.edges if src == m]


def reachability(net: PetriNet, m0: Sequence[int], ceiling: int = DEFAULT_CEILING) -> ReachabilityGraph:
    """Breadth-first closure of ``fire`` from ``m0``.

    Nodes are listed in discovery order (transitions tried in net order);
    raises :class:`BoundednessError` once more than ``ceiling`` nodes exist.
    """
    m0 = tuple(m0)
    _check_shape(net, m0)
    graph = ReachabilityGraph(m0, [m0])
    seen = {m0}
    queue = deque([m0])
    while queue:
        m = queue.popleft()
        for t in net.transitions:
            if not _enabled(net, m, t):
                continue
            nxt = fire(net, m, t)
            graph.edges.append((m, t, nxt))
            if nxt not in seen:
                if len(seen) >= ceiling:
                    raise BoundednessError(f"more than {ceiling} reachable markings")
                seen.add(nxt)
                graph.nodes.append(nxt)
                queue.append(nxt)
    return graph


def deadlocks(graph: ReachabilityGraph, net: PetriNet | None = None) -> set[Marking]:
    """Nodes without outgoing edges (with ``net``: without enabled transitions)."""
    if net is not None:
        return {m for m in graph.nodes if not enabled(net, m)}
    sources = {src for src, _, _ in graph.edges}
    return {m for m in graph.nodes if m not in sources}


# -- farming employment net --------------------------------------------------

@dataclass(frozen=True)
class FarmingNetParams:
    n: int = 2
    k: int = 1

    def __post_init__(self):
        if type(self.n) is not int or self.n < 1 or type(self.k) is not int or self.k < 1:
            raise NetError("farming net needs n >= 1 and k >= 1")


FARMING_PLACES = ("P1", "P2", "P3", "P4", "P5", "P6", "P7")
FARMING_TRANSITIONS = ("T1", "T2", "T3", "T4")


def build_farming_net(params: FarmingNetParams | None = None, *, n: int | None = None,
                      k: int | None = None) -> tuple[PetriNet, Marking]:
    if params is None:
        params = FarmingNetParams(n if n is not None else 2, k if k is not None else 1)
    nk = params.n * params.k
    net = PetriNet(
        FARMING_PLACES,
        FARMING_TRANSITIONS,
        input_arcs=[
            ("P1", "T1", 1),
            ("P4", "T2", 1), ("P2", "T2", 1),
            ("P3", "T3", 1), ("P5", "T3", 1),
            ("P2", "T4", nk), ("P5", "T4", 1), ("P6", "T4", nk),
        ],
        output_arcs=[
            ("P2", "T1", nk), ("P3", "T1", nk), ("P5", "T1", 1),
            ("P2", "T2", 1), ("P5", "T2", params.n),
            ("P6", "T3", 1),
            ("P7", "T4", 1), ("P4", "T4", params.k),
        ],
    )
    return net, net.marking({"P1": 1, "P4": params.k})


# -- trace conformance -------------------------------------------------------

@dataclass
class FiringSequence:
    transitions: list[str] = field(default_factory=list)
    markings: list[Marking] = field(default_factory=list)
    notices: list[str] = field(default_factory=list)
    conformant = True

    def as_dict(self) -> dict:
        return {"conformant": True, "sequence": list(self.transitions), "notices": list(self.notices)}


@dataclass
class Violation:
    index: int
    kind: str
    transition: str
    marking: Marking
    prefix: list[str] = field(default_factory=list)
    reason: str = ""
    notices: list[str] = field(default_factory=list)
    conformant = False

    def as_dict(self) -> dict:
        return {"conformant": False, "index": self.index, "kind": self.kind,
                "transition": self.transition, "marking": list(self.marking),
                "prefix": list(self.prefix), "reason": self.reason}


def conformance(trace: Iterable, net: PetriNet, m0: Sequence[int],
                mapping: Mapping[str, str] = TRACE_TRANSITIONS) -> FiringSequence | Violation:
    """Map successful trace records to transitions and fire them in order.

    Failed records are ignored.  Records whose kind has no transition are
    skipped and listed in ``notices``.
    """
    m = tuple(m0)
    _check_shape(net, m)
    seq = FiringSequence(markings=[m])
    for index, record in enumerate(trace):
        if not record.ok:
            continue
        t = mapping.get(record.kind)
        if t is None:
            seq.notices.append(f"{index}: {record.kind} has no transition")
            continue
        if not _enabled(net, m, t):
            short = [net.places[i] for i, w in net._pre[t] if m[i] < w]
            return Violation(index, record.kind, t, m, list(seq.transitions),
                             f"{t} not enabled; insufficient tokens in {', '.join(short)}",
                             seq.notices)
        m = fire(net, m, t)
        seq.transitions.append(t)
        seq.markings.append(m)
    return seq


# -- net files and DOT --------------------------------------------------------

def dump_net(net: PetriNet, m0: Sequence[int]) -> str:
    lines = [NET_HEADER]
    lines += [f"place {p} {v}" for p, v in zip(net.places, m0)]
    lines += [f"transition {t}" for t in net.transitions]
    lines += [f"arc {p} {t} {w}" for p, t, w in net.input_arcs]
    lines += [f"arc {t} {p} {w}" for p, t, w in net.output_arcs]
    return "\n".join(lines) + "\n"


def load_net(text: str) -> tuple[PetriNet, Marking]:
    """Parse the net file format written by :func:`dump_net`.

    Lines: ``place NAME TOKENS``, ``transition NAME``, ``arc SRC DST WEIGHT``;
    blank lines and ``#`` comments are ignored.
    """
    places, tokens, transitions, arcs = [], [], [], []
    lines = text.splitlines()
    if not lines or lines[0].strip() != NET_HEADER:
        raise ScenarioError(f"missing {NET_HEADER!r} header", 1)
    for lineno, raw in enumerate(lines[1:], start=2):
        parts = raw.split("#", 1)[0].split()
        if not parts:
            continue
        try:
            if parts[0] == "place" and len(parts) == 3:
                places.append(parts[1])
                tokens.append(int(parts[2]))
            elif parts[0] == "transition" and len(parts) == 2:
                transitions.append(parts[1])
            elif parts[0] == "arc" and len(parts) == 4:
                arcs.append((parts[1], parts[2], int(parts[3])))
            else:
                raise ValueError(f"unrecognised line {raw!r}")
        except ValueError as exc:
            raise ScenarioError(str(exc), lineno) from None
    pset = set(places)
    inputs = [(s, d, w) for s, d, w in arcs if s in pset]
    outputs = [(d, s, w) for s, d, w in arcs if s not in pset]
    net = PetriNet(places, transitions, inputs, outputs)
    return net, tuple(tokens)


def to_dot(net: PetriNet, graph: ReachabilityGraph) -> str:
    """Graphviz rendering of a reachability graph; node label is the marking."""
    index = {m: i for i, m in enumerate(graph.nodes)}
    dead = deadlocks(graph)
    lines = ["digraph reachability {", "  rankdir=TB;"]
    for m, i in index.items():
        shape = "doublecircle" if m in dead else ("box" if m == graph.initial else "ellipse")
        lines.append(f'  M{i} [label="M{i}\\n{net.label(m)}", shape={shape}];')
    for src, t, dst in graph.edges:
        lines.append(f'  M{index[src]} -> M{index[dst]} [label="{t}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
