"""Deterministic simulation of ledger replication across peer nodes.

No sockets and no threads: every message carries a delivery step drawn from
a seeded ``random.Random``, and :func:`step` delivers the messages due at the
current step in (due step, send sequence) order.  Processing order is thus a
pure function of the seed and the step index.

Protocol:

* clients broadcast transactions, each tagged with a global sequence number;
* a seal marker ``(height, upto)`` tells every node that block ``height``
  holds the transactions with sequence numbers below ``upto``;
* node ``height % N`` is the sealer of that block: once it holds the marker,
  every transaction in range and block ``height - 1``, it executes the batch
  and broadcasts the sealed block;
* the other replicas re-execute a received block on their own state and
  accept it only if the recomputed hash matches.
"""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .contracts import execute_block, fresh_ledger
from .hashing import ZERO_HASH
from .ledger import Block, Ledger, Transaction

DEFAULT_MAX_DELAY = 4


@dataclass
class Node:
    index: int
    ledger: Ledger = field(default_factory=fresh_ledger)
    txs: dict[int, Transaction] = field(default_factory=dict)
    markers: dict[int, int] = field(default_factory=dict)
    blocks: dict[int, Block] = field(default_factory=dict)
    rejected: list[int] = field(default_factory=list)

    @property
    def height(self) -> int:
        return self.ledger.height

    @property
    def head_hash(self) -> bytes:
        return self.ledger.head_hash if self.ledger.blocks else ZERO_HASH


@dataclass
class Network:
    nodes: list[Node]
    seed: int
    max_delay: int = DEFAULT_MAX_DELAY
    step_index: int = 0
    queue: list = field(default_factory=list)
    holds: dict[int, int] = field(default_factory=dict)
    next_seq: int = 0
    next_height: int = 0
    sent: int = 0
    delivered: int = 0

    def __post_init__(self):
        self.rng = random.Random(self.seed)

    @property
    def size(self) -> int:
        return len(self.nodes)

    @property
    def quiescent(self) -> bool:
        return not self.queue

    def _send(self, dest: int, message: tuple) -> None:
        due = self.step_index + 1 + self.rng.randrange(self.max_delay)
        heapq.heappush(self.queue, (due, self.sent, dest, message))
        self.sent += 1

    def broadcast(self, message: tuple, exclude: int | None = None) -> None:
        for node in self.nodes:
            if node.index != exclude:
                self._send(node.index, message)

    def submit(self, tx: Transaction) -> int:
        seq = self.next_seq
        self.next_seq += 1
        self.broadcast(("tx", seq, tx))
        return seq

    def seal(self) -> int:
        """Close the current batch of submitted transactions into the next block."""
        height = self.next_height
        self.next_height += 1
        self.broadcast(("seal", height, self.next_seq))
        return height

    def delay(self, node: int, steps: int) -> None:
        """Hold every delivery to ``node`` for the next ``steps`` steps."""
        self.holds[node] = self.step_index + steps

    def head_hashes(self) -> list[bytes]:
        return [n.head_hash for n in self.nodes]


def spawn_network(nodes: int, seed: int, max_delay: int = DEFAULT_MAX_DELAY) -> Network:
    if nodes < 1:
        raise ValueError("a network needs at least one node")
    if max_delay < 1:
        raise ValueError("max_delay must be >= 1")
    return Network([Node(i) for i in range(nodes)], seed, max_delay)


def _deliver(net: Network, node: Node, message: tuple) -> None:
    kind = message[0]
    if kind == "tx":
        node.txs[message[1]] = message[2]
    elif kind == "seal":
        node.markers[message[1]] = message[2]
    elif kind == "block":
        block = message[1]
        node.blocks.setdefault(block.index, block)


def _batch(node: Node, height: int) -> list[Transaction] | None:
    upto = node.markers.get(height)
    if upto is None:
        return None
    lo = node.markers.get(height - 1, 0) if height else 0
    if height and height - 1 not in node.markers:
        return None
    if any(seq not in node.txs for seq in range(lo, upto)):
        return None
    return [node.txs[seq] for seq in range(lo, upto)]


def _advance(net: Network, node: Node) -> None:
    while True:
        height = node.height + 1
        if height % net.size == node.index:
            batch = _batch(node, height)
            if batch is None:
                return
            block = execute_block(node.ledger, batch)
            net.broadcast(("block", block), exclude=node.index)
            continue
        block = node.blocks.pop(height, None)
        if block is None:
            return
        if block.prev_hash != node.head_hash and height:
            node.rejected.append(height)
            return
        sealed = execute_block(node.ledger, block.tx_list)
        if sealed.block_hash != block.block_hash:
            # the replica keeps its own result; a fork shows up as divergent heads
            node.rejected.append(height)
            return


def step(net: Network) -> Network:
    """Advance one step: deliver due messages, then let every node make progress."""
    net.step_index += 1
    held = []
    while net.queue and net.queue[0][0] <= net.step_index:
        item = heapq.heappop(net.queue)
        dest = item[2]
        if net.holds.get(dest, -1) >= net.step_index:
            held.append((net.holds[dest] + 1, item[1], dest, item[3]))
            continue
        _deliver(net, net.nodes[dest], item[3])
        net.delivered += 1
    for item in held:
        heapq.heappush(net.queue, item)
    for node in net.nodes:
        _advance(net, node)
    return net


def converged(net: Network) -> bool:
    """True iff every replica has the same head hash."""
    return len(set(net.head_hashes())) == 1


def run_until_quiet(net: Network, max_steps: int = 100_000) -> int:
    """Step until no message is in flight; returns the number of steps taken."""
    taken = 0
    while not net.quiescent:
        if taken >= max_steps:
            raise RuntimeError(f"network still busy after {max_steps} steps")
        step(net)
        taken += 1
    return taken


@dataclass(frozen=True)
class SimulationReport:
    nodes: int
    seed: int
    steps: int
    converged: bool
    heads: tuple[str, ...]
    heights: tuple[int, ...]
    matches_reference: bool
    rejected: tuple[int, ...]

    def as_dict(self) -> dict:
        return {
            "nodes": self.nodes, "seed": self.seed, "steps": self.steps,
            "converged": self.converged, "head_hashes": list(self.heads),
            "heights": list(self.heights), "matches_reference": self.matches_reference,
            "rejected_blocks": list(self.rejected),
        }


def simulate(blocks: Sequence[Block], nodes: int, seed: int,
             delays: Iterable[tuple[int, int, int]] = (),
             max_delay: int = DEFAULT_MAX_DELAY) -> SimulationReport:
    """Replicate ``blocks`` across ``nodes`` peers and report convergence.

    ``delays`` holds ``(after_round, node, steps)`` triples: after feeding
    round ``after_round`` the given node stops receiving for ``steps`` steps.
    """
    net = spawn_network(nodes, seed, max_delay)
    pending = sorted(delays)
    steps = 0
    for i, block in enumerate(blocks):
        for tx in block.tx_list:
            net.submit(tx)
        net.seal()
        while pending and pending[0][0] == i:
            _, node, span = pending.pop(0)
            net.delay(node, span)
        step(net)
        steps += 1
    steps += run_until_quiet(net)
    reference = blocks[-1].block_hash if blocks else ZERO_HASH
    heads = net.head_hashes()
    return SimulationReport(
        nodes, seed, steps, converged(net), tuple(h.hex() for h in heads),
        tuple(n.height for n in net.nodes), all(h == reference for h in heads),
        tuple(h for n in net.nodes for h in n.rejected),
    )
