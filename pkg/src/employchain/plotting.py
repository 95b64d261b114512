"""Report figures: balances per sealed height and the net's reachability graph.

Rendering uses the non-interactive Agg backend so it works headless.
"""

from __future__ import annotations

from collections import deque
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .petrinet import PetriNet, ReachabilityGraph, deadlocks  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.fontsize": 8,
    "legend.frameon": False,
    "savefig.dpi": 120,
}


def plot_history(history: Sequence, path: str | Path, title: str = "") -> Path:
    """Account balances and total escrow at every sealed height.

    ``history`` is a list of :class:`employchain.scenario.Snapshot`.
    """
    path = Path(path)
    heights = [s.height for s in history]
    names = sorted({n for s in history for n in s.balances})
    with plt.rc_context(STYLE):
        fig, (top, bottom) = plt.subplots(2, 1, figsize=(6.4, 5.2), sharex=True,
                                          gridspec_kw={"height_ratios": [3, 1.4]})
        for name in names:
            top.step(heights, [s.balances.get(name, 0) for s in history], where="post", marker="o",
                     markersize=3, label=name)
        top.step(heights, [s.escrow for s in history], where="post", color="black",
                 linestyle="--", marker="s", markersize=3, label="escrow")
        top.set_ylabel("tokens")
        top.legend(loc="best", ncol=2)
        if title:
            top.set_title(title)
        totals = [s.total for s in history]
        bottom.plot(heights, totals, marker="o", markersize=3, color="tab:gray")
        bottom.set_ylabel("supply")
        bottom.set_xlabel("block height")
        if totals:
            lo, hi = min(totals), max(totals)
            pad = max(1, (hi - lo) * 0.1)
            bottom.set_ylim(lo - pad, hi + pad)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return path


def _layers(graph: ReachabilityGraph) -> dict:
    # breadth-first depth of every marking, for a top-down layout
    depth = {graph.initial: 0}
    queue = deque([graph.initial])
    succ: dict = {}
    for src, _, dst in graph.edges:
        succ.setdefault(src, []).append(dst)
    while queue:
        m = queue.popleft()
        for nxt in succ.get(m, ()):
            if nxt not in depth:
                depth[nxt] = depth[m] + 1
                queue.append(nxt)
    return depth


def plot_reachability(net: PetriNet, graph: ReachabilityGraph, path: str | Path,
                      title: str = "") -> Path:
    """Draw the reachability graph; deadlocks are shaded, labels are markings."""
    path = Path(path)
    depth = _layers(graph)
    rows: dict[int, list] = {}
    for m in graph.nodes:
        rows.setdefault(depth[m], []).append(m)
    pos = {}
    for d, ms in rows.items():
        for i, m in enumerate(ms):
            pos[m] = (i - (len(ms) - 1) / 2, -d)
    dead = deadlocks(graph, net)
    width = max(len(ms) for ms in rows.values()) if rows else 1
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(max(4.0, 2.4 * width), max(3.0, 1.1 * len(rows))))
        for src, t, dst in graph.edges:
            (x0, y0), (x1, y1) = pos[src], pos[dst]
            ax.annotate("", xy=(x1, y1), xytext=(x0, y0),
                        arrowprops=dict(arrowstyle="->", color="0.45", shrinkA=14, shrinkB=14))
            ax.text((x0 + x1) / 2, (y0 + y1) / 2, t, fontsize=7, color="tab:blue",
                    ha="center", va="center", backgroundcolor="white")
        for m, (x, y) in pos.items():
            face = "0.8" if m in dead else ("lightyellow" if m == graph.initial else "white")
            ax.text(x, y, net.label(m), ha="center", va="center", fontsize=7,
                    bbox=dict(boxstyle="round", facecolor=face, edgecolor="0.3"))
        xs = [p[0] for p in pos.values()] or [0]
        ys = [p[1] for p in pos.values()] or [0]
        ax.set_xlim(min(xs) - 0.8, max(xs) + 0.8)
        ax.set_ylim(min(ys) - 0.6, max(ys) + 0.6)
        ax.axis("off")
        ax.set_title(title or f"{len(graph.nodes)} reachable markings, {len(dead)} deadlock(s)")
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return path
