"""Static figures for CLI reports, rendered off-screen with matplotlib.

Files are written without timestamps or software metadata so identical
inputs give identical bytes.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.patches import Wedge  # noqa: E402

from .energy import Dataset, Embedding  # noqa: E402
from .graph import ElasticGraph  # noqa: E402
from .layout import PALETTE, Layout2D, pie_slices  # noqa: E402

_RC = {
    "font.size": 9,
    "axes.linewidth": 0.6,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "svg.hashsalt": "rpgraph",
}


def _save(fig, path) -> None:
    path = str(path)
    meta = {"Date": None} if path.endswith((".svg", ".pdf")) else {}
    if path.endswith(".png"):
        meta = {"Software": None}
    fig.savefig(path, dpi=120, metadata=meta)
    plt.close(fig)


def _label_colors(labels):
    uniq = sorted(set(labels))
    return {lab: PALETTE[i % len(PALETTE)] for i, lab in enumerate(uniq)}


def plot_fit(dataset: Dataset, graph: ElasticGraph, emb: Embedding, path, title: str | None = None) -> None:
    """Data (first two coordinates) with the embedded graph on top."""
    pos = emb.aligned(graph)
    X = dataset.points
    if X.shape[1] == 1:
        X = np.column_stack([X[:, 0], np.zeros(len(X))])
        pos = np.column_stack([pos[:, 0], np.zeros(len(pos))])
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5, 5))
        if dataset.labels is None:
            ax.scatter(X[:, 0], X[:, 1], s=4, c="#9a9a9a", linewidths=0)
        else:
            colors = _label_colors(dataset.labels)
            for lab, col in colors.items():
                sel = np.array([v == lab for v in dataset.labels])
                ax.scatter(X[sel, 0], X[sel, 1], s=4, c=col, linewidths=0, label=lab)
            ax.legend(loc="best", fontsize=7, frameon=False, markerscale=2)
        idx = graph.index
        for e in graph.edges:
            p, q = pos[idx[e.a]], pos[idx[e.b]]
            ax.plot([p[0], q[0]], [p[1], q[1]], color="#c0392b", lw=1.5)
        ax.scatter(pos[:, 0], pos[:, 1], s=14, c="#c0392b", zorder=3)
        ax.set_aspect("equal", adjustable="datalim")
        if title:
            ax.set_title(title)
        fig.tight_layout()
        _save(fig, path)


def plot_layout(layout: Layout2D, graph: ElasticGraph, path,
                compositions: dict[int, dict[str, int]] | None = None, title: str | None = None) -> None:
    """Metro-map drawing; nodes become pies when compositions are given."""
    pos = layout.positions
    idx = {n: i for i, n in enumerate(layout.node_ids)}
    comps = {n: c for n, c in (compositions or {}).items() if sum(c.values()) > 0}
    colors = _label_colors([lab for c in comps.values() for lab in c])
    span = float(np.ptp(pos, axis=0).max()) or 1.0
    rmax = 0.04 * span
    biggest = max((sum(c.values()) for c in comps.values()), default=1)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5, 5))
        for e in graph.edges:
            p, q = pos[idx[e.a]], pos[idx[e.b]]
            ax.plot([p[0], q[0]], [p[1], q[1]], color="#555555", lw=1.5, zorder=1)
        for n in layout.node_ids:
            c = pos[idx[n]]
            counts = comps.get(n)
            if not counts:
                ax.add_patch(plt.Circle(c, 0.25 * rmax, color="#333333", zorder=2))
                continue
            r = rmax * (0.35 + 0.65 * np.sqrt(sum(counts.values()) / biggest))
            for lab, start, sweep in pie_slices(counts):
                # pie_slices is clockwise from 12 o'clock; Wedge wants counter-clockwise from 3 o'clock
                t1 = 90.0 - start
                ax.add_patch(Wedge(c, r, t1 - sweep, t1, facecolor=colors[lab], edgecolor="white",
                                   lw=0.3, zorder=3))
        for lab, col in colors.items():
            ax.scatter([], [], c=col, label=lab)
        if colors:
            ax.legend(loc="best", fontsize=7, frameon=False)
        ax.set_aspect("equal")
        ax.autoscale_view()
        lo, hi = pos.min(axis=0) - 2 * rmax, pos.max(axis=0) + 2 * rmax
        ax.set_xlim(lo[0], hi[0])
        ax.set_ylim(lo[1], hi[1])
        ax.set_xticks([])
        ax.set_yticks([])
        if title:
            ax.set_title(title)
        fig.tight_layout()
        _save(fig, path)


def plot_energy(records: list[dict], path, title: str | None = None) -> None:
    """Total energy against iteration (fit trace) or committed step (growth log)."""
    xs = [r.get("iteration", r.get("step")) for r in records]
    ys = [r.get("total", r.get("energy_after")) for r in records]
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5, 3))
        ax.plot(xs, ys, marker="o", ms=3, lw=1)
        ax.set_xlabel("step")
        ax.set_ylabel("total energy")
        if title:
            ax.set_title(title)
        fig.tight_layout()
        _save(fig, path)
