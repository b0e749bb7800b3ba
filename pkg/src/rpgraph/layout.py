"""Metro-map layout of principal trees, node class compositions, and
SVG/JSON export.

The layout is seeded radially from the tree centroid with edge lengths taken
from the data-space embedding, then relaxed so that every star center sits
at the mean of its leaves (tree leaves stay fixed).
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from xml.sax.saxutils import escape, quoteattr

import numpy as np

from .energy import DataError, Dataset, Embedding
from .graph import ElasticGraph, GraphError
from .optimizer import Partition

PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)


@dataclass(frozen=True)
class Layout2D:
    node_ids: tuple[int, ...]
    positions: np.ndarray  # (n, 2), display units
    scale: float = 1.0  # data units per display unit
    rounds: int = 0

    def position(self, node: int) -> np.ndarray:
        return self.positions[self.node_ids.index(node)]

    def diameter(self) -> float:
        p = self.positions
        if len(p) < 2:
            return 0.0
        d = p[:, None, :] - p[None, :, :]
        return float(np.sqrt(np.einsum("ijk,ijk->ij", d, d).max()))

    def star_residual(self, graph: ElasticGraph) -> float:
        return _max_residual(graph, self.positions)


def _max_residual(graph: ElasticGraph, pos: np.ndarray) -> float:
    idx = graph.index
    worst = 0.0
    for s in graph.stars:
        m = pos[[idx[v] for v in s.leaves]].mean(axis=0)
        worst = max(worst, float(np.linalg.norm(pos[idx[s.center]] - m)))
    return worst


def tree_centroid(graph: ElasticGraph) -> int:
    """Node whose removal leaves the smallest largest component (lowest id on ties)."""
    n = graph.n_nodes
    root = graph.nodes[0]
    parent = {root: None}
    order = [root]
    for v in order:
        for u in graph.neighbors(v):
            if u not in parent:
                parent[u] = v
                order.append(u)
    size = {v: 1 for v in graph.nodes}
    for v in reversed(order[1:]):
        size[parent[v]] += size[v]
    best, best_val = None, n + 1
    for v in graph.nodes:
        parts = [size[u] for u in graph.neighbors(v) if parent.get(u) == v]
        parts.append(n - size[v])
        val = max(parts)
        if val < best_val:
            best, best_val = v, val
    return best


def metro_layout(
    graph: ElasticGraph,
    emb: Embedding,
    harmonic_tolerance: float | None = None,
    max_rounds: int = 10000,
) -> Layout2D:
    """Planar tree drawing with star centers at the mean of their leaves.

    ``harmonic_tolerance`` defaults to ``1e-6`` times the layout diameter
    (measured on the tree leaves, which bound the relaxed layout).
    Relaxation is Gauss-Seidel in node-id order.
    """
    if not graph.is_tree():
        raise GraphError("metro layout requires a tree")
    data_pos = emb.aligned(graph)
    idx = graph.index
    pos = np.zeros((graph.n_nodes, 2))
    if graph.n_nodes == 1:
        return Layout2D(graph.nodes, pos)

    root = tree_centroid(graph)
    children: dict[int, list[int]] = {}
    order = [root]
    seen = {root}
    for v in order:
        children[v] = [u for u in graph.neighbors(v) if u not in seen]
        seen.update(children[v])
        order.extend(children[v])
    leaves = {v: 0 for v in graph.nodes}
    for v in reversed(order):
        leaves[v] = 1 if not children[v] else sum(leaves[u] for u in children[v])

    sector = {root: (0.0, 2.0 * math.pi)}
    for v in order:
        lo, hi = sector[v]
        total = sum(leaves[u] for u in children[v])
        a = lo
        for u in children[v]:
            b = a + (hi - lo) * leaves[u] / total
            sector[u] = (a, b)
            ang = 0.5 * (a + b)
            length = float(np.linalg.norm(data_pos[idx[u]] - data_pos[idx[v]]))
            pos[idx[u]] = pos[idx[v]] + length * np.array([math.cos(ang), math.sin(ang)])
            a = b

    if harmonic_tolerance is None:
        # leaves never move, and the relaxed layout lies in their convex hull, so their
        # spread is a lower bound on the final diameter
        tips = [idx[v] for v in graph.nodes if graph.degree(v) == 1]
        harmonic_tolerance = 1e-6 * Layout2D(tuple(tips), pos[tips]).diameter()
    inner = [(idx[s.center], [idx[v] for v in s.leaves]) for s in graph.stars]
    rounds = 0
    while rounds < max_rounds and _max_residual(graph, pos) > harmonic_tolerance:
        for c, nb in inner:
            pos[c] = pos[nb].mean(axis=0)
        rounds += 1
    return Layout2D(graph.nodes, pos, 1.0, rounds)


def node_compositions(dataset: Dataset, partition: Partition, nodes=None) -> dict[int, dict[str, int]]:
    """Label counts per owning node. Far points count too. ``nodes`` adds
    empty entries for unoccupied nodes."""
    if dataset.labels is None:
        raise DataError("dataset has no labels")
    comp: dict[int, Counter] = {int(n): Counter() for n in (nodes or ())}
    for o, lab in zip(partition.owner, dataset.labels):
        comp.setdefault(int(o), Counter())[lab] += 1
    return {n: dict(sorted(comp[n].items())) for n in sorted(comp)}


def purity(compositions: dict[int, dict[str, int]]) -> dict[int, float]:
    """Majority-label share per occupied node."""
    return {n: max(c.values()) / sum(c.values()) for n, c in compositions.items() if sum(c.values()) > 0}


# ---------------------------------------------------------------- export

def _fmt(v: float) -> str:
    return format(float(v), ".6f").rstrip("0").rstrip(".") or "0"


def _label_colors(compositions) -> dict[str, str]:
    labels = sorted({lab for c in (compositions or {}).values() for lab in c})
    return {lab: PALETTE[i % len(PALETTE)] for i, lab in enumerate(labels)}


def pie_slices(counts: dict[str, int]) -> list[tuple[str, float, float]]:
    """``(label, start_deg, sweep_deg)`` in label order, starting at 12 o'clock, clockwise."""
    total = sum(counts.values())
    out, start = [], 0.0
    for lab, c in sorted(counts.items()):
        if c <= 0:
            continue
        sweep = 360.0 * c / total
        out.append((lab, start, sweep))
        start += sweep
    return out


def export_svg(
    layout: Layout2D,
    graph: ElasticGraph,
    compositions: dict[int, dict[str, int]] | None = None,
    width: int = 640,
    height: int = 640,
    margin: float = 40.0,
    node_radius: tuple[float, float] = (4.0, 18.0),
    edge_color: str = "#555555",
    node_color: str = "#333333",
) -> str:
    """SVG 1.1 drawing: edges as lines, nodes as circles, or as pies sized by
    occupancy when ``compositions`` has entries."""
    pos = layout.positions
    lo, hi = pos.min(axis=0), pos.max(axis=0)
    span = max(float((hi - lo).max()), 1e-12)
    k = min(width - 2 * margin, height - 2 * margin) / span
    centre = 0.5 * (lo + hi)

    def xy(p):
        return (width / 2 + k * (p[0] - centre[0]), height / 2 - k * (p[1] - centre[1]))

    idx = {n: i for i, n in enumerate(layout.node_ids)}
    comps = {n: c for n, c in (compositions or {}).items() if sum(c.values()) > 0}
    colors = _label_colors(comps)
    biggest = max((sum(c.values()) for c in comps.values()), default=1)
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        '<g class="edges">',
    ]
    for e in graph.edges:
        (x1, y1), (x2, y2) = xy(pos[idx[e.a]]), xy(pos[idx[e.b]])
        out.append(f'<line x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" y2="{_fmt(y2)}" '
                   f'stroke="{edge_color}" stroke-width="2"/>')
    out.append("</g>")
    out.append('<g class="nodes">')
    rmin, rmax = node_radius
    for n in layout.node_ids:
        cx, cy = xy(pos[idx[n]])
        counts = comps.get(n)
        if not counts:
            out.append(f'<circle class="node" data-node="{n}" cx="{_fmt(cx)}" cy="{_fmt(cy)}" '
                       f'r="{_fmt(rmin)}" fill="{node_color}"/>')
            continue
        r = rmin + (rmax - rmin) * math.sqrt(sum(counts.values()) / biggest)
        out.append(f'<g class="pie" data-node="{n}" data-count="{sum(counts.values())}">')
        slices = pie_slices(counts)
        for lab, start, sweep in slices:
            attrs = f'class="slice" data-label={quoteattr(lab)} data-sweep="{_fmt(sweep)}" fill="{colors[lab]}"'
            if len(slices) == 1:
                out.append(f'<circle {attrs} cx="{_fmt(cx)}" cy="{_fmt(cy)}" r="{_fmt(r)}"/>')
                continue
            a0, a1 = math.radians(start), math.radians(start + sweep)
            x0, y0 = cx + r * math.sin(a0), cy - r * math.cos(a0)
            x1, y1 = cx + r * math.sin(a1), cy - r * math.cos(a1)
            large = 1 if sweep > 180.0 else 0
            out.append(f'<path {attrs} d="M {_fmt(cx)} {_fmt(cy)} L {_fmt(x0)} {_fmt(y0)} '
                       f'A {_fmt(r)} {_fmt(r)} 0 {large} 1 {_fmt(x1)} {_fmt(y1)} Z"/>')
        out.append("</g>")
    out.append("</g>")
    if colors:
        out.append('<g class="legend" font-family="sans-serif" font-size="11">')
        for i, (lab, col) in enumerate(colors.items()):
            y = 14 + 14 * i
            out.append(f'<rect x="6" y="{y - 9}" width="10" height="10" fill="{col}"/>'
                       f'<text x="20" y="{y}">{escape(lab)}</text>')
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def export_json(
    graph: ElasticGraph,
    emb: Embedding,
    layout: Layout2D | None = None,
    compositions: dict[int, dict[str, int]] | None = None,
) -> dict:
    """Graph document extended with the embedding and, optionally, the 2-D
    layout (with per-edge data-space and planar lengths) and compositions."""
    doc = graph.to_dict()
    doc["embedding"] = emb.to_dict()
    if layout is not None:
        doc["positions2d"] = [{"id": n, "x": [float(p[0]), float(p[1])]}
                              for n, p in zip(layout.node_ids, layout.positions)]
        doc["scale"] = layout.scale
        pos = emb.aligned(graph)
        lidx = {n: i for i, n in enumerate(layout.node_ids)}
        doc["edge_lengths"] = [{
            "a": e.a, "b": e.b,
            "length": float(np.linalg.norm(pos[graph.index[e.a]] - pos[graph.index[e.b]])),
            "length2d": float(np.linalg.norm(layout.positions[lidx[e.a]] - layout.positions[lidx[e.b]])),
        } for e in graph.edges]
    if compositions is not None:
        doc["compositions"] = [{"id": n, "counts": c} for n, c in compositions.items()]
    return doc


def import_json(doc: dict) -> tuple[ElasticGraph, Embedding]:
    if "embedding" not in doc:
        raise GraphError("document has no embedding")
    graph = ElasticGraph.from_dict(doc)
    emb = Embedding.from_dict(doc["embedding"])
    emb.aligned(graph)
    return graph, emb
