"""Tree growth with the two-rule grammar "add a node to a node" and
"bisect an edge".

Every candidate application is tried on a copy of the current state,
optimized for a few iterations, and the one with the lowest resulting total
energy is committed and re-fitted to convergence.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .energy import Dataset, Embedding
from .graph import ElasticGraph, GraphError, add_leaf, split_edge
from .optimizer import OptimizerConfig, Partition, fit

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AddNodeToNode:
    target: int

    def to_dict(self) -> dict:
        return {"kind": "add_node", "target": self.target}


@dataclass(frozen=True)
class BisectEdge:
    edge: tuple[int, int]

    def to_dict(self) -> dict:
        return {"kind": "bisect_edge", "edge": list(self.edge)}


GrammarOp = AddNodeToNode | BisectEdge


@dataclass(frozen=True)
class GrowthConfig:
    max_nodes: int
    lam: float = 0.01
    mu: float = 0.1
    trial_iterations: int = 10
    min_energy_improvement: float = 0.0
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    jobs: int = 1

    def __post_init__(self):
        if self.max_nodes < 1 or self.trial_iterations < 1:
            raise ValueError("max_nodes and trial_iterations must be positive")
        if self.min_energy_improvement < 0:
            raise ValueError("min_energy_improvement must be non-negative")


def apply_add_node(
    graph: ElasticGraph,
    emb: Embedding,
    target: int,
    dataset: Dataset,
    partition: Partition,
    lam: float | None = None,
    mu: float | None = None,
) -> tuple[ElasticGraph, Embedding]:
    """Attach a new node to ``target``.

    The new node starts at the weighted mean of the target's close points;
    when there are none it is extrapolated to ``2*phi(target) - phi(n)``
    with ``n`` the target's lowest-id neighbour.
    """
    if target not in graph.index:
        raise GraphError(f"unknown node {target}")
    lam, mu = _moduli(graph, lam, mu)
    pos = emb.aligned(graph)
    here = pos[graph.index[target]]
    mine = (partition.owner == target) & partition.close
    w = dataset.weights[mine]
    if mine.any() and w.sum() > 0:
        new = (w[:, None] * dataset.points[mine]).sum(axis=0) / w.sum()
    elif graph.neighbors(target):
        new = 2.0 * here - pos[graph.index[graph.neighbors(target)[0]]]
    else:
        new = here.copy()
    g2, _ = add_leaf(graph, target, lam, mu)
    return g2, Embedding(g2.nodes, np.vstack([pos, new]))


def apply_bisect_edge(
    graph: ElasticGraph,
    emb: Embedding,
    edge: tuple[int, int],
    dataset: Dataset | None = None,
    mu: float | None = None,
) -> tuple[ElasticGraph, Embedding]:
    """Split ``edge`` at its midpoint. ``dataset`` is accepted for interface
    symmetry with :func:`apply_add_node`; placement does not use it."""
    a, b = edge
    _, mu = _moduli(graph, None, mu)
    pos = emb.aligned(graph)
    if not graph.has_edge(a, b):
        raise GraphError(f"unknown edge {(min(a, b), max(a, b))}")
    mid = 0.5 * (pos[graph.index[a]] + pos[graph.index[b]])
    g2, _ = split_edge(graph, a, b, None, mu)
    return g2, Embedding(g2.nodes, np.vstack([pos, mid]))


def enumerate_candidates(graph: ElasticGraph) -> list[GrammarOp]:
    ops: list[GrammarOp] = [AddNodeToNode(n) for n in graph.nodes]
    ops += [BisectEdge(e.key) for e in graph.edges]
    return ops


def apply_op(graph, emb, op: GrammarOp, dataset, partition, lam=None, mu=None):
    if isinstance(op, AddNodeToNode):
        return apply_add_node(graph, emb, op.target, dataset, partition, lam, mu)
    return apply_bisect_edge(graph, emb, op.edge, dataset, mu)


def _moduli(graph: ElasticGraph, lam, mu) -> tuple[float, float]:
    if lam is None:
        lam = graph.edges[0].lam if graph.edges else 1.0
    if mu is None:
        mu = graph.stars[0].mu if graph.stars else 1.0
    return lam, mu


def grow(
    dataset: Dataset,
    graph_init: ElasticGraph,
    emb_init: Embedding,
    config: GrowthConfig,
) -> tuple[ElasticGraph, Embedding, list[dict]]:
    """Grow ``graph_init`` until ``max_nodes`` or until the best candidate
    improves the total energy by less than ``min_energy_improvement``
    (relative). Returns the final graph, embedding and the growth log."""
    opt = config.optimizer
    trial_cfg = replace(opt, max_iterations=config.trial_iterations)
    graph = graph_init
    emb, part, trace = fit(graph, dataset, emb_init, opt)
    energy = trace.totals[-1]
    history: list[dict] = [{
        "step": 0, "nodes": graph.n_nodes, "op": None, "candidates": 0,
        "energy_before": None, "energy_after": energy,
        "fit_iterations": trace.iterations, "converged": trace.converged,
    }]

    def trial(op):
        g2, e2 = apply_op(graph, emb, op, dataset, part, config.lam, config.mu)
        e3, _, tr = fit(g2, dataset, e2, trial_cfg)
        return tr.totals[-1], g2, e3

    pool = ThreadPoolExecutor(config.jobs) if config.jobs > 1 else None
    try:
        while graph.n_nodes < config.max_nodes:
            cands = enumerate_candidates(graph)
            results = list(pool.map(trial, cands)) if pool else [trial(op) for op in cands]
            # first minimum in candidate order; independent of scheduling
            best = min(range(len(cands)), key=lambda i: (results[i][0], i))
            best_energy, g2, e2 = results[best]
            gain = (energy - best_energy) / max(abs(energy), np.finfo(float).tiny)
            if not gain >= config.min_energy_improvement or math.isinf(config.min_energy_improvement):
                log.debug("growth stopped at %d nodes: relative gain %.3g", graph.n_nodes, gain)
                break
            graph = g2
            emb, part, trace = fit(graph, dataset, e2, opt)
            history.append({
                "step": len(history), "nodes": graph.n_nodes, "op": cands[best].to_dict(),
                "candidates": len(cands), "energy_before": energy, "trial_energy": best_energy,
                "energy_after": trace.totals[-1], "fit_iterations": trace.iterations,
                "converged": trace.converged,
            })
            energy = trace.totals[-1]
    finally:
        if pool:
            pool.shutdown()
    return graph, emb, history

