"""Energy functionals of an embedded elastic graph.

Graph energy::

    U(G) = sum_edges lam * |phi(a) - phi(b)|^2
         + sum_stars mu * |phi(center) - mean(phi(leaves))|^2

Approximation energy, standard and trimmed (robustness radius ``r0``)::

    U_A = (1/sum w) sum_y sum_{x in K_y} w(x) |x - phi(y)|^2
    U_R = (1/sum w) sum_y sum_{x in K_y} w(x) min(|x - phi(y)|^2, r0^2)

Sums are accumulated with :func:`math.fsum`, so results do not depend on the
order in which terms are visited.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .graph import ElasticGraph, GraphError

if TYPE_CHECKING:
    from .optimizer import Partition


class DataError(ValueError):
    """Dataset content violates an invariant (non-finite values, zero total weight, ...)."""


@dataclass(frozen=True)
class Dataset:
    points: np.ndarray
    weights: np.ndarray
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise DataError(f"points must be a non-empty N x m matrix, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            row = int(np.argwhere(~np.isfinite(pts))[0][0])
            raise DataError(f"non-finite coordinate in row {row}")
        w = np.array(self.weights, dtype=float).reshape(-1)
        if w.shape[0] != pts.shape[0]:
            raise DataError(f"{w.shape[0]} weights for {pts.shape[0]} points")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise DataError("weights must be finite and non-negative")
        if not w.sum() > 0:
            raise DataError("sum of weights must be positive")
        labels = self.labels
        if labels is not None:
            labels = tuple(str(v) for v in labels)
            if len(labels) != pts.shape[0]:
                raise DataError(f"{len(labels)} labels for {pts.shape[0]} points")
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_points(cls, points, weights=None, labels=None) -> "Dataset":
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if weights is None:
            weights = np.ones(pts.shape[0])
        return cls(pts, weights, None if labels is None else tuple(labels))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def total_weight(self) -> float:
        return math.fsum(self.weights)

    def subset(self, mask) -> "Dataset":
        labels = None if self.labels is None else tuple(np.asarray(self.labels, dtype=object)[mask])
        return Dataset(self.points[mask], self.weights[mask], labels)


@dataclass(frozen=True)
class Embedding:
    """Node positions; row ``i`` of ``positions`` belongs to ``node_ids[i]``."""

    node_ids: tuple[int, ...]
    positions: np.ndarray

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float)
        if pos.ndim == 1:
            pos = pos[:, None]
        ids = tuple(int(i) for i in self.node_ids)
        if pos.shape[0] != len(ids):
            raise GraphError(f"{pos.shape[0]} positions for {len(ids)} nodes")
        if list(ids) != sorted(set(ids)):
            raise GraphError("embedding node ids must be unique and ascending")
        if not np.all(np.isfinite(pos)):
            raise GraphError("embedding contains non-finite coordinates")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "node_ids", ids)

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    def position(self, node: int) -> np.ndarray:
        try:
            return self.positions[self.node_ids.index(node)]
        except ValueError:
            raise GraphError(f"no position for node {node}") from None

    def aligned(self, graph: ElasticGraph) -> np.ndarray:
        """Positions ordered like ``graph.nodes``; raises if a node is missing."""
        if self.node_ids == graph.nodes:
            return self.positions
        row = {n: i for i, n in enumerate(self.node_ids)}
        missing = [n for n in graph.nodes if n not in row]
        if missing:
            raise GraphError(f"no position for node {missing[0]}")
        return self.positions[[row[n] for n in graph.nodes]]

    def to_dict(self) -> dict:
        return {
            "dimension": self.dim,
            "positions": [{"id": n, "x": [float(v) for v in p]} for n, p in zip(self.node_ids, self.positions)],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Embedding":
        rows = sorted(doc["positions"], key=lambda r: int(r["id"]))
        pos = np.array([r["x"] for r in rows], dtype=float).reshape(len(rows), -1)
        return cls(tuple(int(r["id"]) for r in rows), pos)


@dataclass(frozen=True)
class EnergyReport:
    edge_energy: float
    star_energy: float
    approx_energy: float
    total: float
    robust_mode: bool
    r0: float

    def to_dict(self) -> dict:
        return {
            "edge_energy": self.edge_energy,
            "star_energy": self.star_energy,
            "approx_energy": self.approx_energy,
            "total": self.total,
            "robust_mode": self.robust_mode,
            "r0": self.r0 if math.isfinite(self.r0) else "inf",
        }


def _star_defects(graph: ElasticGraph, pos: np.ndarray) -> list[np.ndarray]:
    idx = graph.index
    out = []
    for s in graph.stars:
        leaves = pos[[idx[v] for v in s.leaves]]
        out.append(pos[idx[s.center]] - leaves.mean(axis=0))
    return out


def graph_energy(graph: ElasticGraph, emb: Embedding) -> tuple[float, float]:
    """Return ``(edge_energy, star_energy)``."""
    pos = emb.aligned(graph)
    idx = graph.index
    edge_terms = []
    for e in graph.edges:
        d = pos[idx[e.a]] - pos[idx[e.b]]
        edge_terms.append(e.lam * float(d @ d))
    star_terms = [s.mu * float(d @ d) for s, d in zip(graph.stars, _star_defects(graph, pos))]
    return math.fsum(edge_terms), math.fsum(star_terms)


def _owner_sq_dists(dataset: Dataset, emb: Embedding, partition: "Partition") -> np.ndarray:
    owner = np.asarray(partition.owner)
    if owner.shape[0] != dataset.n:
        raise GraphError(f"partition covers {owner.shape[0]} points, dataset has {dataset.n}")
    if emb.dim != dataset.dim:
        raise GraphError(f"embedding dimension {emb.dim} != data dimension {dataset.dim}")
    ids = np.asarray(emb.node_ids)
    rows = np.clip(np.searchsorted(ids, owner), 0, len(ids) - 1)
    bad = ids[rows] != owner
    if np.any(bad):
        node = int(owner[np.argmax(bad)])
        raise GraphError(f"partition refers to node {node} absent from the embedding")
    diff = dataset.points - emb.positions[rows]
    return np.einsum("ij,ij->i", diff, diff)


def approx_energy(dataset: Dataset, emb: Embedding, partition: "Partition") -> float:
    sq = _owner_sq_dists(dataset, emb, partition)
    return math.fsum(dataset.weights * sq) / dataset.total_weight


def robust_approx_energy(dataset: Dataset, emb: Embedding, partition: "Partition", r0: float) -> float:
    if not r0 > 0:
        raise ValueError(f"robustness radius must be positive, got {r0}")
    sq = _owner_sq_dists(dataset, emb, partition)
    if math.isfinite(r0):
        sq = np.minimum(sq, r0 * r0)
    return math.fsum(dataset.weights * sq) / dataset.total_weight


def total_energy(
    graph: ElasticGraph,
    emb: Embedding,
    dataset: Dataset,
    partition: "Partition",
    mode: str = "standard",
    r0: float = math.inf,
) -> EnergyReport:
    edge, star = graph_energy(graph, emb)
    if mode == "robust":
        approx = robust_approx_energy(dataset, emb, partition, r0)
    elif mode == "standard":
        approx = approx_energy(dataset, emb, partition)
        r0 = math.inf
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return EnergyReport(edge, star, approx, math.fsum((edge, star, approx)), mode == "robust", r0)


def trimmed_penalty(dist: float | np.ndarray, r0: float) -> float | np.ndarray:
    """Per-point contribution ``min(d^2, r0^2)`` as a function of distance."""
    d = np.asarray(dist, dtype=float)
    return np.minimum(d * d, r0 * r0)
