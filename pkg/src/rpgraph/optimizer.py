"""Splitting optimization of node positions.

Each iteration freezes the partition of the data into node neighbourhoods
(with every point flagged close or far relative to ``r0``), minimizes the
resulting quadratic surrogate exactly, then re-partitions. Far points enter
the surrogate only through the constant ``r0**2`` tail, so they are absent
from the linear system.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .energy import Dataset, Embedding, EnergyReport, graph_energy, total_energy
from .graph import ElasticGraph, GraphError

_PARTITION_CHUNK = 4_000_000
_DENSE_LIMIT = 256  # node count up to which a dense Cholesky is cheaper than sparse LU


class SingularSystemError(ArithmeticError):
    """The position system has no unique minimizer and no ridge was allowed."""

    def __init__(self, message: str, nodes: tuple[int, ...] = ()):
        super().__init__(message)
        self.nodes = nodes


@dataclass(frozen=True)
class Partition:
    owner: np.ndarray  # node id per point
    close: np.ndarray  # True iff |x - phi(owner)| <= r0

    def __post_init__(self):
        owner = np.asarray(self.owner, dtype=np.int64)
        close = np.asarray(self.close, dtype=bool)
        owner.setflags(write=False)
        close.setflags(write=False)
        object.__setattr__(self, "owner", owner)
        object.__setattr__(self, "close", close)

    def same_as(self, other: "Partition") -> bool:
        return np.array_equal(self.owner, other.owner) and np.array_equal(self.close, other.close)

    def changed(self, other: "Partition") -> int:
        return int(np.count_nonzero((self.owner != other.owner) | (self.close != other.close)))


@dataclass(frozen=True)
class OptimizerConfig:
    mode: str = "standard"
    r0: float = math.inf
    max_iterations: int = 100
    energy_tolerance: float = 1e-9
    ridge: float = 1e-9

    def __post_init__(self):
        if self.mode not in ("standard", "robust"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "robust":
            if not (self.r0 > 0 and math.isfinite(self.r0)):
                raise ValueError("robust mode requires a finite positive r0")
        else:
            object.__setattr__(self, "r0", math.inf)
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        if self.ridge < 0 or self.energy_tolerance < 0:
            raise ValueError("ridge and energy_tolerance must be non-negative")


@dataclass
class FitTrace:
    initial: EnergyReport
    steps: list[tuple[EnergyReport, int]] = field(default_factory=list)
    converged: bool = False
    tolerance: float = 1e-9  # relative slack for is_monotone

    @property
    def totals(self) -> list[float]:
        return [self.initial.total] + [r.total for r, _ in self.steps]

    @property
    def iterations(self) -> int:
        return len(self.steps)

    def is_monotone(self, rtol: float | None = None) -> bool:
        rtol = self.tolerance if rtol is None else rtol
        t = self.totals
        return all(b <= a + rtol * max(1.0, abs(a)) for a, b in zip(t, t[1:]))

    def records(self) -> list[dict]:
        out = [{"iteration": 0, "reassigned": 0, **self.initial.to_dict()}]
        for i, (rep, moved) in enumerate(self.steps, 1):
            out.append({"iteration": i, "reassigned": moved, **rep.to_dict()})
        return out


def build_partition(dataset: Dataset, emb: Embedding, r0: float = math.inf) -> Partition:
    """Assign every point to its nearest node (smallest id on ties) and flag
    points within ``r0`` of that node as close (boundary counts as close)."""
    if len(emb.node_ids) == 0:
        raise GraphError("cannot partition against an empty node set")
    if emb.dim != dataset.dim:
        raise GraphError(f"embedding dimension {emb.dim} != data dimension {dataset.dim}")
    X, Y = dataset.points, emb.positions
    n, k, m = X.shape[0], Y.shape[0], X.shape[1]
    step = max(1, _PARTITION_CHUNK // max(1, k * m))
    arg = np.empty(n, dtype=np.int64)
    best = np.empty(n)
    for s in range(0, n, step):
        diff = X[s:s + step, None, :] - Y[None, :, :]
        sq = np.einsum("ijk,ijk->ij", diff, diff)
        # node_ids ascend, and argmin takes the first minimum
        a = np.argmin(sq, axis=1)
        arg[s:s + step] = a
        best[s:s + step] = sq[np.arange(a.shape[0]), a]
    owner = np.asarray(emb.node_ids, dtype=np.int64)[arg]
    close = best <= r0 * r0 if math.isfinite(r0) else np.ones(n, dtype=bool)
    return Partition(owner, close)


def _elastic_matrix(graph: ElasticGraph) -> sp.csc_matrix:
    cached = graph.__dict__.get("_elastic_matrix")
    if cached is None:
        cached = graph.__dict__["_elastic_matrix"] = _assemble_elastic(graph)
    return cached


def _assemble_elastic(graph: ElasticGraph) -> sp.csc_matrix:
    n = graph.n_nodes
    idx = graph.index
    rows, cols, vals = [], [], []
    for e in graph.edges:
        i, j = idx[e.a], idx[e.b]
        rows += [i, j, i, j]
        cols += [i, j, j, i]
        vals += [e.lam, e.lam, -e.lam, -e.lam]
    for s in graph.stars:
        members = [idx[s.center]] + [idx[v] for v in s.leaves]
        coef = np.full(len(members), -1.0 / s.k)
        coef[0] = 1.0
        for p, cp in zip(members, coef):
            for q, cq in zip(members, coef):
                rows.append(p)
                cols.append(q)
                vals.append(s.mu * cp * cq)
    return sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsc()


def _data_terms(graph: ElasticGraph, dataset: Dataset, partition: Partition):
    """Per-node close weight and weighted coordinate sums, normalized by the
    total weight of the whole dataset."""
    ids = np.asarray(graph.nodes)
    rows = np.searchsorted(ids, partition.owner)
    rows = np.clip(rows, 0, len(ids) - 1)
    if np.any(ids[rows] != partition.owner):
        raise GraphError("partition refers to nodes outside the graph")
    w = np.where(partition.close, dataset.weights, 0.0)
    W = dataset.total_weight
    n = len(ids)
    mass = np.bincount(rows, weights=w, minlength=n) / W
    rhs = np.empty((n, dataset.dim))
    for c in range(dataset.dim):
        rhs[:, c] = np.bincount(rows, weights=w * dataset.points[:, c], minlength=n) / W
    return mass, rhs


def _unconstrained_nodes(graph: ElasticGraph, anchored: np.ndarray) -> np.ndarray:
    """Boolean mask of nodes that move freely along the null space of the
    system matrix. Positive weights do not change the null space, so the
    test runs on unit-weight constraint rows."""
    n = graph.n_nodes
    if not anchored.any():
        return np.ones(n, dtype=bool)
    if all(e.lam > 0 for e in graph.edges):
        # connected through positive springs and pinned somewhere
        return np.zeros(n, dtype=bool)
    idx = graph.index
    rows = [np.eye(n)[i] for i in np.flatnonzero(anchored)]
    for e in graph.edges:
        if e.lam > 0:
            r = np.zeros(n)
            r[idx[e.a]], r[idx[e.b]] = 1.0, -1.0
            rows.append(r)
    for s in graph.stars:
        if s.mu > 0:
            r = np.zeros(n)
            r[idx[s.center]] = 1.0
            for v in s.leaves:
                r[idx[v]] = -1.0 / s.k
            rows.append(r)
    null = scipy.linalg.null_space(np.array(rows), rcond=1e-10)
    if null.shape[1] == 0:
        return np.zeros(n, dtype=bool)
    return np.linalg.norm(null, axis=1) > 1e-8


def solve_positions(
    graph: ElasticGraph,
    dataset: Dataset,
    partition: Partition,
    config: OptimizerConfig,
    emb_prev: Embedding,
) -> Embedding:
    """Exact minimizer of the quadratic surrogate for a frozen partition.

    The system ``(D + K) phi = b`` is shared by all coordinates: ``D`` holds
    the normalized close weight of each node, ``K`` the edge Laplacian plus
    the star terms. Nodes left undetermined by the system (no data and no
    anchoring through positive moduli) receive a proximal term
    ``ridge * |phi - phi_prev|^2`` that keeps them near their previous
    position; with ``ridge == 0`` they raise :class:`SingularSystemError`.
    """
    prev = emb_prev.aligned(graph)
    if prev.shape[1] != dataset.dim:
        raise GraphError(f"embedding dimension {prev.shape[1]} != data dimension {dataset.dim}")
    mass, rhs = _data_terms(graph, dataset, partition)
    A = _elastic_matrix(graph)
    free = _unconstrained_nodes(graph, mass > 0)
    diag = mass.copy()
    if free.any():
        if config.ridge <= 0:
            bad = tuple(int(v) for v in np.asarray(graph.nodes)[free])
            raise SingularSystemError(
                f"position system is singular: nodes {list(bad)} are not anchored by data or "
                "positive moduli; set ridge > 0", bad)
        diag[free] += config.ridge
        rhs[free] += config.ridge * prev[free]
    try:
        if graph.n_nodes <= _DENSE_LIMIT:
            dense = A.toarray()
            dense[np.diag_indices_from(dense)] += diag
            sol = scipy.linalg.cho_solve(scipy.linalg.cho_factor(dense), rhs)
        else:
            sol = splu((A + sp.diags(diag)).tocsc()).solve(rhs)
    except (RuntimeError, np.linalg.LinAlgError) as exc:
        raise SingularSystemError(f"factorization failed: {exc}") from None
    if not np.all(np.isfinite(sol)):
        raise SingularSystemError("position system produced non-finite values")
    return Embedding(graph.nodes, sol)


def surrogate_energy(
    graph: ElasticGraph,
    dataset: Dataset,
    partition: Partition,
    emb: Embedding,
    r0: float = math.inf,
) -> float:
    """Energy minimized by :func:`solve_positions`: close points contribute
    their squared distance to the owner, far points the constant ``r0**2``."""
    pos = emb.aligned(graph)
    ids = np.asarray(graph.nodes)
    rows = np.searchsorted(ids, partition.owner)
    diff = dataset.points - pos[rows]
    sq = np.einsum("ij,ij->i", diff, diff)
    per_point = np.where(partition.close, sq, r0 * r0 if math.isfinite(r0) else 0.0)
    data = math.fsum(dataset.weights * per_point) / dataset.total_weight
    edge, star = graph_energy(graph, emb)
    return math.fsum((data, edge, star))


def fit(
    graph: ElasticGraph,
    dataset: Dataset,
    emb_init: Embedding,
    config: OptimizerConfig | None = None,
) -> tuple[Embedding, Partition, FitTrace]:
    """Alternate partitioning and exact position solves until the partition
    (owners and close flags) stops changing or ``max_iterations`` is hit."""
    config = config or OptimizerConfig()
    emb = Embedding(graph.nodes, emb_init.aligned(graph))
    part = build_partition(dataset, emb, config.r0)
    trace = FitTrace(total_energy(graph, emb, dataset, part, config.mode, config.r0),
                     tolerance=config.energy_tolerance)
    for _ in range(config.max_iterations):
        emb = solve_positions(graph, dataset, part, config, emb)
        new_part = build_partition(dataset, emb, config.r0)
        moved = new_part.changed(part)
        part = new_part
        trace.steps.append((total_energy(graph, emb, dataset, part, config.mode, config.r0), moved))
        if moved == 0:
            trace.converged = True
            break
    return emb, part, trace
