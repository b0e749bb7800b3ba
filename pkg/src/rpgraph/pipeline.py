"""Initialization and multi-epoch training.

The hybrid recipe runs a coarse non-robust growth first, then continues from
that tree with a robust, less elastic epoch that resolves local structure.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .data import pca_fit
from .energy import DataError, Dataset, Embedding
from .grammar import GrowthConfig, grow
from .graph import ElasticGraph, new_graph, with_moduli
from .optimizer import OptimizerConfig, fit

_DENSITY_SAMPLE = 5000


@dataclass(frozen=True)
class PrincipalSegment:
    """Two nodes at ``mean +- s*v``; ``v`` the first principal axis and ``s``
    half the standard deviation along it."""


@dataclass(frozen=True)
class LocalNeighborhood:
    """Two nodes inside the densest k-nearest-neighbour ball."""

    seed: int = 0
    k_density: int = 10


InitStrategy = PrincipalSegment | LocalNeighborhood


def initialize(dataset: Dataset, strategy: InitStrategy, lam: float = 1.0, mu: float = 1.0
               ) -> tuple[ElasticGraph, Embedding]:
    if dataset.n < 2:
        raise DataError("initialization needs at least two points")
    graph = new_graph(2, [(0, 1)], lam, mu)
    if isinstance(strategy, PrincipalSegment):
        model = pca_fit(dataset, 1)
        s = 0.5 * math.sqrt(model.explained_variance[0])
        v = model.components[0]
        pos = np.vstack([model.mean - s * v, model.mean + s * v])
        return graph, Embedding(graph.nodes, pos)
    k = strategy.k_density
    if not 1 <= k < dataset.n:
        raise DataError(f"k_density must be in [1, {dataset.n - 1}], got {k}")
    X = dataset.points
    cand = np.arange(dataset.n)
    if dataset.n > _DENSITY_SAMPLE:
        rng = np.random.default_rng(strategy.seed)
        cand = np.sort(rng.choice(dataset.n, _DENSITY_SAMPLE, replace=False))
    tree = cKDTree(X)
    dist, nbr = tree.query(X[cand], k=k + 1)
    # column 0 is the point itself; density ~ 1 / radius of the k-NN ball
    best = int(np.argmin(dist[:, k]))
    centre = cand[best]
    neigh = nbr[best, 1:]
    pos = np.vstack([X[centre], X[neigh].mean(axis=0)])
    return graph, Embedding(graph.nodes, pos)


@dataclass(frozen=True)
class EpochSpec:
    mode: str = "standard"
    lam: float = 0.01
    mu: float = 0.1
    r0: float = math.inf
    max_nodes: int | None = None  # None: fit only, no growth
    trial_iterations: int = 10
    min_energy_improvement: float = 0.0
    max_iterations: int = 100
    ridge: float = 1e-9

    def __post_init__(self):
        if self.mode == "robust" and not math.isfinite(self.r0):
            raise ValueError("robust epoch requires a finite r0")

    def optimizer(self) -> OptimizerConfig:
        return OptimizerConfig(self.mode, self.r0, self.max_iterations, ridge=self.ridge)

    def growth(self, jobs: int = 1) -> GrowthConfig:
        return GrowthConfig(self.max_nodes, self.lam, self.mu, self.trial_iterations,
                            self.min_energy_improvement, self.optimizer(), jobs)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode, "lambda": self.lam, "mu": self.mu,
            "r0": self.r0 if math.isfinite(self.r0) else "inf",
            "growth": "fit-only" if self.max_nodes is None else {
                "max_nodes": self.max_nodes, "trial_iterations": self.trial_iterations,
                "min_energy_improvement": self.min_energy_improvement,
            },
            "max_iterations": self.max_iterations, "ridge": self.ridge,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "EpochSpec":
        growth = doc.get("growth", "fit-only")
        kw = {}
        if isinstance(growth, dict):
            kw["max_nodes"] = int(growth["max_nodes"])
            for key in ("trial_iterations", "min_energy_improvement"):
                if key in growth:
                    kw[key] = type(getattr(cls, key))(growth[key])
        elif growth != "fit-only":
            raise ValueError(f"growth must be an object or 'fit-only', got {growth!r}")
        r0 = doc.get("r0", "inf")
        return cls(
            mode=doc.get("mode", "standard"),
            lam=float(doc.get("lambda", cls.lam)),
            mu=float(doc.get("mu", cls.mu)),
            r0=float(r0),
            max_iterations=int(doc.get("max_iterations", cls.max_iterations)),
            ridge=float(doc.get("ridge", cls.ridge)),
            **kw,
        )


@dataclass
class EpochResult:
    spec: EpochSpec
    graph: ElasticGraph
    embedding: Embedding
    records: list[dict] = field(default_factory=list)


def hybrid_preset(lam: float, mu: float, r0: float, coarse_nodes: int, fine_nodes: int,
                  reduce_factor: float = 10.0, trial_iterations: int = 10) -> list[EpochSpec]:
    """Coarse standard growth, then robust growth with moduli divided by
    ``reduce_factor``."""
    return [
        EpochSpec("standard", lam, mu, math.inf, coarse_nodes, trial_iterations),
        EpochSpec("robust", lam / reduce_factor, mu / reduce_factor, r0, fine_nodes, trial_iterations),
    ]


def run_epochs(
    dataset: Dataset,
    epochs: list[EpochSpec],
    strategy: InitStrategy | None = None,
    jobs: int = 1,
    start: tuple[ElasticGraph, Embedding] | None = None,
) -> tuple[ElasticGraph, Embedding, list[EpochResult]]:
    """Run ``epochs`` in sequence; each starts from the previous epoch's
    graph and embedding with its own moduli, mode and radius."""
    if not epochs:
        raise ValueError("at least one epoch is required")
    if start is None:
        graph, emb = initialize(dataset, strategy or PrincipalSegment(), epochs[0].lam, epochs[0].mu)
    else:
        graph, emb = start
    results = []
    for spec in epochs:
        graph = with_moduli(graph, spec.lam, spec.mu)
        if spec.max_nodes is None:
            emb, _, trace = fit(graph, dataset, emb, spec.optimizer())
            records = trace.records()
        else:
            graph, emb, records = grow(dataset, graph, emb, spec.growth(jobs))
        results.append(EpochResult(spec, graph, emb, records))
    return graph, emb, results
