"""Elastic graph topology: nodes, edges with stretching moduli, k-stars with
bending moduli, and the primitive-graph rule that derives stars from degrees.

Graphs are immutable. Topology edits (see :mod:`rpgraph.grammar`) return new
instances; node ids are allocated monotonically and never recycled.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components


class GraphError(ValueError):
    """Invalid topology or reference to a node/edge that does not exist."""


@dataclass(frozen=True)
class Edge:
    a: int
    b: int
    lam: float

    def __post_init__(self):
        if self.a == self.b:
            raise GraphError(f"edge ({self.a}, {self.b}) is a self-loop")
        if self.a > self.b:
            a, b = self.b, self.a
            object.__setattr__(self, "a", a)
            object.__setattr__(self, "b", b)
        if not self.lam >= 0:
            raise GraphError(f"edge ({self.a}, {self.b}) has invalid modulus {self.lam}")

    @property
    def key(self) -> tuple[int, int]:
        return (self.a, self.b)


@dataclass(frozen=True)
class Star:
    center: int
    leaves: tuple[int, ...]
    mu: float

    @property
    def k(self) -> int:
        return len(self.leaves)


@dataclass(frozen=True)
class ElasticGraph:
    """Undirected, simple, connected graph with elastic moduli.

    ``nodes`` is sorted ascending; ``edges`` are stored with ``a < b`` and
    sorted lexicographically; ``stars`` are sorted by center. ``next_id`` is
    the id the next inserted node receives.
    """

    nodes: tuple[int, ...]
    edges: tuple[Edge, ...]
    stars: tuple[Star, ...]
    primitive: bool = True
    next_id: int = field(default=-1)

    def __post_init__(self):
        if self.next_id < 0:
            object.__setattr__(self, "next_id", (max(self.nodes) + 1) if self.nodes else 0)

    @cached_property
    def index(self) -> dict[int, int]:
        """NodeId -> row index into embedding arrays."""
        return {n: i for i, n in enumerate(self.nodes)}

    @cached_property
    def adjacency(self) -> dict[int, tuple[int, ...]]:
        nbrs: dict[int, list[int]] = {n: [] for n in self.nodes}
        for e in self.edges:
            nbrs[e.a].append(e.b)
            nbrs[e.b].append(e.a)
        return {n: tuple(sorted(v)) for n, v in nbrs.items()}

    @cached_property
    def edge_map(self) -> dict[tuple[int, int], Edge]:
        return {e.key: e for e in self.edges}

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    def neighbors(self, node: int) -> tuple[int, ...]:
        try:
            return self.adjacency[node]
        except KeyError:
            raise GraphError(f"unknown node {node}") from None

    def degree(self, node: int) -> int:
        return len(self.neighbors(node))

    def has_edge(self, a: int, b: int) -> bool:
        return (min(a, b), max(a, b)) in self.edge_map

    def is_tree(self) -> bool:
        return len(self.edges) == len(self.nodes) - 1 and _is_connected(self.nodes, self.edges)

    def to_dict(self) -> dict:
        return {
            "nodes": [{"id": n} for n in self.nodes],
            "edges": [{"a": e.a, "b": e.b, "lambda": e.lam} for e in self.edges],
            "stars": [{"center": s.center, "leaves": list(s.leaves), "mu": s.mu} for s in self.stars],
            "primitive": self.primitive,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ElasticGraph":
        try:
            nodes = tuple(sorted(int(n["id"]) for n in doc["nodes"]))
            edges = [Edge(int(e["a"]), int(e["b"]), float(e["lambda"])) for e in doc["edges"]]
            stars = [Star(int(s["center"]), tuple(int(v) for v in s["leaves"]), float(s["mu"]))
                     for s in doc.get("stars", [])]
        except (KeyError, TypeError, ValueError) as exc:
            raise GraphError(f"malformed graph document: {exc}") from None
        primitive = bool(doc.get("primitive", True))
        g = _assemble(nodes, edges, stars, primitive)
        _check_stars(g)
        return g


def _is_connected(nodes: Sequence[int], edges: Iterable[Edge]) -> bool:
    if len(nodes) <= 1:
        return True
    idx = {n: i for i, n in enumerate(nodes)}
    rows, cols = [], []
    for e in edges:
        rows.append(idx[e.a])
        cols.append(idx[e.b])
    adj = coo_matrix(([1] * len(rows), (rows, cols)), shape=(len(nodes), len(nodes)))
    n_comp, _ = connected_components(adj, directed=False)
    return n_comp == 1


def _assemble(nodes, edges, stars, primitive, next_id=-1) -> ElasticGraph:
    node_set = set(nodes)
    if len(node_set) != len(nodes):
        raise GraphError("duplicate node ids")
    seen = set()
    for e in edges:
        for v in (e.a, e.b):
            if v not in node_set:
                raise GraphError(f"edge ({e.a}, {e.b}) references unknown node {v}")
        if e.key in seen:
            raise GraphError(f"duplicate edge ({e.a}, {e.b})")
        seen.add(e.key)
    edges = tuple(sorted(edges, key=lambda e: e.key))
    if not _is_connected(nodes, edges):
        comp_free = [n for n in nodes if not any(n in (e.a, e.b) for e in edges)]
        hint = f"; node {comp_free[0]} has no edges" if comp_free else ""
        raise GraphError(f"graph is not connected{hint}")
    stars = tuple(sorted(stars, key=lambda s: s.center))
    return ElasticGraph(tuple(sorted(nodes)), edges, stars, primitive, next_id)


def _check_stars(g: ElasticGraph) -> None:
    for s in g.stars:
        if s.k < 2:
            raise GraphError(f"star at {s.center} has fewer than 2 leaves")
        if s.center in s.leaves or len(set(s.leaves)) != s.k:
            raise GraphError(f"star at {s.center} has repeated nodes")
        for leaf in s.leaves:
            if not g.has_edge(s.center, leaf):
                raise GraphError(f"star leaf {leaf} is not adjacent to center {s.center}")
        if not s.mu >= 0:
            raise GraphError(f"star at {s.center} has invalid modulus {s.mu}")


def primitive_stars(nodes: Sequence[int], edges: Iterable[Edge], mu: float) -> tuple[Star, ...]:
    nbrs: dict[int, list[int]] = {n: [] for n in nodes}
    for e in edges:
        nbrs[e.a].append(e.b)
        nbrs[e.b].append(e.a)
    return tuple(Star(n, tuple(sorted(v)), mu) for n, v in sorted(nbrs.items()) if len(v) >= 2)


def new_graph(
    node_count: int,
    edges: Sequence[tuple[int, int]],
    lam: float = 1.0,
    mu: float = 1.0,
    primitive: bool = True,
) -> ElasticGraph:
    """Build a graph on nodes ``0 .. node_count-1``.

    Every edge gets modulus ``lam``. With ``primitive=True`` every node of
    degree >= 2 becomes the center of one star over all its neighbours, with
    modulus ``mu``; otherwise the graph carries no stars.

    Raises
    ------
    GraphError
        If an edge repeats, is a self-loop, references a missing node, or the
        graph is disconnected.
    """
    if node_count < 1:
        raise GraphError("node_count must be positive")
    nodes = tuple(range(node_count))
    es = [Edge(int(a), int(b), float(lam)) for a, b in edges]
    for e in es:
        if e.b >= node_count or e.a < 0:
            raise GraphError(f"edge {e.key} references a missing node")
    stars = primitive_stars(nodes, es, float(mu)) if primitive else ()
    return _assemble(nodes, es, stars, primitive)


def rebuild_stars(graph: ElasticGraph, mu: float) -> ElasticGraph:
    """Re-derive the star list of a primitive graph from its current degrees."""
    if not graph.primitive:
        raise GraphError("rebuild_stars requires a primitive graph")
    stars = primitive_stars(graph.nodes, graph.edges, mu)
    if stars == graph.stars:
        return graph
    return ElasticGraph(graph.nodes, graph.edges, stars, True, graph.next_id)


def degree(graph: ElasticGraph, node: int) -> int:
    return graph.degree(node)


def with_moduli(graph: ElasticGraph, lam: float, mu: float) -> ElasticGraph:
    """Copy of ``graph`` with every edge modulus set to ``lam`` and every star to ``mu``."""
    edges = tuple(Edge(e.a, e.b, lam) for e in graph.edges)
    stars = tuple(Star(s.center, s.leaves, mu) for s in graph.stars)
    return ElasticGraph(graph.nodes, edges, stars, graph.primitive, graph.next_id)


def add_leaf(graph: ElasticGraph, target: int, lam: float, mu: float) -> tuple[ElasticGraph, int]:
    """Attach a fresh node to ``target``. Returns the new graph and the new id."""
    if target not in graph.index:
        raise GraphError(f"unknown node {target}")
    z = graph.next_id
    nodes = graph.nodes + (z,)
    edges = graph.edges + (Edge(target, z, lam),)
    return _regrow(graph, nodes, edges, mu, z + 1), z


def split_edge(graph: ElasticGraph, a: int, b: int, lam: float | None, mu: float) -> tuple[ElasticGraph, int]:
    """Replace edge (a, b) by (a, z), (z, b). Both halves inherit the old modulus
    unless ``lam`` is given."""
    key = (min(a, b), max(a, b))
    old = graph.edge_map.get(key)
    if old is None:
        raise GraphError(f"unknown edge {key}")
    lam = old.lam if lam is None else lam
    z = graph.next_id
    nodes = graph.nodes + (z,)
    edges = tuple(e for e in graph.edges if e.key != key) + (Edge(key[0], z, lam), Edge(z, key[1], lam))
    return _regrow(graph, nodes, edges, mu, z + 1), z


def _regrow(graph, nodes, edges, mu, next_id) -> ElasticGraph:
    edges = tuple(sorted(edges, key=lambda e: e.key))
    if graph.primitive:
        stars = primitive_stars(nodes, edges, mu)
    else:
        stars = graph.stars
    return ElasticGraph(tuple(nodes), edges, stars, graph.primitive, next_id)
