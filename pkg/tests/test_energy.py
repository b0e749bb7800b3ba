import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import special_ortho_group

from rpgraph.energy import (
    DataError, Dataset, Embedding, approx_energy, graph_energy, robust_approx_energy, total_energy,
    trimmed_penalty,
)
from rpgraph.graph import GraphError, new_graph
from rpgraph.optimizer import build_partition


def brute_energy(graph, pos, X, w, r0=math.inf):
    """Loop-by-loop evaluation written without the library's helpers."""
    edge = sum(e.lam * np.sum((pos[e.a] - pos[e.b]) ** 2) for e in graph.edges)
    star = 0.0
    for s in graph.stars:
        m = np.mean([pos[v] for v in s.leaves], axis=0)
        star += s.mu * np.sum((pos[s.center] - m) ** 2)
    data = 0.0
    for x, wi in zip(X, w):
        d2 = min(np.sum((x - p) ** 2) for p in pos)
        data += wi * min(d2, r0 * r0)
    return edge, star, data / w.sum()


def test_hand_computed_instance():
    g = new_graph(3, [(0, 1), (1, 2)], lam=2.0, mu=3.0)
    emb = Embedding((0, 1, 2), np.array([[0.0], [1.0], [3.0]]))
    edge, star = graph_energy(g, emb)
    assert edge == pytest.approx(2.0 * 1 + 2.0 * 4)
    # center 1 vs leaf mean 1.5
    assert star == pytest.approx(3.0 * 0.25)
    ds = Dataset.from_points(np.array([[0.5], [3.0], [10.0]]), weights=[1.0, 2.0, 1.0])
    part = build_partition(ds, emb)
    assert list(part.owner) == [0, 2, 2]
    assert approx_energy(ds, emb, part) == pytest.approx((0.25 + 0 + 49.0) / 4.0)
    assert robust_approx_energy(ds, emb, part, 2.0) == pytest.approx((0.25 + 0 + 4.0) / 4.0)
    rep = total_energy(g, emb, ds, part, "robust", 2.0)
    assert rep.total == pytest.approx(10.0 + 0.75 + 4.25 / 4.0)
    assert rep.robust_mode and rep.to_dict()["r0"] == 2.0


def test_matches_brute_force_on_random_trees():
    rng = np.random.default_rng(3)
    for _ in range(10):
        n = int(rng.integers(2, 9))
        edges = [(int(rng.integers(0, i)), i) for i in range(1, n)]
        g = new_graph(n, edges, lam=float(rng.uniform(0.1, 2)), mu=float(rng.uniform(0.1, 2)))
        pos = rng.normal(size=(n, 3))
        X = rng.normal(size=(40, 3))
        w = rng.uniform(0.5, 2.0, 40)
        ds = Dataset.from_points(X, w)
        emb = Embedding(g.nodes, pos)
        r0 = float(rng.uniform(0.3, 2.0))
        part = build_partition(ds, emb, r0)
        e, s, d = brute_energy(g, pos, X, w, r0)
        rep = total_energy(g, emb, ds, part, "robust", r0)
        assert rep.edge_energy == pytest.approx(e, rel=1e-12)
        assert rep.star_energy == pytest.approx(s, rel=1e-12)
        assert rep.approx_energy == pytest.approx(d, rel=1e-12)


def test_standard_mode_ignores_r0():
    g = new_graph(2, [(0, 1)])
    emb = Embedding((0, 1), np.array([[0.0, 0.0], [1.0, 0.0]]))
    ds = Dataset.from_points(np.array([[5.0, 0.0]]))
    part = build_partition(ds, emb)
    rep = total_energy(g, emb, ds, part, "standard", 0.5)
    assert rep.approx_energy == pytest.approx(16.0)
    assert math.isinf(rep.r0) and rep.to_dict()["r0"] == "inf"


def test_rigid_motion_invariance():
    rng = np.random.default_rng(11)
    g = new_graph(6, [(0, 1), (1, 2), (1, 3), (3, 4), (3, 5)], lam=0.7, mu=1.3)
    pos = rng.normal(size=(6, 4))
    X = rng.normal(size=(100, 4))
    R = special_ortho_group.rvs(4, random_state=5)
    t = rng.normal(size=4)
    ds, ds2 = Dataset.from_points(X), Dataset.from_points(X @ R.T + t)
    e1, e2 = Embedding(g.nodes, pos), Embedding(g.nodes, pos @ R.T + t)
    p1, p2 = build_partition(ds, e1, 1.0), build_partition(ds2, e2, 1.0)
    assert np.array_equal(p1.owner, p2.owner)
    r1 = total_energy(g, e1, ds, p1, "robust", 1.0)
    r2 = total_energy(g, e2, ds2, p2, "robust", 1.0)
    assert r2.total == pytest.approx(r1.total, rel=1e-10)


def test_robust_energy_monotone_in_r0():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(200, 2))
    emb = Embedding((0, 1, 2), rng.normal(size=(3, 2)))
    ds = Dataset.from_points(X)
    part = build_partition(ds, emb)
    vals = [robust_approx_energy(ds, emb, part, r) for r in np.geomspace(0.01, 100, 30)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))
    assert vals[-1] == pytest.approx(approx_energy(ds, emb, part))
    assert robust_approx_energy(ds, emb, part, math.inf) == approx_energy(ds, emb, part)


def test_trimmed_penalty():
    assert np.allclose(trimmed_penalty([0.5, 1.0, 3.0], 1.0), [0.25, 1.0, 1.0])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=2, max_size=6),
       st.floats(1e-3, 10), st.floats(1e-3, 10))
def test_graph_energy_nonnegative_and_zero_for_uniform_path(xs, lam, mu):
    n = len(xs)
    g = new_graph(n, [(i, i + 1) for i in range(n - 1)], lam, mu)
    edge, star = graph_energy(g, Embedding(g.nodes, np.array(xs)))
    assert edge >= 0 and star >= 0
    # evenly spaced collinear nodes are pluri-harmonic along a path
    _, star_lin = graph_energy(g, Embedding(g.nodes, np.arange(n, dtype=float) * xs[0]))
    assert star_lin <= 1e-20 * max(1.0, xs[0] ** 2)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.1, 10), st.integers(0, 1000))
def test_weight_scaling_invariance(c, seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(20, 2))
    w = rng.uniform(0.1, 1, 20)
    emb = Embedding((0, 1), rng.normal(size=(2, 2)))
    d1 = Dataset.from_points(X, w)
    d2 = Dataset.from_points(X, c * w)
    part = build_partition(d1, emb)
    assert approx_energy(d2, emb, part) == pytest.approx(approx_energy(d1, emb, part), rel=1e-12)


def test_dataset_validation():
    with pytest.raises(DataError):
        Dataset.from_points(np.zeros((3, 2)), weights=[1.0, -1.0, 1.0])
    with pytest.raises(DataError):
        Dataset.from_points(np.array([[np.nan, 0.0]]))
    with pytest.raises(DataError):
        Dataset.from_points(np.zeros((0, 2)))
    with pytest.raises(DataError):
        Dataset.from_points(np.zeros((2, 2)), labels=["a"])


def test_embedding_alignment_and_errors():
    g = new_graph(3, [(0, 1), (1, 2)])
    emb = Embedding((0, 1, 2), np.arange(6.0).reshape(3, 2))
    assert np.array_equal(emb.position(2), [4.0, 5.0])
    assert Embedding.from_dict(emb.to_dict()).positions.tolist() == emb.positions.tolist()
    with pytest.raises(GraphError):
        Embedding((0, 1), np.zeros((2, 2))).aligned(g)
    with pytest.raises(GraphError):
        Embedding((1, 0), np.zeros((2, 2)))
    with pytest.raises(ValueError):
        robust_approx_energy(Dataset.from_points(np.zeros((1, 2))), emb, build_partition(
            Dataset.from_points(np.zeros((1, 2))), emb), 0.0)
