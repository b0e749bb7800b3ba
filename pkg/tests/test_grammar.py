import math
from dataclasses import replace

import numpy as np
import pytest

from rpgraph.energy import Dataset, Embedding
from rpgraph.grammar import (
    AddNodeToNode, BisectEdge, GrowthConfig, apply_add_node, apply_bisect_edge, apply_op,
    enumerate_candidates, grow,
)
from rpgraph.graph import GraphError, new_graph
from rpgraph.optimizer import OptimizerConfig, build_partition, fit


@pytest.fixture
def line_data():
    rng = np.random.default_rng(0)
    t = rng.uniform(0, 4, 300)
    X = np.column_stack([t, 0.05 * rng.normal(size=300)])
    return Dataset.from_points(X)


def test_candidates_on_tree():
    g = new_graph(4, [(0, 1), (1, 2), (1, 3)])
    ops = enumerate_candidates(g)
    assert len(ops) == 2 * g.n_nodes - 1
    assert ops[:4] == [AddNodeToNode(n) for n in range(4)]
    assert ops[4:] == [BisectEdge((0, 1)), BisectEdge((1, 2)), BisectEdge((1, 3))]
    assert ops[4].to_dict() == {"kind": "bisect_edge", "edge": [0, 1]}


def test_add_node_at_mean_of_close_points():
    g = new_graph(2, [(0, 1)], 0.3, 0.4)
    emb = Embedding((0, 1), np.array([[0.0, 0.0], [1.0, 0.0]]))
    ds = Dataset.from_points(np.array([[1.2, 0.0], [1.4, 0.2], [0.0, 0.1], [9.0, 9.0]]), [1.0, 3.0, 1.0, 1.0])
    part = build_partition(ds, emb, r0=1.0)
    g2, e2 = apply_add_node(g, emb, 1, ds, part, mu=0.4)
    assert g2.n_nodes == 3 and g2.has_edge(1, 2)
    assert np.allclose(e2.position(2), [(1.2 + 3 * 1.4) / 4, 0.6 / 4])
    assert g2.edge_map[(1, 2)].lam == 0.3 and g2.stars[0].mu == 0.4


def test_add_node_extrapolates_without_data():
    g = new_graph(2, [(0, 1)])
    emb = Embedding((0, 1), np.array([[0.0, 0.0], [1.0, 2.0]]))
    ds = Dataset.from_points(np.array([[0.0, 0.0]]))
    part = build_partition(ds, emb)
    _, e2 = apply_add_node(g, emb, 1, ds, part)
    assert np.allclose(e2.position(2), [2.0, 4.0])
    with pytest.raises(GraphError):
        apply_add_node(g, emb, 5, ds, part)


def test_bisect_midpoint():
    g = new_graph(3, [(0, 1), (1, 2)], lam=0.2)
    emb = Embedding((0, 1, 2), np.array([[0.0], [2.0], [3.0]]))
    g2, e2 = apply_bisect_edge(g, emb, (2, 1))
    assert e2.position(3)[0] == 2.5
    assert g2.edge_map[(1, 3)].lam == 0.2 and g2.edge_map[(2, 3)].lam == 0.2
    with pytest.raises(GraphError):
        apply_bisect_edge(g, emb, (0, 2))


def test_growth_picks_the_lowest_trial_energy(line_data):
    g = new_graph(2, [(0, 1)], 0.01, 0.1)
    emb0 = Embedding((0, 1), np.array([[1.0, 0.0], [3.0, 0.0]]))
    cfg = GrowthConfig(max_nodes=4, trial_iterations=5)
    graph, emb, hist = grow(line_data, g, emb0, cfg)
    assert graph.n_nodes == 4 and graph.is_tree()
    assert [h["nodes"] for h in hist] == [2, 3, 4]

    # replay step 1 by hand
    e_fit, part, _ = fit(g, line_data, emb0)
    trial_cfg = replace(cfg.optimizer, max_iterations=5)
    energies = []
    for op in enumerate_candidates(g):
        g2, e2 = apply_op(g, e_fit, op, line_data, part, 0.01, 0.1)
        energies.append(fit(g2, line_data, e2, trial_cfg)[2].totals[-1])
    best = int(np.argmin(energies))
    assert hist[1]["op"] == enumerate_candidates(g)[best].to_dict()
    assert hist[1]["trial_energy"] == energies[best]
    assert hist[1]["candidates"] == 3
    for h in hist[1:]:
        assert h["energy_after"] <= h["trial_energy"] + 1e-12


def test_max_nodes_at_initial_size_returns_initial(line_data):
    g = new_graph(2, [(0, 1)], 0.01, 0.1)
    emb0 = Embedding((0, 1), np.array([[1.0, 0.0], [3.0, 0.0]]))
    graph, emb, hist = grow(line_data, g, emb0, GrowthConfig(max_nodes=2))
    assert graph == g and len(hist) == 1 and hist[0]["op"] is None


def test_infinite_threshold_applies_no_operation(line_data):
    g = new_graph(2, [(0, 1)], 0.01, 0.1)
    emb0 = Embedding((0, 1), np.array([[1.0, 0.0], [3.0, 0.0]]))
    graph, _, hist = grow(line_data, g, emb0, GrowthConfig(max_nodes=10, min_energy_improvement=math.inf))
    assert graph.n_nodes == 2 and len(hist) == 1


def test_relative_improvement_threshold_stops_early(line_data):
    g = new_graph(2, [(0, 1)], 0.01, 0.1)
    emb0 = Embedding((0, 1), np.array([[1.0, 0.0], [3.0, 0.0]]))
    _, _, full = grow(line_data, g, emb0, GrowthConfig(max_nodes=12))
    gains = [(a["energy_after"] - b["trial_energy"]) / a["energy_after"] for a, b in zip(full, full[1:])]
    cut = 0.5 * (min(gains) + max(gains))
    graph, _, hist = grow(line_data, g, emb0, GrowthConfig(max_nodes=12, min_energy_improvement=cut))
    expected = next(i for i, v in enumerate(gains) if v < cut)
    assert graph.n_nodes == 2 + expected
    assert len(hist) == 1 + expected


def test_jobs_do_not_change_the_result(line_data):
    g = new_graph(2, [(0, 1)], 0.01, 0.1)
    emb0 = Embedding((0, 1), np.array([[1.0, 0.0], [3.0, 0.0]]))
    cfg = GrowthConfig(max_nodes=7, optimizer=OptimizerConfig("robust", 0.3))
    g1, e1, h1 = grow(line_data, g, emb0, cfg)
    g4, e4, h4 = grow(line_data, g, emb0, replace(cfg, jobs=4))
    assert g1 == g4 and h1 == h4
    assert np.array_equal(e1.positions, e4.positions)


def test_growth_config_validation():
    with pytest.raises(ValueError):
        GrowthConfig(max_nodes=0)
    with pytest.raises(ValueError):
        GrowthConfig(max_nodes=3, min_energy_improvement=-1)
