import math

import numpy as np
import pytest
from scipy.spatial import cKDTree

from rpgraph.data import PatternSpec, generate_pattern
from rpgraph.energy import DataError, Dataset
from rpgraph.grammar import grow
from rpgraph.pipeline import (
    EpochSpec, LocalNeighborhood, PrincipalSegment, hybrid_preset, initialize, run_epochs,
)


def test_principal_segment_symmetric_data():
    X = np.array([[-2.0, 0.0], [-1.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
    g, emb = initialize(Dataset.from_points(X), PrincipalSegment())
    s = 0.5 * math.sqrt(np.mean(X[:, 0] ** 2))
    assert g.n_nodes == 2 and len(g.edges) == 1
    assert np.allclose(sorted(emb.positions[:, 0]), [-s, s])
    assert np.allclose(emb.positions[:, 1], 0.0)


def test_principal_segment_two_points():
    X = np.array([[1.0, 1.0], [3.0, 2.0]])
    _, emb = initialize(Dataset.from_points(X), PrincipalSegment())
    d = X[1] - X[0]
    for p in emb.positions:
        v = p - X[0]
        assert abs(v[0] * d[1] - v[1] * d[0]) < 1e-12


def test_local_neighborhood_picks_dense_spot():
    rng = np.random.default_rng(0)
    dense = 0.01 * rng.normal(size=(30, 2)) + [5.0, 5.0]
    sparse = rng.uniform(-10, 10, size=(200, 2))
    ds = Dataset.from_points(np.vstack([sparse, dense]))
    strat = LocalNeighborhood(seed=3, k_density=10)
    _, emb = initialize(ds, strat)
    assert np.all(np.linalg.norm(emb.positions - [5.0, 5.0], axis=1) < 0.1)
    _, again = initialize(ds, strat)
    assert np.array_equal(emb.positions, again.positions)


def test_initialize_errors():
    with pytest.raises(DataError):
        initialize(Dataset.from_points(np.zeros((1, 2))), PrincipalSegment())
    with pytest.raises(DataError):
        initialize(Dataset.from_points(np.zeros((3, 2))), LocalNeighborhood(k_density=5))


def test_epoch_spec_round_trip():
    for spec in [EpochSpec(), EpochSpec("robust", 0.001, 0.01, 0.2, 30, 5, 1e-4)]:
        assert EpochSpec.from_dict(spec.to_dict()) == spec
    assert EpochSpec().to_dict()["growth"] == "fit-only"
    with pytest.raises(ValueError):
        EpochSpec("robust")
    with pytest.raises(ValueError):
        EpochSpec.from_dict({"growth": "forever"})


def test_hybrid_preset():
    a, b = hybrid_preset(0.1, 1.0, 0.5, 8, 20, reduce_factor=10)
    assert (a.mode, a.lam, a.mu, a.max_nodes) == ("standard", 0.1, 1.0, 8)
    assert (b.mode, b.lam, b.mu, b.r0, b.max_nodes) == ("robust", 0.01, 0.1, 0.5, 20)


@pytest.fixture(scope="module")
def segment_data():
    return generate_pattern(PatternSpec("segment", 300, jitter=0.03, seed=5))


def test_single_epoch_equals_grow(segment_data):
    spec = EpochSpec("standard", 0.01, 0.1, max_nodes=6)
    g1, e1, res = run_epochs(segment_data, [spec])
    g0, e0 = initialize(segment_data, PrincipalSegment(), 0.01, 0.1)
    g2, e2, hist = grow(segment_data, g0, e0, spec.growth())
    assert g1 == g2 and res[0].records == hist
    assert np.array_equal(e1.positions, e2.positions)


def test_fit_only_epoch_at_fixed_point(segment_data):
    grown = EpochSpec("standard", 0.01, 0.1, max_nodes=6)
    _, _, res = run_epochs(segment_data, [grown, EpochSpec("standard", 0.01, 0.1)])
    assert res[0].records[-1]["converged"]
    fit_log = res[1].records
    assert all(r["reassigned"] == 0 for r in fit_log)
    assert np.allclose(res[0].embedding.positions, res[1].embedding.positions, atol=1e-12)


def test_empty_epoch_list(segment_data):
    with pytest.raises(ValueError):
        run_epochs(segment_data, [])


@pytest.mark.slow
def test_hybrid_on_two_cluster_composite():
    y = generate_pattern(PatternSpec("y_branch", 300, jitter=0.02, seed=1)).points
    line = generate_pattern(PatternSpec("segment", 200, jitter=0.02, seed=2)).points + [3.0, 0.0]
    ds = Dataset.from_points(np.vstack([y, line]))
    r0 = 0.1
    epochs = [EpochSpec("standard", 0.01, 0.1, math.inf, 12), EpochSpec("robust", 0.001, 0.01, r0, 30)]
    _, emb, res = run_epochs(ds, epochs)
    first = res[0].embedding.positions
    # the coarse tree reaches into both clusters
    assert (first[:, 0] < 0.5).any() and (first[:, 0] > 2.5).any()
    tree = cKDTree(ds.points)
    near = tree.query(emb.positions)[0] <= r0
    assert near.mean() >= 0.9
    assert near.mean() > (tree.query(first)[0] <= r0).mean()
