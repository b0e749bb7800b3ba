import pytest

from rpgraph.graph import (
    Edge, ElasticGraph, GraphError, Star, add_leaf, new_graph, rebuild_stars, split_edge, with_moduli,
)


def path(n, lam=1.0, mu=1.0):
    return new_graph(n, [(i, i + 1) for i in range(n - 1)], lam, mu)


def test_primitive_stars_follow_degrees():
    g = new_graph(5, [(0, 1), (1, 2), (1, 3), (3, 4)], lam=0.5, mu=2.0)
    assert [(s.center, s.leaves) for s in g.stars] == [(1, (0, 2, 3)), (3, (1, 4))]
    assert all(s.mu == 2.0 for s in g.stars)
    assert all(e.lam == 0.5 for e in g.edges)
    assert g.degree(1) == 3 and g.degree(4) == 1
    assert g.is_tree()


def test_non_primitive_graph_has_no_stars():
    g = new_graph(3, [(0, 1), (1, 2)], primitive=False)
    assert g.stars == ()
    with pytest.raises(GraphError):
        rebuild_stars(g, 1.0)


def test_edges_are_normalized():
    e = Edge(5, 2, 1.0)
    assert e.key == (2, 5)
    g = new_graph(3, [(2, 1), (1, 0)])
    assert [e.key for e in g.edges] == [(0, 1), (1, 2)]


@pytest.mark.parametrize("edges", [
    [(0, 1), (0, 1)],
    [(0, 0)],
    [(0, 3)],
    [(0, 1)],  # node 2 isolated
])
def test_invalid_topologies_rejected(edges):
    with pytest.raises(GraphError):
        new_graph(3, edges)


def test_negative_modulus_rejected():
    with pytest.raises(GraphError):
        Edge(0, 1, -1.0)


def test_single_node_graph():
    g = new_graph(1, [])
    assert g.n_nodes == 1 and g.edges == () and g.stars == ()
    assert g.is_tree()


def test_cycle_is_not_tree():
    g = new_graph(3, [(0, 1), (1, 2), (0, 2)])
    assert not g.is_tree()
    assert len(g.stars) == 3


def test_add_leaf_updates_stars_and_ids():
    g = path(2)
    assert g.stars == ()
    g2, z = add_leaf(g, 1, 0.1, 0.2)
    assert z == 2 and g2.next_id == 3
    assert g2.has_edge(1, 2) and g2.edge_map[(1, 2)].lam == 0.1
    assert [(s.center, s.leaves, s.mu) for s in g2.stars] == [(1, (0, 2), 0.2)]
    # original untouched
    assert g.n_nodes == 2
    with pytest.raises(GraphError):
        add_leaf(g, 7, 1.0, 1.0)


def test_split_edge_inherits_modulus():
    g = new_graph(3, [(0, 1), (1, 2)], lam=0.3)
    g2, z = split_edge(g, 2, 1, None, 1.0)
    assert z == 3
    assert not g2.has_edge(1, 2)
    assert g2.edge_map[(1, 3)].lam == 0.3 and g2.edge_map[(2, 3)].lam == 0.3
    assert g2.degree(3) == 2
    assert {s.center for s in g2.stars} == {1, 3}
    with pytest.raises(GraphError):
        split_edge(g, 0, 2, None, 1.0)


def test_ids_never_reused():
    g = path(3)
    g2, z1 = add_leaf(g, 0, 1.0, 1.0)
    g3, z2 = split_edge(g2, 0, z1, None, 1.0)
    assert len({0, 1, 2, z1, z2}) == 5
    assert g3.nodes == tuple(sorted(g3.nodes))


def test_dict_round_trip():
    g = new_graph(4, [(0, 1), (1, 2), (1, 3)], lam=0.25, mu=0.75)
    doc = g.to_dict()
    assert doc["primitive"] is True
    assert ElasticGraph.from_dict(doc) == g


def test_from_dict_rejects_bad_star():
    doc = new_graph(3, [(0, 1), (1, 2)]).to_dict()
    doc["stars"][0]["leaves"] = [0]
    with pytest.raises(GraphError):
        ElasticGraph.from_dict(doc)


def test_with_moduli_and_rebuild_identity():
    g = path(4)
    h = with_moduli(g, 0.01, 0.1)
    assert {e.lam for e in h.edges} == {0.01}
    assert {s.mu for s in h.stars} == {0.1}
    assert rebuild_stars(h, 0.1) is h


def test_star_k():
    assert Star(0, (1, 2, 3), 1.0).k == 3
