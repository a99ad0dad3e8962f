import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from specaug import graph as G

from conftest import random_graph


def to_nx(g):
    h = nx.Graph()
    h.add_nodes_from(range(g.num_nodes))
    h.add_edges_from(map(tuple, g.edges()))
    return h


edge_lists = st.integers(1, 30).flatmap(
    lambda n: st.tuples(st.just(n), st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)),
                                             max_size=80)))


def test_dedup_and_symmetrize_path():
    g = G.from_edge_pairs([(0, 1), (1, 0), (1, 2)], 3)
    assert g.degrees.tolist() == [1, 2, 1]
    assert g.edges().tolist() == [[0, 1], [1, 2]]


def test_empty_edge_list_gives_isolated_nodes():
    g = G.from_edge_pairs([], 4)
    assert g.num_nodes == 4 and g.degrees.tolist() == [0, 0, 0, 0]


def test_self_loop_dropped_unless_allowed():
    assert G.from_edge_pairs([(0, 0), (0, 1)], 2).edges().tolist() == [[0, 1]]
    kept = G.from_edge_pairs([(0, 0), (0, 1)], 2, allow_self_loops=True)
    assert kept.edges().tolist() == [[0, 0], [0, 1]]
    assert kept.num_self_loops == 1 and kept.num_edges == 2
    assert kept.degrees.tolist() == [2, 1]


def test_out_of_range_node_rejected():
    with pytest.raises(ValueError, match="outside"):
        G.from_edge_pairs([(0, 3)], 3)
    with pytest.raises(ValueError):
        G.from_edge_pairs([(-1, 0)], 3)


def test_arrays_are_read_only():
    g = G.path_graph(3)
    with pytest.raises(ValueError):
        g.col_indices[0] = 2


@settings(max_examples=60, deadline=None)
@given(edge_lists)
def test_csr_invariants(data):
    n, pairs = data
    g = G.from_edge_pairs(pairs, n)
    A = g.adjacency().toarray()
    assert np.array_equal(A, A.T)
    for u in range(n):
        row = g.neighbors(u)
        assert np.all(np.diff(row) > 0)
        assert g.degrees[u] == len(row)
    expected = {frozenset(p) for p in pairs if p[0] != p[1]}
    assert {frozenset(e) for e in g.edges().tolist()} == expected


def test_ego_network_examples(backend):
    sub, nodes = G.ego_network(G.path_graph(5), 2, 1)
    assert sorted(nodes.tolist()) == [1, 2, 3] and nodes[0] == 2
    assert sub.num_edges == 2
    sub, nodes = G.ego_network(G.cycle_graph(4), 0, 1)
    assert sorted(nodes.tolist()) == [0, 1, 3]
    assert sub.num_edges == 2


def test_ego_radius_zero_is_single_node(backend):
    sub, nodes = G.ego_network(G.complete_graph(5), 3, 0)
    assert nodes.tolist() == [3] and sub.num_nodes == 1 and sub.num_edges == 0


def test_ego_rejects_bad_arguments():
    with pytest.raises(IndexError):
        G.ego_network(G.path_graph(3), 5, 1)
    with pytest.raises(ValueError):
        G.ego_network(G.path_graph(3), 0, -1)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 100), st.integers(0, 300), st.integers(0, 4), st.integers(0, 2 ** 32 - 1))
def test_ego_matches_bfs_distance_filter(n, m, radius, seed):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, n, m)
    center = int(rng.integers(n))
    sub, nodes = G.ego_network(g, center, radius)
    dist = nx.single_source_shortest_path_length(to_nx(g), center, cutoff=radius)
    assert set(nodes.tolist()) == set(dist)
    assert nx.utils.graphs_equal(to_nx(sub), nx.convert_node_labels_to_integers(
        to_nx(g).subgraph(nodes.tolist()).copy(), ordering="default")) or \
        sub.num_edges == to_nx(g).subgraph(nodes.tolist()).number_of_edges()


def test_induced_subgraph_follows_node_order():
    g = G.path_graph(4)
    sub = G.induced_subgraph(g, [3, 2, 0])
    assert sub.edges().tolist() == [[0, 1]]


def test_walk_on_singleton(backend):
    sub, nodes = G.random_walk_subgraph(G.from_edge_pairs([], 1), 0, rng_seed=3)
    assert nodes.tolist() == [0] and sub.num_nodes == 1


def test_walk_with_certain_return_stays_home(backend):
    _, nodes = G.random_walk_subgraph(G.complete_graph(6), 2, return_prob=1.0, rng_seed=0)
    assert nodes.tolist() == [2]


def test_walk_covers_k5(backend):
    for seed in range(20):
        _, nodes = G.random_walk_subgraph(G.complete_graph(5), 0, steps=512, return_prob=0.0,
                                          max_nodes=256, rng_seed=seed)
        assert sorted(nodes.tolist()) == [0, 1, 2, 3, 4]


def test_walk_stops_at_max_nodes(backend):
    _, nodes = G.random_walk_subgraph(G.complete_graph(50), 0, steps=1000, return_prob=0.0,
                                      max_nodes=7, rng_seed=1)
    assert len(nodes) == 7 and nodes[0] == 0


def test_walk_rejects_bad_probability():
    with pytest.raises(ValueError):
        G.random_walk_subgraph(G.path_graph(3), 0, return_prob=1.5)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 60), st.integers(0, 200), st.integers(1, 40), st.floats(0, 1),
       st.integers(0, 2 ** 32 - 1))
def test_walk_is_inside_ego_ball_and_deterministic(n, m, steps, ret, seed):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, n, m)
    start = int(rng.integers(n))
    sub, nodes = G.random_walk_subgraph(g, start, steps, ret, 256, seed)
    _, ball = G.ego_network(g, start, steps)
    assert set(nodes.tolist()) <= set(ball.tolist())
    assert nodes[0] == start and len(set(nodes.tolist())) == len(nodes)
    sub2, nodes2 = G.random_walk_subgraph(g, start, steps, ret, 256, seed)
    assert np.array_equal(nodes, nodes2) and sub.same_structure(sub2)


def test_path_graph_shapes():
    assert G.path_graph(1).num_nodes == 1 and G.path_graph(1).num_edges == 0
    assert G.path_graph(4).degrees.tolist() == [1, 2, 2, 1]
    with pytest.raises(ValueError):
        G.path_graph(0)


def test_product_examples():
    c4 = G.product_graph(G.path_graph(2), G.path_graph(2))
    assert nx.is_isomorphic(to_nx(c4), nx.cycle_graph(4))
    grid = G.product_graph(G.path_graph(3), G.path_graph(2))
    assert grid.num_nodes == 6 and grid.num_edges == 7
    assert nx.is_isomorphic(to_nx(grid), nx.grid_2d_graph(3, 2))
    g = G.cycle_graph(5)
    assert G.product_graph(G.path_graph(1), g).same_structure(g)
    with pytest.raises(ValueError):
        G.product_graph(G.from_edge_pairs([], 0), g)


def test_product_indexing():
    g = G.product_graph(G.path_graph(3), G.path_graph(4))
    # (i, j) ~ (i, j+1) and (i, j) ~ (i+1, j)
    assert g.has_edge(1 * 4 + 2, 1 * 4 + 3)
    assert g.has_edge(0 * 4 + 2, 1 * 4 + 2)
    assert not g.has_edge(0, 5)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2 ** 32 - 1))
def test_product_matches_networkx(na, nb, seed):
    rng = np.random.default_rng(seed)
    a, b = random_graph(rng, na, 2 * na), random_graph(rng, nb, 2 * nb)
    ours = to_nx(G.product_graph(a, b))
    theirs = nx.cartesian_product(to_nx(a), to_nx(b))
    mapping = {(i, j): i * nb + j for i, j in theirs.nodes}
    assert set(map(frozenset, ours.edges)) == set(map(frozenset, nx.relabel_nodes(theirs, mapping).edges))


def test_component_examples(backend):
    assert G.num_components(G.path_graph(6)) == 1
    assert G.connected_components(G.from_edge_pairs([], 4)).tolist() == [0, 1, 2, 3]
    two = G.disjoint_union(G.complete_graph(3), G.complete_graph(3))
    labels = G.connected_components(two)
    assert labels.tolist() == [0, 0, 0, 1, 1, 1]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 80), st.integers(0, 120), st.integers(0, 2 ** 32 - 1))
def test_components_match_networkx(n, m, seed):
    g = random_graph(np.random.default_rng(seed), n, m)
    labels = G.connected_components(g)
    comps = list(nx.connected_components(to_nx(g)))
    assert G.num_components(g) == len(comps)
    for comp in comps:
        assert len({labels[v] for v in comp}) == 1
    # labels appear in order of first node
    firsts = [labels.tolist().index(c) for c in range(len(comps))]
    assert firsts == sorted(firsts)
