import numpy as np
import pytest

from specaug import encoder as E
from specaug import graph as G
from specaug.augment import View, make_view

from conftest import finite_difference_error, random_graph, small_views


def permuted(view, perm):
    """The same view with node ``i`` renamed ``perm[i]``."""
    g = view.graph
    inv = np.empty_like(perm)
    inv[perm] = np.arange(len(perm))
    h = G.from_edge_pairs(perm[g.edges()], g.num_nodes)
    return View(h, view.features[inv], view.node_map[inv], view.eigenvalues)


def test_degree_one_hot_clamps():
    oh = E.degree_one_hot([0, 2, 40], 16)
    assert oh.shape == (3, 16)
    assert oh[0, 0] == 1 and oh[1, 2] == 1 and oh[2, 15] == 1
    assert np.all(oh.sum(axis=1) == 1)


def test_node_features_layout():
    v = make_view(G.path_graph(3), np.arange(3), 8)
    X = E.node_features(v, 16, 64)
    assert X.shape == (3, 80)
    np.testing.assert_array_equal(X[:, :8], v.features)
    assert not X[:, 8:64].any()
    assert X[1, 64 + 2] == 1 and X[0, 64 + 1] == 1


def test_init_is_seeded():
    a, b = E.init_params(rng_seed=5), E.init_params(rng_seed=5)
    c = E.init_params(rng_seed=6)
    for k in a.arrays:
        np.testing.assert_array_equal(a.arrays[k], b.arrays[k])
    assert any(not np.array_equal(a.arrays[k], c.arrays[k]) for k in a.arrays if k.startswith("W"))
    assert all(not a.arrays[k].any() for k in a.arrays if "_b" in k or k.startswith("b"))
    assert not a.eps.any()


def test_init_glorot_bounds_and_degenerate_width():
    p = E.init_params(hidden_dim=1, pos_dim=2, degree_buckets=2)
    assert p.arrays["proj_W"].shape == (4, 1) and p.arrays["W1_0"].shape == (1, 1)
    q = E.init_params(hidden_dim=64)
    assert np.abs(q.arrays["W1_0"]).max() <= np.sqrt(6 / 128)
    with pytest.raises(ValueError):
        E.init_params(input_dim=7)


def test_rejects_wrong_feature_width():
    p = E.init_params(pos_dim=4, degree_buckets=4, hidden_dim=8)
    batch = E.make_batch([G.path_graph(2)], [np.zeros((2, 5))])
    with pytest.raises(ValueError):
        E.forward_batch(p, batch)


def test_permutation_invariance():
    rng = np.random.default_rng(42)
    params = E.init_params(pos_dim=8, degree_buckets=16, hidden_dim=32, rng_seed=1)
    worst = 0.0
    for v in small_views(rng, 100, 8, max_nodes=25):
        perm = rng.permutation(v.num_nodes)
        diff = E.gin_forward(params, v) - E.gin_forward(params, permuted(v, perm))
        worst = max(worst, np.abs(diff).max())
    assert worst < 1e-9


def test_zero_features_and_biases_give_zero():
    p = E.init_params(pos_dim=4, degree_buckets=4, hidden_dim=8)
    batch = E.make_batch([G.path_graph(3)], [np.zeros((3, 8))])
    Y, cache = E.forward_batch(p, batch)
    assert not cache["R"].any() and not Y.any()


def test_duplicated_isolated_node():
    p = E.init_params(pos_dim=4, degree_buckets=4, hidden_dim=8, rng_seed=3)
    x = np.random.default_rng(0).normal(size=(1, 8))
    one = E.make_batch([G.from_edge_pairs([], 1)], [x])
    two = E.make_batch([G.from_edge_pairs([], 2)], [np.vstack([x, x])])
    Y1, c1 = E.forward_batch(p, one)
    Y2, c2 = E.forward_batch(p, two)
    np.testing.assert_allclose(c2["R"], 2 * c1["R"], atol=1e-12)
    np.testing.assert_allclose(Y2, Y1, atol=1e-12)


def test_output_norms_zero_or_one():
    rng = np.random.default_rng(7)
    params = E.init_params(pos_dim=8, hidden_dim=16)
    Y = E.encode_views(params, small_views(rng, 30, 8))
    norms = np.linalg.norm(Y, axis=1)
    assert np.all((np.abs(norms - 1) < 1e-10) | (norms < 1e-10))


def test_batch_matches_single_forward():
    rng = np.random.default_rng(8)
    params = E.init_params(pos_dim=8, hidden_dim=16)
    views = small_views(rng, 6, 8)
    Y = E.encode_views(params, views)
    for row, v in zip(Y, views):
        np.testing.assert_allclose(row, E.gin_forward(params, v), atol=1e-12)


def test_block_adjacency_matches_scipy():
    import scipy.sparse as sp
    rng = np.random.default_rng(9)
    graphs = [random_graph(rng, int(n), 3 * int(n)) for n in rng.integers(1, 9, 5)]
    batch = E.make_batch(graphs, [np.zeros((g.num_nodes, 1)) for g in graphs])
    expected = sp.block_diag([g.adjacency() for g in graphs]).toarray()
    np.testing.assert_array_equal(batch.adjacency.toarray(), expected)


@pytest.mark.parametrize("seed", range(3))
def test_backward_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    params = E.init_params(pos_dim=4, degree_buckets=4, hidden_dim=16, rng_seed=seed)
    views = small_views(rng, 3, 4)
    batch = E.batch_views(views, params)
    w = rng.normal(size=(3, 16))

    def loss():
        return float(np.sum(w * E.forward_batch(params, batch)[0]))

    _, cache = E.forward_batch(params, batch)
    grads = E.backward_batch(params, cache, w)
    assert finite_difference_error(params, loss, grads, rng, stride=3) < 1e-4


def test_dropout_is_seeded_and_off_by_default():
    rng = np.random.default_rng(10)
    params = E.init_params(pos_dim=8, hidden_dim=16)
    batch = E.batch_views(small_views(rng, 4, 8), params)
    a, _ = E.forward_batch(params, batch, dropout=0.5, rng=3)
    b, _ = E.forward_batch(params, batch, dropout=0.5, rng=3)
    c, _ = E.forward_batch(params, batch)
    np.testing.assert_array_equal(a, b)
    assert not np.allclose(a, c)
    with pytest.raises(ValueError):
        E.forward_batch(params, batch, dropout=1.0, rng=0)
