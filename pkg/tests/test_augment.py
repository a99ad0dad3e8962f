import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import ortho_group

from specaug import augment as A
from specaug import graph as G
from specaug import spectral as S
from specaug.global_embed import GlobalEmbedding, embed_graph

from conftest import grid, random_graph


def full_view(g, dim=8):
    return A.make_view(g, np.arange(g.num_nodes), dim)


class TestCrop:
    def test_full_range_is_identity(self):
        v = full_view(grid(4, 3))
        out = A.spectral_crop(v, A.CropSpec((0, 1, 0, 1)))
        assert np.array_equal(out.node_map, v.node_map)

    def test_three_by_two_grid_keeps_one_end_column(self):
        g = grid(3, 2)
        emb = S.spectral_embedding(g, 3, S.UNNORMALIZED)
        x = emb.eigenvectors[:, 1]
        positive = np.flatnonzero(x > 1e-9)
        # node (i, j) sits at 2 i + j; an end column has a fixed i of 0 or 2
        assert len(positive) == 2 and len({int(v) // 2 for v in positive}) == 1
        assert {int(v) // 2 for v in positive} <= {0, 2}
        out = A.spectral_crop(full_view(g), A.CropSpec((0.7, 1, 0, 1)), S.UNNORMALIZED)
        assert sorted(out.node_map.tolist()) == positive.tolist()

    def test_seven_by_four_grid_keeps_whole_columns(self):
        out = A.spectral_crop(full_view(grid(7, 4)), A.CropSpec((0, 0.5, 0, 1)), S.UNNORMALIZED)
        cols = out.node_map // 4
        kept = sorted(set(cols.tolist()))
        assert len(out.node_map) == 4 * len(kept)
        assert kept == list(range(kept[0], kept[0] + len(kept)))
        assert 0 < len(kept) < 7

    def test_crop_recomputes_features(self):
        out = A.spectral_crop(full_view(grid(5, 4), 6), A.CropSpec((0.2, 0.8, 0.2, 0.8)))
        expected = S.positional_embedding(out.graph, 6)
        np.testing.assert_allclose(out.features, expected)

    def test_small_or_disconnected_views_unchanged(self):
        v = full_view(G.path_graph(2))
        assert A.spectral_crop(v, A.CropSpec((0.4, 0.6, 0.4, 0.6))) is v
        two = full_view(G.disjoint_union(G.path_graph(3), G.path_graph(3)))
        assert A.spectral_crop(two, A.CropSpec((0.4, 0.6, 0.4, 0.6))) is two

    @settings(max_examples=40, deadline=None)
    @given(st.integers(3, 40), st.integers(0, 2 ** 32 - 1),
           st.tuples(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.floats(0, 1)))
    def test_crop_is_nonempty_subset(self, n, seed, q):
        g = random_graph(np.random.default_rng(seed), n, 3 * n)
        v = A.make_view(g, np.arange(100, 100 + n), 8)
        spec = A.CropSpec((min(q[0], q[1]), max(q[0], q[1]), min(q[2], q[3]), max(q[2], q[3])))
        out = A.spectral_crop(v, spec)
        assert 0 < out.num_nodes <= n
        assert set(out.node_map.tolist()) <= set(v.node_map.tolist())
        assert out.features.shape == (out.num_nodes, 8)

    def test_crop_spec_validation(self):
        with pytest.raises(ValueError):
            A.CropSpec((0.5, 0.2, 0, 1))
        with pytest.raises(ValueError):
            A.CropSpec((0, 1.2, 0, 1))

    def test_quantile_threshold_ranks(self):
        vals = np.arange(10.0)
        assert A.quantile_threshold(vals, 0) == -np.inf
        assert A.quantile_threshold(vals, 1) == np.inf
        assert A.quantile_threshold(vals, 0.2) == 1.0
        assert A.quantile_threshold(vals, 0.25) == 2.0


class TestReorder:
    def test_first_order_is_identity(self):
        lam = np.sort(np.random.default_rng(0).uniform(0, 2, 12))
        assert A.reorder_permutation(lam, 12, 1).tolist() == list(range(12))

    def test_worked_example_swaps_last_two(self):
        assert A.reorder_permutation([0.2, 1.4, 1.9], 3, 2).tolist() == [0, 2, 1]

    @pytest.mark.parametrize("seed", range(200))
    def test_odd_order_keeps_sequence(self, seed):
        rng = np.random.default_rng(seed)
        lam = np.sort(rng.uniform(0, 2, rng.integers(1, 20)))
        r = int(rng.choice([1, 3, 5, 7, 9]))
        assert A.reorder_permutation(lam, len(lam), r).tolist() == list(range(len(lam)))

    def test_selects_smallest_eigenvalues(self):
        perm = A.reorder_permutation([1.5, 0.1, 0.9, 0.0], 2, 1)
        assert perm.tolist() == [3, 1]

    def test_column_multiset_preserved(self):
        v = full_view(grid(4, 4), 10)
        out = A.reorder_view(v, 4)
        key = lambda X: sorted(map(tuple, np.round(X.T, 12)))
        assert key(out.features) == key(v.features)

    def test_rejects_bad_arguments(self):
        with pytest.raises(ValueError):
            A.reorder_permutation([0.0, 1.0], 2, 0)
        with pytest.raises(ValueError):
            A.reorder_permutation([0.0, 1.0], 3, 1)


class TestMask:
    def test_zero_budget_is_identity(self):
        v = full_view(grid(3, 3))
        np.testing.assert_array_equal(A.apply_mask(v, 0, 1).features, v.features)

    def test_full_mask_zeroes_all(self):
        v = full_view(G.complete_graph(4), 4)
        assert not A.mask_columns(v, 4).features.any()

    def test_mask_two_of_four(self):
        v = full_view(G.path_graph(4), 4)
        out = A.mask_columns(v, 2)
        assert not out.features[:, 2:].any()
        np.testing.assert_array_equal(out.features[:, :2], v.features[:, :2])

    def test_drawn_count_is_uniform_range(self):
        v = full_view(G.path_graph(6), 6)
        zs = {int((~A.apply_mask(v, 3, s).features.any(axis=0)).sum()) for s in range(200)}
        assert zs == {0, 1, 2, 3}

    def test_rejects_budget_above_width(self):
        with pytest.raises(ValueError):
            A.apply_mask(full_view(G.path_graph(3), 4), 5)


class TestProcrustes:
    def test_already_aligned(self):
        X = np.random.default_rng(0).normal(size=(7, 3))
        out, Q = A.procrustes_align(X, X)
        np.testing.assert_allclose(Q, np.eye(3), atol=1e-12)
        np.testing.assert_allclose(out, X, atol=1e-12)

    def test_planted_rotation(self):
        t = 0.7
        R = np.array([[np.cos(t), -np.sin(t)], [np.sin(t), np.cos(t)]])
        N = np.random.default_rng(1).normal(size=(6, 2))
        X = N @ R
        out, Q = A.procrustes_align(X, N)
        np.testing.assert_allclose(Q, R.T, atol=1e-12)
        assert np.linalg.norm(out - N) < 1e-8

    def test_planted_reflection(self):
        F = np.diag([1.0, -1.0, 1.0])
        N = np.random.default_rng(2).normal(size=(8, 3))
        out, Q = A.procrustes_align(N @ F, N)
        assert np.linalg.norm(out - N) < 1e-8
        assert np.linalg.det(Q) == pytest.approx(-1.0)

    @pytest.mark.parametrize("seed", range(5))
    def test_optimal_over_random_orthogonal(self, seed):
        rng = np.random.default_rng(seed)
        X, N = rng.normal(size=(10, 3)), rng.normal(size=(10, 3))
        out, Q = A.procrustes_align(X, N)
        assert np.linalg.norm(Q.T @ Q - np.eye(3)) < 1e-8
        best = np.linalg.norm(out - N)
        for _ in range(1000):
            Qr, Rr = np.linalg.qr(rng.normal(size=(3, 3)))
            Qr = Qr * np.sign(np.diag(Rr))
            assert best <= np.linalg.norm(X @ Qr - N) + 1e-12
        np.testing.assert_allclose(out @ out.T, X @ X.T, atol=1e-8)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(1, 12), st.integers(1, 12), st.integers(0, 2 ** 32 - 1))
    def test_thin_route_matches_full(self, n, w, seed):
        rng = np.random.default_rng(seed)
        X, N = rng.normal(size=(n, w)), rng.normal(size=(n, w))
        full, _ = A.procrustes_align(X, N)
        thin = A.procrustes_apply(X, N)
        np.testing.assert_allclose(np.linalg.norm(thin - N), np.linalg.norm(full - N), atol=1e-9)
        np.testing.assert_allclose(thin @ thin.T, X @ X.T, atol=1e-8)

    def test_planted_orthogonal_in_wide_case(self):
        Q = ortho_group.rvs(16, random_state=3)
        N = np.random.default_rng(3).normal(size=(5, 16))
        assert np.linalg.norm(A.procrustes_apply(N @ Q, N) - N) < 1e-8

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            A.procrustes_align(np.ones((3, 2)), np.ones((3, 3)))
        with pytest.raises(ValueError):
            A.procrustes_align(np.full((3, 2), np.nan), np.ones((3, 2)))

    def test_align_view_preserves_geometry(self):
        g = grid(4, 5)
        v = full_view(g, 8)
        out = A.align_view(v, embed_graph(g, 8))
        np.testing.assert_allclose(out.features @ out.features.T, v.features @ v.features.T,
                                   atol=1e-8)


class TestSimilarity:
    def test_examples(self):
        assert A.similarity_accept([1, 0], [1, 0], 0.3)
        assert not A.similarity_accept([1, 0], [0, 1], 0.3)
        assert A.similarity_accept([1, 0], [0, 1], 0.3, "diverse")
        assert A.similarity_accept([1, 0], [0.8, 0.6], 0.3)

    def test_zero_vector_accepted(self):
        assert A.similarity_accept([0, 0], [1, 0], 0.3)

    def test_c_one_requires_positive_cosine(self):
        assert not A.similarity_accept([1, 0], [0, 1], 1.0)
        assert A.similarity_accept([1, 0], [1, 1e-3], 1.0)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(-5, 5), min_size=3, max_size=3),
           st.lists(st.floats(-5, 5), min_size=3, max_size=3), st.floats(0, 1),
           st.sampled_from(A.FILTER_MODES))
    def test_symmetric(self, s1, s2, c, mode):
        assert A.similarity_accept(s1, s2, c, mode) == A.similarity_accept(s2, s1, c, mode)


class TestPipeline:
    def setup_method(self):
        self.g = grid(6, 6)
        self.emb = embed_graph(self.g, 16)

    def test_disabled_gives_raw_walk_views(self):
        cfg = A.AugmentationConfig.disabled(embed_dim=16)
        a, b = A.generate_view_pair(self.g, 7, cfg, self.emb, rng_seed=4)
        for v in (a, b):
            assert v.history == ()
            np.testing.assert_allclose(v.features, S.positional_embedding(v.graph, 16))
            assert v.graph.same_structure(G.induced_subgraph(self.g, v.node_map))
            _, ball = G.ego_network(self.g, 7, cfg.ego_radius)
            assert set(v.node_map.tolist()) <= set(ball.tolist())

    def test_deterministic(self):
        cfg = A.AugmentationConfig(p_filter=1, p_align=1, embed_dim=16)
        first = A.generate_view_pair(self.g, 3, cfg, self.emb, rng_seed=11)
        second = A.generate_view_pair(self.g, 3, cfg, self.emb, rng_seed=11)
        for v, w in zip(first, second):
            np.testing.assert_array_equal(v.features, w.features)
            np.testing.assert_array_equal(v.node_map, w.node_map)
            assert v.history == w.history

    def test_filter_with_c_one_logs_outcome(self):
        cfg = A.AugmentationConfig.disabled(p_filter=1, filter_mode="similar", filter_c=1.0,
                                            embed_dim=16)
        a, b = A.generate_view_pair(self.g, 0, cfg, self.emb, rng_seed=0)
        assert a.history[0] in ("filter:pass", "filter:exhausted")

    def test_config_validation(self):
        with pytest.raises(ValueError):
            A.AugmentationConfig(p_mask=0.7, p_reorder=0.7)
        with pytest.raises(ValueError):
            A.AugmentationConfig(filter_c=1.5)
        with pytest.raises(ValueError):
            A.AugmentationConfig(filter_mode="sometimes")
        assert A.AugmentationConfig(embed_dim=9).mask_M == 5
