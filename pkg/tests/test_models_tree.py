import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import brute_force_gini_split

from medtab.models import export_tree, feature_importances, train_dtree, tree_predict
from medtab.models.tree import best_gini_split, gini_from_counts


class TestGini:
    def test_balanced_counts(self):
        assert gini_from_counts(5, 5) == 0.5

    def test_pure_node(self):
        assert gini_from_counts(10, 0) == 0.0

    def test_empty(self):
        assert gini_from_counts(0, 0) == 0.0


def random_table(rng, n_max=20, d_max=5):
    n = int(rng.integers(4, n_max + 1))
    d = int(rng.integers(1, d_max + 1))
    # draw from a coarse grid so ties between rows are common
    X = rng.integers(0, 6, size=(n, d)).astype(np.float64) / 2.0
    y = rng.integers(0, 2, n).astype(np.int64)
    return X, y


class TestBestSplitOracle:
    def test_matches_brute_force_on_random_tables(self):
        rng = np.random.default_rng(2024)
        checked = 0
        for _ in range(200):
            X, y = random_table(rng)
            ours = best_gini_split(X, y)
            oracle = brute_force_gini_split(X, y)
            if oracle is None:
                assert ours is None
                continue
            assert ours is not None
            assert ours[0] == oracle[0], "column mismatch"
            assert ours[1] == oracle[1], "threshold mismatch"
            checked += 1
        assert checked > 100

    def test_toy_table_root(self):
        X = np.array([[1, 0, 5], [2, 1, 4], [3, 0, 3], [4, 1, 2],
                      [5, 0, 1], [6, 1, 0], [7, 0, 2], [8, 1, 6]], dtype=np.float64)
        y = np.array([0, 0, 0, 0, 1, 1, 1, 1])
        col, thr, gain = best_gini_split(X, y)
        ocol, othr, ogain = brute_force_gini_split(X, y)
        assert (col, thr) == (ocol, othr) == (0, 4.5)

    def test_constant_columns_yield_no_split(self):
        X = np.ones((6, 2))
        y = np.array([0, 1, 0, 1, 0, 1])
        assert best_gini_split(X, y) is None


class TestTrainDtree:
    def test_pure_node_is_leaf(self):
        X = np.arange(8, dtype=np.float64)[:, None]
        y = np.zeros(8, dtype=np.int64)
        model = train_dtree(X, y, max_depth=3, min_samples_split=2)
        assert model.root.is_leaf
        assert model.root.counts == (8, 0)

    def test_depth_limit_respected(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(100, 3))
        y = (X[:, 0] * X[:, 1] > 0).astype(np.int64)
        model = train_dtree(X, y, max_depth=2, min_samples_split=2)

        def depth(node):
            if node.is_leaf:
                return node.depth
            return max(depth(node.left), depth(node.right))

        assert depth(model.root) <= 2

    def test_min_samples_split_respected(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(30, 2))
        y = rng.integers(0, 2, 30)
        model = train_dtree(X, y, max_depth=10, min_samples_split=12)

        def check(node):
            if not node.is_leaf:
                assert node.n_samples >= 12
                check(node.left)
                check(node.right)

        check(model.root)

    def test_single_leaf_counts_give_probability(self):
        X = np.ones((4, 1))
        y = np.array([0, 0, 0, 1])
        model = train_dtree(X, y, max_depth=3, min_samples_split=2)
        assert model.root.is_leaf
        probs = tree_predict(model.root, np.array([[1.0], [9.0]]))
        assert np.allclose(probs, 0.25)

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(40, 3))
        y = (X[:, 1] > 0.3).astype(np.int64)
        X_query = rng.normal(size=(15, 3))
        model_a = train_dtree(X, y, 4, 2)
        pred_a = tree_predict(model_a.root, X_query)

        def warp(M):
            out = M.copy()
            out[:, 1] = np.exp(M[:, 1] / 2.0)  # strictly monotone on column 1
            return out

        model_b = train_dtree(warp(X), y, 4, 2)
        pred_b = tree_predict(model_b.root, warp(X_query))
        assert np.array_equal(pred_a, pred_b)

    def test_deterministic(self):
        rng = np.random.default_rng(6)
        X = rng.normal(size=(50, 4))
        y = rng.integers(0, 2, 50)
        a = export_tree(train_dtree(X, y, 5, 2))
        b = export_tree(train_dtree(X, y, 5, 2))
        assert a == b

    def test_invalid_hyperparams(self):
        X = np.zeros((4, 1))
        y = np.array([0, 1, 0, 1])
        with pytest.raises(ValueError):
            train_dtree(X, y, max_depth=0, min_samples_split=2)
        with pytest.raises(ValueError):
            train_dtree(X, y, max_depth=2, min_samples_split=1)

    @given(st.integers(0, 10_000))
    @settings(max_examples=30, deadline=None)
    def test_root_split_equals_oracle_property(self, seed):
        rng = np.random.default_rng(seed)
        X, y = random_table(rng)
        model = train_dtree(X, y, max_depth=1, min_samples_split=2)
        oracle = brute_force_gini_split(X, y)
        if y.min() == y.max():
            assert model.root.is_leaf
        elif oracle is None:
            assert model.root.is_leaf
        else:
            assert not model.root.is_leaf
            assert (model.root.column, model.root.threshold) == (oracle[0], oracle[1])


class TestImportances:
    def test_stump_importance_is_one_hot(self):
        X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]] * 3)
        y = np.array([0, 1, 0, 1] * 3)
        model = train_dtree(X, y, max_depth=1, min_samples_split=2)
        iv = feature_importances(model)
        assert iv.scores[1] == pytest.approx(1.0)
        assert iv.scores[0] == 0.0

    def test_importances_sum_to_one(self):
        rng = np.random.default_rng(8)
        X = rng.normal(size=(80, 5))
        y = ((X[:, 0] + X[:, 3]) > 0).astype(np.int64)
        model = train_dtree(X, y, max_depth=5, min_samples_split=2)
        iv = feature_importances(model)
        assert iv.scores.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(iv.scores >= 0)


class TestExportTree:
    def make(self):
        X = np.array([[0.0], [1.0], [2.0], [3.0]] * 2)
        y = np.array([0, 0, 1, 1] * 2)
        return train_dtree(X, y, 1, 2, feature_names=("alpha",))

    def test_stump_text_render(self):
        text = export_tree(self.make(), "text")
        lines = text.strip().split("\n")
        assert len(lines) == 3
        assert lines[0].startswith("alpha <= 1.5")
        assert "counts=" in lines[1]

    def test_dot_is_balanced_digraph(self):
        dot = export_tree(self.make(), "dot")
        assert dot.startswith("digraph")
        assert dot.count("{") == dot.count("}")
        assert dot.count("->") == 2

    def test_identical_bytes_for_same_model(self):
        model = self.make()
        assert export_tree(model, "dot") == export_tree(model, "dot")

    def test_unknown_format(self):
        with pytest.raises(ValueError):
            export_tree(self.make(), "yaml")
