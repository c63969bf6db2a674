import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import brute_tree, cv_loop, oob_replay, same_tree
from n2mmp.exceptions import OOBUndefinedError
from n2mmp.partition import kfold_split
from n2mmp.trees import (
    Ensemble,
    RegressionTree,
    bagging_fit,
    boosting_cv,
    boosting_fit,
    bootstrap_rows,
    ensemble_predict,
    oob_curve,
    oob_error,
    rf_fit,
    rt_fit,
    rt_predict,
    rt_select_leaf_size,
    select_bagging,
    select_random_forest,
)


def walk(structure, x):
    while structure[0] != "leaf":
        j, s, left, right = structure
        structure = left if x[j] < s else right
    return structure[1]


def test_single_split_by_hand():
    X = np.array([[1.0], [2.0], [3.0], [4.0]])
    y = np.array([0.0, 0.0, 10.0, 10.0])
    tree = rt_fit(X, y)
    assert tree.structure() == (0, 2.5, ("leaf", 0.0), ("leaf", 10.0))
    assert rt_predict(tree, [2.5]) == 10.0  # ties go right
    assert rt_predict(tree, [2.4999]) == 0.0


def test_constant_target_is_one_leaf():
    rng = np.random.default_rng(0)
    tree = rt_fit(rng.normal(size=(10, 3)), np.full(10, 4.2))
    assert tree.n_leaves == 1 and tree.value[0] == pytest.approx(4.2, abs=1e-14)


def test_single_row_and_empty():
    assert rt_fit([[1.0, 2.0]], [3.0]).n_leaves == 1
    with pytest.raises(ValueError):
        rt_fit(np.zeros((0, 2)), [])


@pytest.mark.parametrize("seed", range(30))
def test_matches_exhaustive_search(seed):
    rng = np.random.default_rng(seed)
    n, p = int(rng.integers(4, 13)), int(rng.integers(1, 4))
    # a coarse grid produces repeated values and tied candidate splits
    X = rng.integers(0, 5, size=(n, p)).astype(float)
    y = rng.integers(0, 4, size=n).astype(float) if seed % 2 else rng.normal(size=n)
    leaf = 1 + seed % 3
    tree = rt_fit(X, y, min_leaf_size=leaf)
    ref = brute_tree(X.tolist(), y.tolist(), leaf)
    assert same_tree(tree.structure(), ref), (tree.structure(), ref)


def test_deep_tree_interpolates_distinct_inputs():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(30, 3))
    y = rng.normal(size=30)
    tree = rt_fit(X, y)
    np.testing.assert_allclose(tree.predict(X), y, atol=1e-12)


@given(st.integers(0, 2**32 - 1), st.integers(1, 6))
def test_leaf_invariants(seed, leaf):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(25, 3))
    y = rng.normal(size=25)
    tree = rt_fit(X, y, min_leaf_size=leaf)
    leaves = tree.apply(X)
    for node in np.unique(leaves):
        rows = leaves == node
        assert rows.sum() >= leaf
        assert tree.value[node] == pytest.approx(y[rows].mean(), abs=1e-12)
    assert tree.n_samples[0] == 25
    internal = tree.feature >= 0
    assert np.all(tree.n_samples[internal] == tree.n_samples[tree.left[internal]] + tree.n_samples[tree.right[internal]])


def test_max_splits_breadth_first():
    X = np.arange(8.0)[:, None]
    y = np.array([0, 1, 10, 11, 100, 101, 1000, 1001], dtype=float)
    tree = rt_fit(X, y, max_splits=2)
    assert tree.n_splits == 2 and tree.n_leaves == 3
    assert rt_fit(X, y, max_splits=0).n_leaves == 1


def test_leaf_size_cv_matches_loop():
    rng = np.random.default_rng(2)
    X = rng.uniform(size=(30, 2))
    y = np.where(X[:, 0] > 0.5, 1.0, 0.0) + 0.2 * rng.normal(size=30)
    grid = [1, 2, 3, 5, 8]
    cv = rt_select_leaf_size(X, y, grid, folds=5, seed=3)
    ref = cv_loop(lambda leaf, Xtr, ytr, q: walk(brute_tree(Xtr.tolist(), ytr.tolist(), leaf), q),
                  grid, X, y, kfold_split(30, 5, 3).fold_of)
    np.testing.assert_allclose(cv.scores, ref, rtol=1e-10)


def test_tree_json_and_render():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(20, 5))
    tree = rt_fit(X, rng.normal(size=20), min_leaf_size=3)
    back = RegressionTree.from_dict(tree.to_dict())
    assert back.structure() == tree.structure()
    text = tree.render(["tcm", "volatile", "intermediate", "mwc7plus", "temperature"])
    assert text.count("leaf:") == tree.n_leaves


# --------------------------------------------------------------------------
# bagging and random forest


def test_bootstrap_draws_and_oob_fraction():
    ens = bagging_fit(np.arange(200.0)[:, None], np.arange(200.0), 20, seed=4)
    for b, rows in enumerate(ens.bootstrap):
        np.testing.assert_array_equal(rows, bootstrap_rows(4, b, 200))
    fractions = [1 - len(set(bootstrap_rows(4, b, 1000).tolist())) / 1000 for b in range(100)]
    assert 0.33 <= np.mean(fractions) <= 0.41


def test_single_unresampled_member_is_a_tree():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(25, 3))
    y = rng.normal(size=25)
    ens = bagging_fit(X, y, 1, bootstrap=False)
    Q = rng.normal(size=(10, 3))
    np.testing.assert_array_equal(ens.predict(Q), rt_fit(X, y).predict(Q))


def test_rf_with_all_features_is_bagging():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(30, 5))
    y = rng.normal(size=30)
    Q = rng.normal(size=(10, 5))
    np.testing.assert_array_equal(rf_fit(X, y, 15, 5, seed=2).predict(Q), bagging_fit(X, y, 15, seed=2).predict(Q))


def test_rf_candidate_subsets():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(40, 5))
    ens = rf_fit(X, rng.normal(size=40), 5, 2, seed=1)
    for tree in ens.members:
        assert tree.feature_subsets
        assert all(len(s) == 2 and len(set(s)) == 2 for s in tree.feature_subsets)
    with pytest.raises(ValueError):
        rf_fit(X, np.zeros(40), 5, 6)


def test_ensemble_mean_and_seed():
    rng = np.random.default_rng(8)
    X = rng.normal(size=(30, 4))
    y = rng.normal(size=30)
    ens = rf_fit(X, y, 10, 2, seed=3)
    q = rng.normal(size=4)
    assert ensemble_predict(ens, q) == pytest.approx(np.mean([rt_predict(t, q) for t in ens.members]), abs=1e-12)
    np.testing.assert_array_equal(rf_fit(X, y, 10, 2, seed=3).predict(X), ens.predict(X))
    back = Ensemble.from_dict(ens.to_dict())
    np.testing.assert_array_equal(back.predict(X), ens.predict(X))


def test_oob_matches_replay():
    rng = np.random.default_rng(9)
    X = rng.normal(size=(40, 3))
    y = X[:, 0] + 0.3 * rng.normal(size=40)
    ens = bagging_fit(X, y, 25, seed=1)
    mse, used = oob_replay(ens, X, y)
    res = oob_error(ens, X, y)
    assert res.mse == pytest.approx(mse, rel=1e-12)
    assert res.n_used == used and res.n_used + res.n_skipped == 40
    curve = oob_curve(ens, X, y)
    assert curve[-1] == pytest.approx(res.mse, rel=1e-12)
    for b in (3, 10):
        assert curve[b - 1] == pytest.approx(oob_replay(ens.truncate(b), X, y)[0], rel=1e-12)


def test_oob_undefined():
    ens = bagging_fit(np.arange(4.0)[:, None], np.arange(4.0), 1, bootstrap=False)
    with pytest.raises(OOBUndefinedError):
        oob_error(ens, np.arange(4.0)[:, None], np.arange(4.0))


def test_oob_selection_picks_curve_minimum():
    rng = np.random.default_rng(10)
    X = rng.normal(size=(40, 3))
    y = X[:, 0] ** 2 + 0.1 * rng.normal(size=40)
    ens, sweep = select_bagging(X, y, B_max=30, seed=2)
    assert len(ens.members) == sweep.best_B == int(np.nanargmin(sweep.curves[None])) + 1
    ens, sweep = select_random_forest(X, y, (1, 2, 3), B_max=30, seed=2)
    best = min((np.nanmin(c), m) for m, c in sweep.curves.items())
    assert (sweep.best_mse, sweep.best_m) == best
    assert ens.m == sweep.best_m and len(ens.members) == sweep.best_B


# --------------------------------------------------------------------------
# boosting


def test_boosting_zero_rate_predicts_zero():
    rng = np.random.default_rng(11)
    X = rng.normal(size=(20, 3))
    ens = boosting_fit(X, rng.normal(size=20) + 5, 10, 0.0)
    assert np.all(ens.predict(rng.normal(size=(5, 3))) == 0.0)


def test_boosting_matches_manual_residual_loop():
    rng = np.random.default_rng(12)
    X = rng.normal(size=(30, 3))
    y = np.sin(X[:, 0]) + X[:, 1]
    ens = boosting_fit(X, y, 15, 0.3)
    F = np.zeros(30)
    for tree in ens.members:
        ref = rt_fit(X, y - F, max_splits=2)
        assert tree.structure() == ref.structure()
        F += 0.3 * ref.predict(X)
    np.testing.assert_allclose(ens.predict(X), F, atol=1e-12)


@given(st.integers(0, 2**32 - 1), st.floats(0.05, 1.0))
def test_boosting_training_error_never_increases(seed, gamma):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(25, 3))
    y = rng.normal(size=25)
    trace = boosting_fit(X, y, 12, gamma).train_mse
    assert np.all(np.diff(trace) <= 1e-12)


def test_boosting_staged_prefix():
    rng = np.random.default_rng(13)
    X = rng.normal(size=(20, 2))
    ens = boosting_fit(X, rng.normal(size=20), 8, 0.4)
    staged = ens.staged_predict(X)
    for b in (1, 4, 8):
        np.testing.assert_allclose(staged[b - 1], ens.truncate(b).predict(X), atol=1e-12)


def test_boosting_cv_matches_refits():
    rng = np.random.default_rng(14)
    X = rng.normal(size=(30, 3))
    y = X[:, 0] - X[:, 1] ** 2 + 0.1 * rng.normal(size=30)
    gammas, sizes = (0.1, 0.5), (2, 5, 9)
    cv = boosting_cv(X, y, gammas, sizes, folds=3, seed=4)
    fold_of = kfold_split(30, 3, 4).fold_of
    for gi, g in enumerate(gammas):
        ref = cv_loop(lambda B, Xtr, ytr, q: float(boosting_fit(Xtr, ytr, B, g).predict(q[None])[0]),
                      sizes, X, y, fold_of)
        np.testing.assert_allclose(cv.scores[gi], ref, rtol=1e-10)
    assert cv.best_score == pytest.approx(cv.scores.min())
    assert len(cv.per_gamma_optima()) == 2
