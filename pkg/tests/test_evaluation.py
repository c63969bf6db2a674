import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import cv_loop
from n2mmp.dataset import FEATURE_NAMES, synthesize
from n2mmp.evaluation import compare, crossval, metrics, r2, rmse, sensitivity
from n2mmp.exceptions import InsufficientDataError, N2MMPError
from n2mmp.linear import fit_mlr
from n2mmp.partition import kfold_split


def test_metric_hand_values():
    m = metrics([1.0, 2.0, 3.0], [1.0, 2.0, 4.0])
    assert m.rmse == pytest.approx(math.sqrt(1 / 3), abs=1e-15)
    assert m.r_squared == pytest.approx(0.5, abs=1e-15)
    assert r2([1.0, 2.0], [1.0, 2.0]) == 1.0
    assert r2([1.0, 3.0], [2.0, 2.0]) == 0.0


def test_metric_errors():
    with pytest.raises(InsufficientDataError):
        rmse([1.0], [1.0])
    with pytest.raises(InsufficientDataError):
        r2([2.0, 2.0], [1.0, 3.0])
    with pytest.raises(ValueError):
        rmse([1.0, 2.0], [1.0, 2.0, 3.0])


@given(st.integers(0, 2**32 - 1), st.integers(2, 40))
def test_r2_rmse_identity(seed, n):
    rng = np.random.default_rng(seed)
    y = rng.normal(size=n)
    yhat = y + rng.normal(size=n)
    sst = float(np.sum((y - y.mean()) ** 2))
    assert r2(y, yhat) == pytest.approx(1 - n * rmse(y, yhat) ** 2 / sst, rel=1e-10, abs=1e-12)
    assert rmse(y, yhat) >= 0


def _ridge(lam, Xtr, ytr, Xva):
    A = np.column_stack([np.ones(len(Xtr)), Xtr])
    beta = np.linalg.solve(A.T @ A + lam * np.eye(A.shape[1]), A.T @ ytr)
    return np.column_stack([np.ones(len(Xva)), Xva]) @ beta


def test_crossval_matches_explicit_loop():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(27, 3))
    y = X @ [1.0, -2.0, 0.5] + rng.normal(size=27)
    grid = [0.0, 0.1, 1.0, 10.0]
    cv = crossval(_ridge, grid, X, y, folds=4, seed=9)
    ref = cv_loop(lambda lam, Xtr, ytr, q: float(_ridge(lam, Xtr, ytr, q[None])[0]),
                  grid, X, y, kfold_split(27, 4, 9).fold_of)
    np.testing.assert_allclose(cv.scores, ref, rtol=1e-12)
    assert cv.best == grid[int(np.argmin(ref))]
    assert cv.fold_scores.shape == (4, 4)


def test_crossval_singleton_and_failures():
    rng = np.random.default_rng(1)
    X, y = rng.normal(size=(20, 2)), rng.normal(size=20)
    assert crossval(_ridge, [3.0], X, y).best == 3.0

    def flaky(cfg, Xtr, ytr, Xva):
        if cfg == "bad":
            raise ValueError("cannot fit")
        return np.full(len(Xva), ytr.mean())

    cv = crossval(flaky, ["bad", "mean"], X, y)
    assert cv.best == "mean"
    assert math.isnan(cv.scores[0]) and "cannot fit" in cv.failures[0]
    with pytest.raises(N2MMPError):
        crossval(flaky, ["bad"], X, y)
    with pytest.raises(ValueError):
        crossval(flaky, [], X, y)


def test_crossval_ties_resolved_by_simplicity():
    X, y = np.zeros((10, 1)), np.arange(10.0)
    const = lambda cfg, Xtr, ytr, Xva: np.full(len(Xva), ytr.mean())
    assert crossval(const, [1, 2, 3], X, y).best == 1
    assert crossval(const, [1, 2, 3], X, y, simplicity=lambda c: -c).best == 3


def test_compare_same_rows():
    y = np.array([1.0, 2.0, 3.0, 4.0])
    table = compare({"exact": lambda X: y.copy(), "mean": lambda X: np.full(4, 2.5)}, np.zeros((4, 5)), y)
    assert table.rows["exact"].r_squared == 1.0 and table.rows["exact"].rmse == 0.0
    assert table.rows["mean"].r_squared == pytest.approx(0.0, abs=1e-15)
    text = table.render()
    assert text.splitlines()[0].split() == ["Model", "R2", "RMSE"]
    assert len(text.splitlines()) == 3
    assert set(json.loads(table.to_json())) == {"exact", "mean"}


def test_sensitivity_with_linear_model():
    data = synthesize(60, seed=2)
    model = fit_mlr(data.X, data.y)
    report = sensitivity(model.predict, data, grid_points=7)
    lo = data.X.min(axis=0)
    for j, name in enumerate(FEATURE_NAMES):
        grid, pred = report.sweeps[name]
        assert len(grid) == 7 and grid[0] == lo[j] and grid[-1] == data.X[:, j].max()
        expected = model.predict(lo) + model.coefficients[j + 1] * (grid - lo[j])
        np.testing.assert_allclose(pred, expected, rtol=1e-10, atol=1e-9)
    np.testing.assert_allclose(
        report.correlations, [np.corrcoef(data.X[:, j], model.predict(data.X))[0, 1] for j in range(5)], atol=1e-12
    )
    rows = report.correlation_rows()
    assert [r[0] for r in rows] == list(FEATURE_NAMES)


def test_sensitivity_single_input_model_is_fully_correlated():
    data = synthesize(30, seed=3)
    report = sensitivity(lambda X: 2.0 - 3.0 * np.atleast_2d(X)[:, 2], data)
    assert report.correlations[2] == pytest.approx(-1.0, abs=1e-12)
    with pytest.raises(ValueError):
        sensitivity(lambda X: X[:, 0], data, grid_points=1)
