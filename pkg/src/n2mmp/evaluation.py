"""Metrics, k-fold cross-validation, model comparison and sensitivity analysis."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .dataset import FEATURE_NAMES, Dataset, pearson
from .exceptions import InsufficientDataError, N2MMPError
from .partition import kfold_split


def _pair(y, yhat):
    y = np.asarray(y, dtype=float).ravel()
    yhat = np.asarray(yhat, dtype=float).ravel()
    if y.shape != yhat.shape:
        raise ValueError(f"length mismatch: {y.shape[0]} vs {yhat.shape[0]}")
    if len(y) < 2:
        raise InsufficientDataError("metrics need at least 2 points")
    return y, yhat


def rmse(y, yhat) -> float:
    y, yhat = _pair(y, yhat)
    return float(np.sqrt(np.mean((y - yhat) ** 2)))


def r2(y, yhat) -> float:
    y, yhat = _pair(y, yhat)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        raise InsufficientDataError("R^2 undefined for a constant target")
    return 1.0 - float(np.sum((y - yhat) ** 2)) / ss_tot


@dataclass(frozen=True)
class Metrics:
    r_squared: float
    rmse: float


def metrics(y, yhat) -> Metrics:
    return Metrics(r2(y, yhat), rmse(y, yhat))


# --------------------------------------------------------------------------
# cross-validation


@dataclass
class CVResult:
    """Per-config mean validation MSE.

    ``scores[i]`` belongs to ``configs[i]``; failed configs have ``nan`` and
    an entry in ``failures``.
    """

    configs: list
    scores: np.ndarray
    fold_scores: np.ndarray
    best: object
    best_score: float
    failures: dict = field(default_factory=dict)

    def curve(self):
        return list(zip(self.configs, self.scores.tolist()))


def crossval(fit_predict, configs, X, y, folds=5, seed=0, simplicity=None, rtol=1e-12):
    """Grid search by k-fold cross-validation.

    ``fit_predict(config, X_train, y_train, X_val)`` returns validation
    predictions.  The best config minimizes the mean fold MSE; scores within
    ``rtol`` of the minimum count as ties, resolved towards the smallest
    ``simplicity(config)`` (grid order by default).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    configs = list(configs)
    if not configs:
        raise ValueError("configuration grid is empty")
    assignment = kfold_split(len(y), folds, seed)
    fold_scores = np.full((len(configs), folds), np.nan)
    failures = {}
    for ci, cfg in enumerate(configs):
        try:
            for f in range(1, folds + 1):
                tr = assignment.training_rows(f)
                va = assignment.validation_rows(f)
                assert not set(tr.tolist()) & set(va.tolist())
                pred = np.asarray(fit_predict(cfg, X[tr], y[tr], X[va]), dtype=float)
                fold_scores[ci, f - 1] = float(np.mean((y[va] - pred) ** 2))
        except (N2MMPError, ValueError, np.linalg.LinAlgError) as exc:
            fold_scores[ci, :] = np.nan
            failures[ci] = f"{type(exc).__name__}: {exc}"
    scores = fold_scores.mean(axis=1)
    ok = np.flatnonzero(np.isfinite(scores))
    if len(ok) == 0:
        raise N2MMPError(f"every configuration failed during cross-validation: {failures}")
    lo = scores[ok].min()
    tied = [i for i in ok if scores[i] <= lo + rtol * max(abs(lo), 1e-300)]
    key = simplicity or (lambda cfg: 0)
    best_i = min(tied, key=lambda i: (key(configs[i]), i))
    return CVResult(configs, scores, fold_scores, configs[best_i], float(scores[best_i]), failures)


# --------------------------------------------------------------------------
# comparison


@dataclass
class ComparisonTable:
    rows: dict

    def render(self) -> str:
        width = max([len("Model")] + [len(n) for n in self.rows])
        lines = [f"{'Model':<{width}}  {'R2':>8}  {'RMSE':>8}"]
        for name, m in self.rows.items():
            lines.append(f"{name:<{width}}  {m.r_squared:>8.4f}  {m.rmse:>8.4f}")
        return "\n".join(lines) + "\n"

    def to_dict(self):
        return {name: {"r_squared": m.r_squared, "rmse": m.rmse} for name, m in self.rows.items()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def compare(predictors, X_test, y_test) -> ComparisonTable:
    """Score each ``name -> predict(X_raw)`` callable on the same test rows (MPa)."""
    rows = {}
    for name, predict in predictors.items():
        rows[name] = metrics(y_test, predict(X_test))
    return ComparisonTable(rows)


# --------------------------------------------------------------------------
# sensitivity


@dataclass
class SensitivityReport:
    """Input/prediction correlations and one-at-a-time sweeps.

    ``sweeps[name]`` is ``(grid, predictions)`` with the named input varied
    from its minimum to maximum and every other input held at its minimum.
    """

    correlations: np.ndarray
    experimental_correlations: np.ndarray
    sweeps: dict

    def correlation_rows(self):
        return [
            (name, float(e), float(m))
            for name, e, m in zip(FEATURE_NAMES, self.experimental_correlations, self.correlations)
        ]


def sensitivity(predict, data: Dataset, grid_points: int = 50) -> SensitivityReport:
    """Two-way sensitivity of a fitted model over the raw-unit databank.

    ``predict`` maps raw inputs to MPa.
    """
    if grid_points < 2:
        raise ValueError("grid_points must be >= 2")
    X = data.X
    pred = np.asarray(predict(X), dtype=float)
    corr = np.array([pearson(X[:, j], pred) for j in range(X.shape[1])])
    exp_corr = np.array([pearson(X[:, j], data.y) for j in range(X.shape[1])])
    lo, hi = X.min(axis=0), X.max(axis=0)
    sweeps = {}
    for j, name in enumerate(FEATURE_NAMES):
        grid = np.linspace(lo[j], hi[j], grid_points)
        Q = np.tile(lo, (grid_points, 1))
        Q[:, j] = grid
        sweeps[name] = (grid, np.asarray(predict(Q), dtype=float))
    return SensitivityReport(corr, exp_corr, sweeps)
