"""Distance-weighted k-nearest-neighbors regression."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class WknnModel:
    """Stored (normalized) training rows plus the neighbor count.

    Prediction weights each of the ``k`` nearest neighbors by the inverse
    squared Euclidean distance and returns the normalized weighted mean.
    ``literal=True`` switches to ``sum(y_j * d_j^2) / k``, which is what the
    printed estimator evaluates to when the weights are read as divisors.
    """

    X: np.ndarray
    y: np.ndarray
    k: int
    literal: bool = False

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        y = np.array(self.y, dtype=float)
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        if not 1 <= self.k <= len(X):
            raise ValueError(f"k must be in [1, {len(X)}], got {self.k}")

    def predict(self, Q):
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        return np.array([self._predict_one(q) for q in Q])

    def _predict_one(self, q):
        d2 = np.sum((self.X - q) ** 2, axis=1)
        exact = d2 == 0.0
        if exact.any() and not self.literal:
            return float(self.y[exact].mean())
        # stable sort: equal distances resolve to the lower row index
        nearest = np.argsort(d2, kind="stable")[: self.k]
        if self.literal:
            return float(np.sum(self.y[nearest] * d2[nearest]) / self.k)
        w = 1.0 / d2[nearest]
        return float(np.dot(w, self.y[nearest]) / w.sum())

    def to_dict(self):
        return {
            "type": "wknn",
            "k": self.k,
            "literal": self.literal,
            "X": self.X.tolist(),
            "y": self.y.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["X"]), np.array(d["y"]), int(d["k"]), bool(d.get("literal", False)))


def wknn_predict(model: WknnModel, x):
    return float(model.predict(np.atleast_2d(x))[0])


def select_k(X, y, k_grid=range(1, 16), folds=5, seed=0):
    """Pick ``k`` by k-fold CV; ties go to the smaller ``k``.

    Returns the :class:`~n2mmp.evaluation.CVResult`; ``.best`` is the chosen
    ``k`` and ``.curve()`` the ``(k, mean_mse)`` pairs.
    """
    from .evaluation import crossval

    def fit_predict(k, Xtr, ytr, Xva):
        return WknnModel(Xtr, ytr, k).predict(Xva)

    return crossval(fit_predict, list(k_grid), X, y, folds=folds, seed=seed, simplicity=lambda k: k)
