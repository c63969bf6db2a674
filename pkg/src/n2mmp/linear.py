"""Multiple linear regression and full quadratic polynomial regression."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .exceptions import SingularDesignError

CONDITION_LIMIT = 1e12


def poly_expand(X):
    """Quadratic expansion with intercept, squares and pairwise products.

    Column order is ``[1, x1..xP, x1^2..xP^2, x1x2, x1x3, ..., x(P-1)xP]``,
    giving ``1 + 2P + P(P-1)/2`` columns (21 for P=5).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    pairs = list(combinations(range(X.shape[1]), 2))
    cross = [X[:, i] * X[:, j] for i, j in pairs]
    return np.column_stack([np.ones(len(X)), X, X**2] + cross)


def linear_design(X):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return np.column_stack([np.ones(len(X)), X])


_EXPANSIONS = {"identity": linear_design, "quadratic_with_interactions": poly_expand}


@dataclass(frozen=True)
class LinearModel:
    coefficients: np.ndarray
    expansion: str = "identity"

    def __post_init__(self):
        c = np.array(self.coefficients, dtype=float)
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)
        if self.expansion not in _EXPANSIONS:
            raise ValueError(f"unknown expansion {self.expansion!r}")

    def design(self, X):
        return _EXPANSIONS[self.expansion](X)

    def predict(self, X):
        return self.design(X) @ self.coefficients

    def to_dict(self):
        kind = "mlr" if self.expansion == "identity" else "pr"
        return {"type": kind, "coefficients": self.coefficients.tolist()}

    @classmethod
    def from_dict(cls, d):
        expansion = "identity" if d["type"] == "mlr" else "quadratic_with_interactions"
        return cls(np.array(d["coefficients"]), expansion)


def ls_fit(A, y):
    """Least-squares coefficients for design ``A``.

    Solved by SVD-based ``lstsq`` rather than forming ``(A^T A)^-1``.  Raises
    :class:`SingularDesignError` when ``cond(A)`` exceeds 1e12.
    """
    A = np.asarray(A, dtype=float)
    y = np.asarray(y, dtype=float)
    if A.shape[0] < A.shape[1]:
        raise SingularDesignError(np.inf, CONDITION_LIMIT)
    sv = np.linalg.svd(A, compute_uv=False)
    cond = np.inf if sv[-1] == 0 else sv[0] / sv[-1]
    if not cond <= CONDITION_LIMIT:
        raise SingularDesignError(cond, CONDITION_LIMIT)
    beta, *_ = np.linalg.lstsq(A, y, rcond=None)
    return beta


def fit_mlr(X, y) -> LinearModel:
    return LinearModel(ls_fit(linear_design(X), y), "identity")


def fit_pr(X, y) -> LinearModel:
    return LinearModel(ls_fit(poly_expand(X), y), "quadratic_with_interactions")
