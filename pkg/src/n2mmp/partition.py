"""Train/test partitioning (HSPXY and random) and k-fold assignment.

HSPXY scores every pair of samples with a hybrid distance built from three
normalized terms, the Euclidean input distance ``A``, the cosine similarity
of the input vectors ``B`` and the output distance ``C``::

    D(r, t) = 1 + A - B + C

The training set is seeded with the pair of largest ``D`` and grown by the
max-min rule: each round adds the remaining sample whose smallest distance
to the current training set is largest.  Distances are computed on
z-scored inputs and target, fitted on the full pool.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dataset import Dataset
from .exceptions import UndefinedAngleError


@dataclass(frozen=True)
class PartitionResult:
    train_indices: tuple
    test_indices: tuple
    method: str
    seed: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "train_indices", tuple(int(i) for i in self.train_indices))
        object.__setattr__(self, "test_indices", tuple(int(i) for i in self.test_indices))

    def to_dict(self):
        return {
            "method": self.method,
            "seed": self.seed,
            "train_indices": list(self.train_indices),
            "test_indices": list(self.test_indices),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["train_indices"], d["test_indices"], d["method"], d.get("seed"))

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class FoldAssignment:
    """``fold_of[i]`` is the 1-based validation fold of training row ``i``."""

    k: int
    fold_of: tuple

    def validation_rows(self, fold):
        return np.flatnonzero(np.asarray(self.fold_of) == fold)

    def training_rows(self, fold):
        return np.flatnonzero(np.asarray(self.fold_of) != fold)

    def sizes(self):
        return [int(np.sum(np.asarray(self.fold_of) == f)) for f in range(1, self.k + 1)]


def train_size(n, frac):
    """Number of training rows for fraction ``frac`` of ``n`` (round half up)."""
    if not 0.0 < frac <= 1.0:
        raise ValueError("train fraction must be in (0, 1]")
    return int(math.floor(frac * n + 0.5))


# --------------------------------------------------------------------------
# distances


def cosine_distance(r, t) -> float:
    """Cosine of the angle between two input vectors (a similarity in [-1, 1])."""
    r = np.asarray(r, dtype=float)
    t = np.asarray(t, dtype=float)
    nr, nt = np.linalg.norm(r), np.linalg.norm(t)
    if nr == 0.0 or nt == 0.0:
        raise UndefinedAngleError("cosine angle undefined for a zero vector")
    return float(np.clip(np.dot(r, t) / (nr * nt), -1.0, 1.0))


@dataclass(frozen=True)
class HybridNorms:
    """Pool-wide maxima over distinct pairs used to normalize each term."""

    max_dx: float
    max_cos: float
    max_dy: float


def _ratio(value, maximum):
    return value / maximum if maximum != 0.0 else 0.0 * value


def hybrid_distance(r_x, r_y, t_x, t_y, norms: HybridNorms) -> float:
    """Hybrid distance between samples ``(r_x, r_y)`` and ``(t_x, t_y)``.

    A term whose pool maximum is 0 contributes 0.
    """
    r_x = np.asarray(r_x, dtype=float)
    t_x = np.asarray(t_x, dtype=float)
    a = _ratio(float(np.linalg.norm(r_x - t_x)), norms.max_dx)
    b = _ratio(cosine_distance(r_x, t_x), norms.max_cos)
    c = _ratio(abs(float(r_y) - float(t_y)), norms.max_dy)
    return 1.0 + a - b + c


def _pairwise_terms(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(len(X), -1)
    dx = np.sqrt(np.maximum(np.sum((X[:, None, :] - X[None, :, :]) ** 2, axis=-1), 0.0))
    dy = np.sqrt(np.sum((y[:, None, :] - y[None, :, :]) ** 2, axis=-1))
    norms = np.linalg.norm(X, axis=1)
    if np.any(norms == 0.0):
        raise UndefinedAngleError(
            f"cosine angle undefined for zero input vector at row(s) {np.flatnonzero(norms == 0.0).tolist()}"
        )
    unit = X / norms[:, None]
    dcos = np.clip(unit @ unit.T, -1.0, 1.0)
    return dx, dcos, dy


def hybrid_norms(X, y) -> HybridNorms:
    dx, dcos, dy = _pairwise_terms(X, y)
    off = ~np.eye(len(dx), dtype=bool)
    if not off.any():
        return HybridNorms(0.0, 0.0, 0.0)
    return HybridNorms(float(dx[off].max()), float(dcos[off].max()), float(dy[off].max()))


def hybrid_distance_matrix(X, y):
    """Symmetric matrix of pairwise hybrid distances.

    The diagonal is not meaningful for selection and is set to 0.
    """
    dx, dcos, dy = _pairwise_terms(X, y)
    n = len(dx)
    off = ~np.eye(n, dtype=bool)
    if n < 2:
        return np.zeros((n, n))
    mx, mc, my = dx[off].max(), dcos[off].max(), dy[off].max()
    D = 1.0 + _ratio(dx, mx) - _ratio(dcos, mc) + _ratio(dy, my)
    np.fill_diagonal(D, 0.0)
    return D


def _zscore_pool(data: Dataset):
    table = np.column_stack([data.X, data.y])
    mean = table.mean(axis=0)
    std = table.std(axis=0, ddof=1) if len(table) > 1 else np.ones(table.shape[1])
    std = np.where(std > 0, std, 1.0)
    z = (table - mean) / std
    return z[:, :5], z[:, 5]


def max_min_select(D, q):
    """Greedy max-min selection on a precomputed distance matrix.

    Starts from the argmax pair (row-major over ``i < j``, lowest index on
    ties) and repeatedly adds the candidate whose minimum distance to the
    selected set is largest, ties to the lowest row index.
    """
    D = np.asarray(D, dtype=float)
    n = len(D)
    upper = np.triu_indices(n, k=1)
    flat = D[upper]
    best = int(np.argmax(flat))
    selected = [int(upper[0][best]), int(upper[1][best])]
    remaining = np.ones(n, dtype=bool)
    remaining[selected] = False
    min_dist = np.minimum(D[selected[0]], D[selected[1]])
    while len(selected) < q:
        cand = np.flatnonzero(remaining)
        pick = int(cand[np.argmax(min_dist[cand])])
        selected.append(pick)
        remaining[pick] = False
        min_dist = np.minimum(min_dist, D[pick])
    return selected


def hspxy_select(data: Dataset, q: int) -> PartitionResult:
    n = len(data)
    if not 2 <= q <= n:
        raise ValueError(f"HSPXY needs 2 <= q <= N, got q={q}, N={n}")
    Xz, yz = _zscore_pool(data)
    D = hybrid_distance_matrix(Xz, yz)
    train = max_min_select(D, q)
    test = sorted(set(range(n)) - set(train))
    return PartitionResult(train, test, "hspxy", None)


def random_split(data: Dataset, q: int, seed: int) -> PartitionResult:
    n = len(data)
    if not 1 <= q <= n:
        raise ValueError(f"random split needs 1 <= q <= N, got q={q}, N={n}")
    if q == n:
        warnings.warn("training fraction covers every row; test set is empty", UserWarning, stacklevel=2)
    perm = np.random.default_rng(seed).permutation(n)
    return PartitionResult(sorted(perm[:q].tolist()), sorted(perm[q:].tolist()), "random", seed)


def split(data: Dataset, method: str, train_frac: float = 0.8, seed: int = 0) -> PartitionResult:
    q = train_size(len(data), train_frac)
    if method == "hspxy":
        return hspxy_select(data, q)
    if method == "random":
        return random_split(data, q, seed)
    raise ValueError(f"unknown split method {method!r}")


def kfold_split(n_train: int, k: int, seed: int) -> FoldAssignment:
    """Seeded shuffle followed by round-robin fold labels."""
    if k < 2 or k > n_train:
        raise ValueError(f"k-fold needs 2 <= k <= n_train, got k={k}, n_train={n_train}")
    perm = np.random.default_rng(seed).permutation(n_train)
    fold_of = np.empty(n_train, dtype=int)
    fold_of[perm] = np.arange(n_train) % k + 1
    return FoldAssignment(k, tuple(fold_of.tolist()))
