"""Regression trees and tree ensembles (bagging, random forest, boosting).

Trees are grown greedily top-down.  At every node each candidate feature is
tried at the midpoints between consecutive distinct sorted values, and the
(feature, cut) pair with the smallest summed child RSS wins; rows with
``x_j < s`` go left.  Exact and near ties (relative 1e-9) resolve to the
lower feature index, then the lower cut-point.  Nodes are expanded in
breadth-first order, which is what ``max_splits`` counts against.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .exceptions import OOBUndefinedError

TIE_RTOL = 1e-9
TIE_ATOL = 1e-13
GAIN_RTOL = 1e-12


@dataclass(frozen=True)
class RegressionTree:
    """Flat-array binary tree; ``feature[i] == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray
    feature_subsets: tuple = ()

    @property
    def n_leaves(self):
        return int(np.sum(self.feature < 0))

    @property
    def n_splits(self):
        return int(np.sum(self.feature >= 0))

    def apply(self, X):
        """Index of the leaf reached by each row."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        node = np.zeros(len(X), dtype=int)
        active = np.flatnonzero(self.feature[node] >= 0)
        while len(active):
            nd = node[active]
            go_left = X[active, self.feature[nd]] < self.threshold[nd]
            node[active] = np.where(go_left, self.left[nd], self.right[nd])
            active = active[self.feature[node[active]] >= 0]
        return node

    def predict(self, X):
        return self.value[self.apply(X)]

    def to_dict(self, node=0):
        if self.feature[node] < 0:
            return {"value": float(self.value[node]), "n": int(self.n_samples[node])}
        return {
            "feature": int(self.feature[node]),
            "threshold": float(self.threshold[node]),
            "n": int(self.n_samples[node]),
            "left": self.to_dict(int(self.left[node])),
            "right": self.to_dict(int(self.right[node])),
        }

    @classmethod
    def from_dict(cls, d):
        feature, threshold, left, right, value, count = [], [], [], [], [], []

        def visit(rec):
            i = len(feature)
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append(0.0)
            count.append(int(rec.get("n", 0)))
            if "feature" in rec:
                feature[i] = int(rec["feature"])
                threshold[i] = float(rec["threshold"])
                left[i] = visit(rec["left"])
                right[i] = visit(rec["right"])
            else:
                value[i] = float(rec["value"])
            return i

        visit(d)
        return _make_tree(feature, threshold, left, right, value, count)

    def render(self, names=None):
        """Indented text view: internal nodes show ``x_j < s``, leaves their constant."""
        lines = []

        def label(j):
            return names[j] if names else f"x{j + 1}"

        def walk(node, depth):
            pad = "  " * depth
            if self.feature[node] < 0:
                lines.append(f"{pad}leaf: {self.value[node]:.6g} (n={self.n_samples[node]})")
                return
            lines.append(f"{pad}{label(self.feature[node])} < {self.threshold[node]:.6g}")
            walk(int(self.left[node]), depth + 1)
            lines.append(f"{pad}{label(self.feature[node])} >= {self.threshold[node]:.6g}")
            walk(int(self.right[node]), depth + 1)

        walk(0, 0)
        return "\n".join(lines) + "\n"

    def structure(self, node=0):
        """Nested tuples for exact comparisons in tests."""
        if self.feature[node] < 0:
            return ("leaf", float(self.value[node]))
        return (
            int(self.feature[node]),
            float(self.threshold[node]),
            self.structure(int(self.left[node])),
            self.structure(int(self.right[node])),
        )


def _make_tree(feature, threshold, left, right, value, count, subsets=()):
    return RegressionTree(
        np.asarray(feature, dtype=int),
        np.asarray(threshold, dtype=float),
        np.asarray(left, dtype=int),
        np.asarray(right, dtype=int),
        np.asarray(value, dtype=float),
        np.asarray(count, dtype=int),
        tuple(subsets),
    )


def _cut_point(lo, hi):
    s = 0.5 * (lo + hi)
    # adjacent floats: the midpoint may round onto ``lo``
    return s if lo < s <= hi else hi


def best_split(Xn, yn, features, min_leaf_size):
    """Best ``(feature, cut, child_rss)`` for one node, or ``None``.

    ``features`` must be sorted ascending.
    """
    n = len(yn)
    if n < 2 * min_leaf_size:
        return None
    cols = Xn[:, features]
    order = np.argsort(cols, axis=0, kind="stable")
    xs = np.take_along_axis(cols, order, axis=0)
    ys = yn[order]
    cs = np.cumsum(ys, axis=0)[:-1]
    cs2 = np.cumsum(ys * ys, axis=0)[:-1]
    total, total2 = yn.sum(), np.dot(yn, yn)
    n_left = np.arange(1, n)[:, None]
    n_right = n - n_left
    rss = (cs2 - cs**2 / n_left) + ((total2 - cs2) - (total - cs) ** 2 / n_right)
    valid = (xs[:-1] < xs[1:]) & (n_left >= min_leaf_size) & (n_right >= min_leaf_size)
    if not valid.any():
        return None
    rss = np.where(valid, np.maximum(rss, 0.0), np.inf)
    lo = rss.min()
    parent = float(np.sum((yn - total / n) ** 2))
    pos, col = np.nonzero(rss <= lo + TIE_RTOL * lo + TIE_ATOL * parent)
    k = np.lexsort((pos, col))[0]
    p, c = pos[k], col[k]
    return int(features[c]), _cut_point(xs[p, c], xs[p + 1, c]), float(lo)


def rt_fit(X, y, min_leaf_size=1, max_splits=None, feature_sampler=None) -> RegressionTree:
    """Grow a regression tree.

    ``feature_sampler(P)`` returns the candidate feature indices for one
    node (random forest); by default every feature is a candidate.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    if len(y) == 0:
        raise ValueError("cannot fit a tree on an empty training set")
    if min_leaf_size < 1:
        raise ValueError("min_leaf_size must be >= 1")
    P = X.shape[1]
    all_features = np.arange(P)
    feature, threshold, left, right, value, count = [], [], [], [], [], []
    rows_of = []
    subsets = []

    def new_node(rows):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(float(np.mean(y[rows])))
        count.append(len(rows))
        rows_of.append(rows)
        return len(feature) - 1

    queue = deque([new_node(np.arange(len(y)))])
    n_splits = 0
    while queue:
        if max_splits is not None and n_splits >= max_splits:
            break
        node = queue.popleft()
        rows = rows_of[node]
        yn = y[rows]
        if len(rows) < 2 * min_leaf_size or np.ptp(yn) == 0.0:
            continue
        if feature_sampler is None:
            feats = all_features
        else:
            feats = np.sort(np.asarray(feature_sampler(P), dtype=int))
            subsets.append(tuple(feats.tolist()))
        found = best_split(X[rows], yn, feats, min_leaf_size)
        if found is None:
            continue
        j, s, child_rss = found
        parent_rss = float(np.sum((yn - yn.mean()) ** 2))
        if not child_rss < parent_rss * (1.0 - GAIN_RTOL):
            continue
        go_left = X[rows, j] < s
        feature[node] = j
        threshold[node] = s
        left[node] = new_node(rows[go_left])
        right[node] = new_node(rows[~go_left])
        queue.append(left[node])
        queue.append(right[node])
        n_splits += 1
    return _make_tree(feature, threshold, left, right, value, count, subsets)


def rt_predict(tree: RegressionTree, x) -> float:
    return float(tree.predict(np.atleast_2d(x))[0])


def rt_select_leaf_size(X, y, grid=range(1, 21), folds=5, seed=0):
    """CV over minimum leaf size; ties go to the larger (simpler) leaf."""
    from .evaluation import crossval

    def fit_predict(leaf, Xtr, ytr, Xva):
        return rt_fit(Xtr, ytr, min_leaf_size=leaf).predict(Xva)

    return crossval(fit_predict, list(grid), X, y, folds=folds, seed=seed, simplicity=lambda s: -s)


# --------------------------------------------------------------------------
# ensembles


@dataclass(frozen=True)
class Ensemble:
    """Fitted tree ensemble.

    ``bootstrap[b]`` holds the row indices drawn for member ``b`` (bagging
    and random forest).  Bagging/RF predict the plain member mean; boosting
    predicts ``gamma * sum(member outputs)`` starting from ``F_0 = 0``.
    """

    kind: str
    members: tuple
    bootstrap: tuple = ()
    m: int | None = None
    gamma: float | None = None
    seed: int | None = None
    n_train: int = 0
    train_mse: tuple = field(default=())

    def member_predictions(self, X):
        return np.array([t.predict(X) for t in self.members])

    def predict(self, X):
        preds = self.member_predictions(X)
        if self.kind == "boosting":
            return self.gamma * preds.sum(axis=0)
        return preds.mean(axis=0)

    def staged_predict(self, X):
        """Row ``b`` is the prediction of the first ``b + 1`` members."""
        preds = self.member_predictions(X)
        csum = np.cumsum(preds, axis=0)
        if self.kind == "boosting":
            return self.gamma * csum
        return csum / np.arange(1, len(preds) + 1)[:, None]

    def truncate(self, size):
        if not 1 <= size <= len(self.members):
            raise ValueError(f"size must be in [1, {len(self.members)}]")
        return Ensemble(
            self.kind,
            self.members[:size],
            self.bootstrap[:size],
            self.m,
            self.gamma,
            self.seed,
            self.n_train,
            self.train_mse[:size],
        )

    def to_dict(self):
        return {
            "type": self.kind,
            "m": self.m,
            "gamma": self.gamma,
            "seed": self.seed,
            "n_train": self.n_train,
            "bootstrap": [list(map(int, b)) for b in self.bootstrap],
            "train_mse": list(self.train_mse),
            "members": [t.to_dict() for t in self.members],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            d["type"],
            tuple(RegressionTree.from_dict(t) for t in d["members"]),
            tuple(np.array(b, dtype=int) for b in d.get("bootstrap", [])),
            d.get("m"),
            d.get("gamma"),
            d.get("seed"),
            int(d.get("n_train", 0)),
            tuple(d.get("train_mse", [])),
        )


def ensemble_predict(ensemble: Ensemble, x) -> float:
    return float(ensemble.predict(np.atleast_2d(x))[0])


def _member_rngs(seed, b):
    boot = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(b, 0)))
    feat = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(b, 1)))
    return boot, feat


def bootstrap_rows(seed, b, n):
    """Row indices drawn (with replacement) for ensemble member ``b``."""
    return _member_rngs(seed, b)[0].integers(0, n, size=n)


def _bagged(kind, X, y, B, seed, m, min_leaf_size, bootstrap):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    if B < 1:
        raise ValueError("B must be >= 1")
    n, P = X.shape
    members, draws = [], []
    for b in range(B):
        boot_rng, feat_rng = _member_rngs(seed, b)
        rows = boot_rng.integers(0, n, size=n) if bootstrap else np.arange(n)
        sampler = None
        if m is not None:
            sampler = lambda p, rng=feat_rng: rng.choice(p, size=m, replace=False)
        members.append(rt_fit(X[rows], y[rows], min_leaf_size=min_leaf_size, feature_sampler=sampler))
        draws.append(rows)
    return Ensemble(kind, tuple(members), tuple(draws), m, None, seed, n)


def bagging_fit(X, y, B, seed=0, min_leaf_size=1, bootstrap=True) -> Ensemble:
    """Bootstrap-aggregated deep trees.

    ``bootstrap=False`` trains every member on the rows in their original
    order (identity resample); it exists for degenerate-case tests.
    """
    return _bagged("bagging", X, y, B, seed, None, min_leaf_size, bootstrap)


def rf_fit(X, y, B, m, seed=0, min_leaf_size=1) -> Ensemble:
    """Random forest: bagging with ``m`` random candidate features per node.

    Member ``b`` draws its bootstrap from the same stream as bagging member
    ``b``, so ``m = P`` reproduces :func:`bagging_fit` with the same seed.
    """
    P = np.atleast_2d(X).shape[1]
    if not 1 <= m <= P:
        raise ValueError(f"m must be in [1, {P}]")
    return _bagged("random_forest", X, y, B, seed, m, min_leaf_size, True)


@dataclass(frozen=True)
class OOBResult:
    mse: float
    n_used: int
    n_skipped: int


def _oob_matrix(ensemble, X):
    preds = ensemble.member_predictions(X)
    n = len(X)
    oob = np.ones((len(ensemble.members), n), dtype=bool)
    for b, rows in enumerate(ensemble.bootstrap):
        oob[b, np.asarray(rows, dtype=int)] = False
    return preds, oob


def oob_error(ensemble: Ensemble, X, y) -> OOBResult:
    """Mean squared error of out-of-bag predictions.

    Each training row is predicted by the average of the members whose
    bootstrap left it out; rows that are in-bag for every member are
    skipped and counted.
    """
    y = np.asarray(y, dtype=float)
    preds, oob = _oob_matrix(ensemble, X)
    counts = oob.sum(axis=0)
    used = counts > 0
    if not used.any():
        raise OOBUndefinedError("every row is in-bag for every member")
    avg = (preds * oob).sum(axis=0)[used] / counts[used]
    mse = float(np.mean((y[used] - avg) ** 2))
    return OOBResult(mse, int(used.sum()), int((~used).sum()))


def oob_curve(ensemble: Ensemble, X, y):
    """OOB MSE of every prefix ``1..B`` of the ensemble (``nan`` if undefined)."""
    y = np.asarray(y, dtype=float)
    preds, oob = _oob_matrix(ensemble, X)
    sums = np.cumsum(preds * oob, axis=0)
    counts = np.cumsum(oob, axis=0)
    out = np.full(len(preds), np.nan)
    for b in range(len(preds)):
        used = counts[b] > 0
        if used.any():
            out[b] = np.mean((y[used] - sums[b, used] / counts[b, used]) ** 2)
    return out


def boosting_fit(X, y, B, gamma, max_splits=2, min_leaf_size=1) -> Ensemble:
    """Least-squares boosting with shrinkage.

    ``F_0 = 0``; each round fits a tree with at most ``max_splits`` splits to
    the residual of the current ensemble and adds ``gamma`` times it.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    if B < 1:
        raise ValueError("B must be >= 1")
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    F = np.zeros(len(y))
    r = y.copy()
    members, trace = [], []
    for _ in range(B):
        tree = rt_fit(X, r, min_leaf_size=min_leaf_size, max_splits=max_splits)
        F = F + gamma * tree.predict(X)
        r = y - F
        members.append(tree)
        trace.append(float(np.mean(r**2)))
    return Ensemble("boosting", tuple(members), (), None, float(gamma), None, len(y), tuple(trace))


# --------------------------------------------------------------------------
# ensemble size selection


@dataclass
class OOBSweep:
    """OOB curves per predictor-subset size (``None`` for bagging)."""

    curves: dict
    best_m: int | None
    best_B: int
    best_mse: float


def select_bagging(X, y, B_max=200, seed=0) -> tuple:
    """Fit ``B_max`` members and keep the prefix with the smallest OOB MSE."""
    ens = bagging_fit(X, y, B_max, seed)
    curve = oob_curve(ens, X, y)
    b = int(np.nanargmin(curve))
    return ens.truncate(b + 1), OOBSweep({None: curve}, None, b + 1, float(curve[b]))


def select_random_forest(X, y, m_grid=(1, 2, 3, 4), B_max=200, seed=0) -> tuple:
    curves, best = {}, None
    for m in m_grid:
        ens = rf_fit(X, y, B_max, m, seed)
        curve = oob_curve(ens, X, y)
        curves[m] = curve
        b = int(np.nanargmin(curve))
        cand = (float(curve[b]), b + 1, m)
        if best is None or cand < best[0]:
            best = (cand, ens)
    (mse, B, m), ens = best
    return ens.truncate(B), OOBSweep(curves, m, B, mse)


@dataclass
class BoostingCV:
    """Mean validation MSE for every ``(gamma, B)`` pair of the grid."""

    gammas: tuple
    sizes: tuple
    scores: np.ndarray
    best_gamma: float
    best_B: int
    best_score: float

    def per_gamma_optima(self):
        out = []
        for gi, g in enumerate(self.gammas):
            bi = int(np.argmin(self.scores[gi]))
            out.append((g, self.sizes[bi], float(self.scores[gi, bi])))
        return out


def boosting_cv(X, y, gammas=(0.1, 0.2, 0.3, 0.4, 0.5), sizes=tuple(range(10, 201, 10)),
                folds=5, seed=0, max_splits=2) -> BoostingCV:
    """k-fold CV over learning rate and ensemble size.

    One ``max(sizes)``-member ensemble per fold and learning rate; smaller
    sizes are read off its staged predictions.  Ties go to fewer members.
    """
    from .partition import kfold_split

    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    sizes = tuple(sorted(sizes))
    assignment = kfold_split(len(y), folds, seed)
    scores = np.zeros((len(gammas), len(sizes)))
    stage_idx = np.array(sizes) - 1
    for gi, g in enumerate(gammas):
        for f in range(1, folds + 1):
            tr = assignment.training_rows(f)
            va = assignment.validation_rows(f)
            ens = boosting_fit(X[tr], y[tr], sizes[-1], g, max_splits=max_splits)
            staged = ens.staged_predict(X[va])[stage_idx]
            scores[gi] += np.mean((staged - y[va]) ** 2, axis=1)
    scores /= folds
    flat = [(scores[gi, bi], sizes[bi], gi) for gi in range(len(gammas)) for bi in range(len(sizes))]
    lo = min(s for s, _, _ in flat)
    tied = [(B, gi) for s, B, gi in flat if s <= lo + 1e-12 * max(abs(lo), 1e-300)]
    B, gi = min(tied)
    return BoostingCV(tuple(gammas), sizes, scores, float(gammas[gi]), int(B), float(scores[gi, sizes.index(B)]))
