"""Slow, independently written reference implementations used by the tests.

Nothing here imports the library's algorithms; every oracle works from
plain Python loops (or direct numpy algebra) so agreement is meaningful.
"""

import math

import numpy as np


# --------------------------------------------------------------------------
# partitioning


def hybrid_matrix_loops(X, y):
    """Pairwise hybrid distances with every term normalized by its pool max."""
    n = len(X)
    X = [list(map(float, r)) for r in X]
    y = [float(v) for v in y]

    def euclid(a, b):
        return math.sqrt(sum((p - q) ** 2 for p, q in zip(a, b)))

    def cos(a, b):
        return sum(p * q for p, q in zip(a, b)) / (math.sqrt(sum(p * p for p in a)) * math.sqrt(sum(q * q for q in b)))

    pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
    mx = max(euclid(X[i], X[j]) for i, j in pairs)
    mc = max(cos(X[i], X[j]) for i, j in pairs)
    my = max(abs(y[i] - y[j]) for i, j in pairs)
    D = [[0.0] * n for _ in range(n)]
    for i, j in pairs:
        a = euclid(X[i], X[j]) / mx if mx else 0.0
        b = cos(X[i], X[j]) / mc if mc else 0.0
        c = abs(y[i] - y[j]) / my if my else 0.0
        D[i][j] = 1.0 + a - b + c
    return D


def max_min_loops(D, q):
    """Greedy max-min selection, recomputing every candidate's score each round."""
    n = len(D)
    best, first = -math.inf, None
    for i in range(n):
        for j in range(i + 1, n):
            if D[i][j] > best:
                best, first = D[i][j], (i, j)
    chosen = list(first)
    while len(chosen) < q:
        best, pick = -math.inf, None
        for c in range(n):
            if c in chosen:
                continue
            score = min(D[c][s] for s in chosen)
            if score > best:
                best, pick = score, c
        chosen.append(pick)
    return chosen


# --------------------------------------------------------------------------
# neighbors


def wknn_scan(X, y, q, k):
    """Sort every distance, keep the first ``k``, inverse-square weights."""
    dist = sorted((sum((a - b) ** 2 for a, b in zip(row, q)), i) for i, row in enumerate(X))
    zero = [y[i] for d, i in dist if d == 0.0]
    if zero:
        return sum(zero) / len(zero)
    near = dist[:k]
    num = sum(y[i] / d for d, i in near)
    den = sum(1.0 / d for d, _ in near)
    return num / den


# --------------------------------------------------------------------------
# regression trees


def _rss(values):
    if not values:
        return 0.0
    m = sum(values) / len(values)
    return sum((v - m) ** 2 for v in values)


def brute_tree(X, y, min_leaf=1, rows=None, rtol=1e-9):
    """Exhaustive recursive tree: nested tuples like ``RegressionTree.structure``.

    Every (feature, midpoint) pair is scored by direct child-RSS sums;
    near-ties go to the lower feature, then the lower cut.
    """
    if rows is None:
        rows = list(range(len(y)))
    ys = [float(y[i]) for i in rows]
    leaf = ("leaf", sum(ys) / len(ys))
    if len(rows) < 2 * min_leaf or max(ys) == min(ys):
        return leaf
    parent = _rss(ys)
    cands = []
    for j in range(len(X[0])):
        vals = sorted(set(float(X[i][j]) for i in rows))
        for lo, hi in zip(vals, vals[1:]):
            s = 0.5 * (lo + hi)
            if not lo < s <= hi:
                s = hi
            left = [i for i in rows if X[i][j] < s]
            right = [i for i in rows if not X[i][j] < s]
            if len(left) < min_leaf or len(right) < min_leaf:
                continue
            cands.append((_rss([y[i] for i in left]) + _rss([y[i] for i in right]), j, s, left, right))
    if not cands:
        return leaf
    best = min(c[0] for c in cands)
    tied = [c for c in cands if c[0] <= best + rtol * best + 1e-13 * parent]
    rss, j, s, left, right = min(tied, key=lambda c: (c[1], c[2]))
    if not best < parent * (1 - 1e-12):
        return leaf
    return (j, s, brute_tree(X, y, min_leaf, left, rtol), brute_tree(X, y, min_leaf, right, rtol))


def same_tree(a, b, tol=1e-12):
    if a[0] == "leaf" or b[0] == "leaf":
        return a[0] == b[0] and abs(a[1] - b[1]) <= tol * max(1.0, abs(b[1]))
    return a[0] == b[0] and a[1] == b[1] and same_tree(a[2], b[2], tol) and same_tree(a[3], b[3], tol)


def oob_replay(ensemble, X, y):
    """Per-row loop over members, predicting one row at a time."""
    total, used = 0.0, 0
    for i in range(len(y)):
        preds = [
            float(tree.predict(X[i : i + 1])[0])
            for tree, rows in zip(ensemble.members, ensemble.bootstrap)
            if i not in set(int(r) for r in rows)
        ]
        if preds:
            total += (y[i] - sum(preds) / len(preds)) ** 2
            used += 1
    return total / used, used


# --------------------------------------------------------------------------
# numerical differentiation


def central_difference(f, x, h=1e-6):
    x = np.array(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e.flat[i] = h
        g.flat[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


# --------------------------------------------------------------------------
# cross-validation


def cv_loop(predict, configs, X, y, fold_of):
    """Mean fold MSE for each config using an explicit fold labelling."""
    fold_of = list(fold_of)
    out = []
    for cfg in configs:
        errs = []
        for f in sorted(set(fold_of)):
            tr = [i for i, g in enumerate(fold_of) if g != f]
            va = [i for i, g in enumerate(fold_of) if g == f]
            sq = [(y[i] - predict(cfg, X[tr], y[tr], X[i])) ** 2 for i in va]
            errs.append(sum(sq) / len(sq))
        out.append(sum(errs) / len(errs))
    return out
