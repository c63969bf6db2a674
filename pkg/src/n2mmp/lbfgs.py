"""Limited-memory BFGS with a backtracking (Armijo) line search."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np


@dataclass
class LBFGSResult:
    x: np.ndarray
    fun: float
    grad: np.ndarray
    iterations: int
    status: str
    trace: list = field(default_factory=list)

    @property
    def converged(self):
        return self.status in ("gradient", "step")


def _two_loop(g, pairs):
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * np.dot(s, q)
        q -= a * y
        alphas.append(a)
    if pairs:
        s, y, _ = pairs[-1]
        q *= np.dot(s, y) / np.dot(y, y)
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * np.dot(y, q)
        q += s * (a - b)
    return -q


def lbfgs_minimize(fun, x0, memory=10, gtol=1e-6, xtol=1e-12, max_iter=200,
                   c1=1e-4, shrink=0.5, max_backtracks=60) -> LBFGSResult:
    """Minimize ``fun(x) -> (value, gradient)``.

    Stops when ``max|g| < gtol`` (status ``"gradient"``), when a step moves
    ``x`` by less than ``xtol`` (``"step"``), at ``max_iter``
    (``"max_iter"``) or when the line search cannot find sufficient
    decrease (``"line_search"``, best point so far returned).  ``trace``
    holds the objective after every accepted step and is non-increasing.
    """
    x = np.array(x0, dtype=float)
    f, g = fun(x)
    g = np.asarray(g, dtype=float)
    trace = [float(f)]
    pairs = deque(maxlen=memory)
    status = "max_iter"
    it = 0
    for it in range(1, max_iter + 1):
        if np.max(np.abs(g)) < gtol:
            status, it = "gradient", it - 1
            break
        d = _two_loop(g, list(pairs))
        slope = float(np.dot(g, d))
        if not slope < 0:
            pairs.clear()
            d = -g
            slope = -float(np.dot(g, g))
        step = 1.0 if pairs else min(1.0, 1.0 / np.linalg.norm(g))
        for _ in range(max_backtracks):
            x_new = x + step * d
            f_new, g_new = fun(x_new)
            if np.isfinite(f_new) and f_new <= f + c1 * step * slope:
                break
            step *= shrink
        else:
            status = "line_search"
            break
        g_new = np.asarray(g_new, dtype=float)
        s = x_new - x
        yv = g_new - g
        sy = float(np.dot(s, yv))
        if sy > 1e-10 * np.linalg.norm(s) * np.linalg.norm(yv):
            pairs.append((s, yv, 1.0 / sy))
        x, f, g = x_new, float(f_new), g_new
        trace.append(f)
        if np.max(np.abs(s)) < xtol:
            status = "step"
            break
    else:
        if np.max(np.abs(g)) < gtol:
            status = "gradient"
    return LBFGSResult(x, float(f), g, it, status, trace)
