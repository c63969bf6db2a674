"""Wavelet neural network, general regression neural network and extreme
learning machine."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import expit

from .exceptions import ConfigurationError, TrainingDivergedError

# --------------------------------------------------------------------------
# wavelet neural network

WAVELET_M = 1
WAVELET_FB = 0.5
WAVELET_FC = 0.5
ETA1 = 0.01
ETA2 = 0.001
MAX_EPOCHS = 100
EFFECTIVENESS = 3.5


def widrow_hidden_size(n_train, effectiveness=EFFECTIVENESS, params_per_neuron=8):
    """Hidden-layer width from the free-parameter budget ``W = N * eff``.

    ``params_per_neuron`` is P input weights + translation + dilation + output
    weight, i.e. 8 for five inputs.
    """
    if n_train <= 0 or effectiveness <= 0 or params_per_neuron <= 0:
        raise ConfigurationError("Widrow sizing needs positive arguments")
    budget = n_train * effectiveness
    L = int(math.floor(budget / params_per_neuron + 1e-9))
    if L < 1:
        raise ConfigurationError(
            f"parameter budget {budget:g} is too small for one neuron of {params_per_neuron} parameters"
        )
    return L


def _sinc(b):
    # sin(b)/b, not the normalized sin(pi b)/(pi b)
    return np.sinc(np.asarray(b, dtype=float) / np.pi)


def _dsinc(b):
    b = np.asarray(b, dtype=float)
    small = np.abs(b) < 1e-4
    safe = np.where(small, 1.0, b)
    exact = (safe * np.cos(safe) - np.sin(safe)) / safe**2
    series = -b / 3.0 + b**3 / 30.0
    return np.where(small, series, exact)


def wavelet(u, m=WAVELET_M, fb=WAVELET_FB, fc=WAVELET_FC):
    """Real part of the frequency B-spline wavelet.

    ``sqrt(fb) * sinc(fb*u/m)**m * cos(2*pi*fc*u)``.
    """
    u = np.asarray(u, dtype=float)
    return math.sqrt(fb) * _sinc(fb * u / m) ** m * np.cos(2.0 * np.pi * fc * u)


def wavelet_derivative(u, m=WAVELET_M, fb=WAVELET_FB, fc=WAVELET_FC):
    u = np.asarray(u, dtype=float)
    arg = fb * u / m
    s = _sinc(arg)
    omega = 2.0 * np.pi * fc
    ds = m * s ** (m - 1) * _dsinc(arg) * (fb / m)
    return math.sqrt(fb) * (ds * np.cos(omega * u) - s**m * omega * np.sin(omega * u))


@dataclass(frozen=True)
class WnnModel:
    """Single-hidden-layer wavelet network.

    Hidden unit ``j`` sees ``u_j = (w_j . x - b_j) / a_j`` and the output is
    ``sum_j beta_j * H(u_j)``.
    """

    W: np.ndarray
    b: np.ndarray
    a: np.ndarray
    beta: np.ndarray
    m: int = WAVELET_M
    fb: float = WAVELET_FB
    fc: float = WAVELET_FC
    eta1: float = ETA1
    eta2: float = ETA2
    max_epochs: int = MAX_EPOCHS
    sse_threshold: float = 1e-4
    sse_trace: tuple = ()

    def __post_init__(self):
        for name in ("W", "b", "a", "beta"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if np.any(self.a == 0):
            raise ConfigurationError("dilation factors must be non-zero")

    @property
    def hidden_count(self):
        return len(self.beta)

    def hidden(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        net = X @ self.W.T
        u = (net - self.b) / self.a
        return net, u

    def predict(self, X):
        _, u = self.hidden(X)
        return wavelet(u, self.m, self.fb, self.fc) @ self.beta

    def to_dict(self):
        return {
            "type": "wnn",
            "W": self.W.tolist(),
            "b": self.b.tolist(),
            "a": self.a.tolist(),
            "beta": self.beta.tolist(),
            "m": self.m,
            "fb": self.fb,
            "fc": self.fc,
            "eta1": self.eta1,
            "eta2": self.eta2,
            "max_epochs": self.max_epochs,
            "sse_threshold": self.sse_threshold,
            "sse_trace": list(self.sse_trace),
        }

    @classmethod
    def from_dict(cls, d):
        kw = {k: v for k, v in d.items() if k != "type"}
        kw["sse_trace"] = tuple(kw.get("sse_trace", ()))
        return cls(**kw)


def wnn_forward(model: WnnModel, x) -> float:
    return float(model.predict(np.atleast_2d(x))[0])


def wnn_init(n_inputs, hidden_count, X, seed, **constants) -> WnnModel:
    """Random initial network.

    ``W`` and ``beta`` are uniform on [-1, 1]; each translation ``b_j`` is
    uniform over the range of unit ``j``'s net input on ``X``; dilations are
    uniform on [0.5, 2].
    """
    if hidden_count < 1:
        raise ConfigurationError("hidden_count must be >= 1")
    rng = np.random.default_rng(seed)
    W = rng.uniform(-1.0, 1.0, size=(hidden_count, n_inputs))
    beta = rng.uniform(-1.0, 1.0, size=hidden_count)
    net = np.atleast_2d(X) @ W.T
    b = rng.uniform(net.min(axis=0), net.max(axis=0))
    a = rng.uniform(0.5, 2.0, size=hidden_count)
    return WnnModel(W, b, a, beta, **constants)


def wnn_gradients(model: WnnModel, x, y):
    """Gradients of ``e = (y - yhat)^2 / 2`` for one sample.

    Returns ``(yhat, dW, db, da, dbeta)``.
    """
    x = np.asarray(x, dtype=float)
    net = model.W @ x
    u = (net - model.b) / model.a
    H = wavelet(u, model.m, model.fb, model.fc)
    dH = wavelet_derivative(u, model.m, model.fb, model.fc)
    yhat = float(H @ model.beta)
    delta = -(y - yhat)
    g = delta * model.beta * dH
    dbeta = delta * H
    dW = np.outer(g / model.a, x)
    db = -g / model.a
    da = -g * (net - model.b) / model.a**2
    return yhat, dW, db, da, dbeta


def wnn_train(model: WnnModel, X, y) -> WnnModel:
    """Online gradient descent.

    Every sample updates all parameters from the same forward pass:
    ``beta`` and ``W`` with rate ``eta1``, translations and dilations with
    ``eta2``.  SSE over the training set is recorded after each epoch;
    training stops after ``max_epochs`` or once SSE <= ``sse_threshold``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    W, b, a, beta = (np.array(p) for p in (model.W, model.b, model.a, model.beta))
    work = replace(model, sse_trace=())
    trace = []
    for epoch in range(1, model.max_epochs + 1):
        for xi, yi in zip(X, y):
            _, dW, db, da, dbeta = wnn_gradients(work, xi, yi)
            beta -= model.eta1 * dbeta
            W -= model.eta1 * dW
            b -= model.eta2 * db
            a -= model.eta2 * da
            if np.any(a == 0):
                raise TrainingDivergedError(epoch, "dilation factor collapsed to zero")
            work = _with_params(work, W, b, a, beta)
        sse = float(np.sum((y - work.predict(X)) ** 2))
        if not np.isfinite(sse) or not all(np.all(np.isfinite(p)) for p in (W, b, a, beta)):
            raise TrainingDivergedError(epoch)
        trace.append(sse)
        if sse <= model.sse_threshold:
            break
    return replace(work, sse_trace=tuple(trace))


def _with_params(model, W, b, a, beta):
    # bypasses __post_init__ copying inside the hot loop
    new = object.__new__(WnnModel)
    for f in model.__dataclass_fields__:
        object.__setattr__(new, f, getattr(model, f))
    object.__setattr__(new, "W", W)
    object.__setattr__(new, "b", b)
    object.__setattr__(new, "a", a)
    object.__setattr__(new, "beta", beta)
    return new


def fit_wnn(X, y, hidden_count=None, seed=0, effectiveness=EFFECTIVENESS, **constants) -> WnnModel:
    """Initialize and train a WNN on min-max scaled data."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    P = X.shape[1]
    if hidden_count is None:
        hidden_count = widrow_hidden_size(len(X), effectiveness, P + 3)
    model = wnn_init(P, hidden_count, X, seed, **constants)
    return wnn_train(model, X, y)


# --------------------------------------------------------------------------
# general regression neural network


@dataclass(frozen=True)
class GrnnModel:
    """One Gaussian pattern unit per training row with a shared spread."""

    centers: np.ndarray
    targets: np.ndarray
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ConfigurationError("spread must be positive")
        for name in ("centers", "targets"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def predict(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        d2 = np.sum((X[:, None, :] - self.centers[None, :, :]) ** 2, axis=-1)
        phi = np.exp(-d2 / (2.0 * self.sigma**2))
        num = phi @ self.targets
        den = phi.sum(axis=1)
        out = np.empty(len(X))
        ok = den > 0
        out[ok] = num[ok] / den[ok]
        # every unit underflowed: answer with the nearest center
        if not ok.all():
            out[~ok] = self.targets[np.argmin(d2[~ok], axis=1)]
        return out

    def to_dict(self):
        return {
            "type": "grnn",
            "sigma": self.sigma,
            "centers": self.centers.tolist(),
            "targets": self.targets.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["centers"]), np.array(d["targets"]), float(d["sigma"]))


def grnn_predict(model: GrnnModel, x) -> float:
    return float(model.predict(np.atleast_2d(x))[0])


DEFAULT_SPREAD_GRID = tuple(round(0.05 * i, 2) for i in range(1, 41))


def grnn_select_spread(X, y, grid=DEFAULT_SPREAD_GRID, folds=5, seed=0):
    """CV over the spread grid; ties go to the larger spread."""
    from .evaluation import crossval

    def fit_predict(sigma, Xtr, ytr, Xva):
        return GrnnModel(Xtr, ytr, sigma).predict(Xva)

    return crossval(fit_predict, list(grid), X, y, folds=folds, seed=seed, simplicity=lambda s: -s)


# --------------------------------------------------------------------------
# extreme learning machine

ELM_HIDDEN = 43


@dataclass(frozen=True)
class ElmModel:
    W: np.ndarray
    b: np.ndarray
    beta: np.ndarray
    seed: int = 0

    def __post_init__(self):
        for name in ("W", "b", "beta"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def hidden_count(self):
        return len(self.b)

    def hidden_matrix(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return expit(X @ self.W.T + self.b)

    def predict(self, X):
        return self.hidden_matrix(X) @ self.beta

    def to_dict(self):
        return {
            "type": "elm",
            "seed": self.seed,
            "W": self.W.tolist(),
            "b": self.b.tolist(),
            "beta": self.beta.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["W"]), np.array(d["b"]), np.array(d["beta"]), int(d.get("seed", 0)))


def elm_fit(X, y, hidden_count=ELM_HIDDEN, seed=0) -> ElmModel:
    """Random sigmoid features, output weights by Moore-Penrose pseudoinverse.

    The singular-value cutoff is ``eps * max(H.shape)`` relative to the
    largest singular value, so ``beta`` is the minimum-norm least-squares
    solution.
    """
    if hidden_count < 1:
        raise ConfigurationError("hidden_count must be >= 1")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    rng = np.random.default_rng(seed)
    W = rng.uniform(-1.0, 1.0, size=(hidden_count, X.shape[1]))
    b = rng.uniform(-1.0, 1.0, size=hidden_count)
    H = expit(X @ W.T + b)
    rcond = np.finfo(float).eps * max(H.shape)
    beta = np.linalg.pinv(H, rcond=rcond) @ np.asarray(y, dtype=float)
    return ElmModel(W, b, beta, seed)
