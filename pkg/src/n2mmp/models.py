"""Uniform fit / predict / serialize interface over the twelve regressors.

Every fitted model carries the scaler fitted on its training rows, so
``FittedModel.predict`` takes raw inputs and returns MPa.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset, Scaler, fit_scaler
from .exceptions import ConfigurationError
from .kernel import GPR_INITIAL, GprModel, RvmModel, gpr_fit, rvm_fit, rvm_select_width
from .linear import LinearModel, fit_mlr, fit_pr
from .neighbors import WknnModel, select_k
from .neural import (
    ELM_HIDDEN,
    EFFECTIVENESS,
    ElmModel,
    GrnnModel,
    WnnModel,
    elm_fit,
    fit_wnn,
    grnn_select_spread,
    widrow_hidden_size,
)
from .trees import (
    Ensemble,
    RegressionTree,
    bagging_fit,
    boosting_cv,
    boosting_fit,
    rf_fit,
    rt_fit,
    rt_select_leaf_size,
    select_bagging,
    select_random_forest,
)

MODEL_NAMES = ("mlr", "pr", "wknn", "wnn", "grnn", "elm", "rt", "bagging", "rf", "boosting", "gpr", "rvm")

DISPLAY_NAMES = {
    "mlr": "MLR",
    "pr": "PR",
    "wknn": "WKNN",
    "wnn": "WNN",
    "grnn": "GRNN",
    "elm": "ELM",
    "rt": "RT",
    "bagging": "Bagging RTs",
    "rf": "RF",
    "boosting": "Boosting RTs",
    "gpr": "GPR",
    "rvm": "RVM",
}

# "cv" / "oob" mean: choose by cross-validation / out-of-bag error.
DEFAULT_HYPERPARAMETERS = {
    "mlr": {},
    "pr": {},
    "wknn": {"k": "cv", "k_max": 15},
    "wnn": {"hidden": "widrow", "effectiveness": EFFECTIVENESS, "eta1": 0.01, "eta2": 0.001,
            "max_epochs": 100, "sse_threshold": 1e-4},
    "grnn": {"sigma": "cv"},
    "elm": {"hidden": ELM_HIDDEN},
    "rt": {"min_leaf": "cv", "min_leaf_max": 20},
    "bagging": {"B": "oob", "B_max": 200},
    "rf": {"B": "oob", "m": "oob", "B_max": 200, "m_max": 4},
    "boosting": {"B": "cv", "gamma": "cv", "B_max": 200, "max_splits": 2},
    "gpr": {"sigma0": GPR_INITIAL[0], "sigma_f0": GPR_INITIAL[1], "sigma_l0": GPR_INITIAL[2]},
    "rvm": {"width": "cv"},
}

PROBABILISTIC = ("gpr", "rvm")


def derive_seed(master_seed: int, name: str) -> int:
    """Per-model seed from the master seed and the model's fixed registry slot.

    ``SeedSequence(master, spawn_key=(slot,))`` is a counter-based
    derivation, so selecting a different subset of models never changes a
    given model's stream.
    """
    slot = MODEL_NAMES.index(name)
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(slot,))
    return int(ss.generate_state(1, dtype=np.uint32)[0])


@dataclass
class Curve:
    """Plot-ready table written as CSV."""

    header: tuple
    rows: list


@dataclass(frozen=True)
class FittedModel:
    name: str
    scaler: Scaler
    estimator: object
    hyperparameters: dict = field(default_factory=dict)

    def predict(self, X):
        z = self.estimator.predict(self.scaler.transform_X(np.atleast_2d(X)))
        return self.scaler.inverse_y(z)

    def predict_with_variance(self, X):
        """``(mean, latent_var, observation_var)`` in MPa / MPa^2 (GPR, RVM only)."""
        if self.name not in PROBABILISTIC:
            raise ConfigurationError(f"{self.name} does not provide predictive variance")
        Z = self.scaler.transform_X(np.atleast_2d(X))
        s2 = self.scaler.scale[5] ** 2
        if self.name == "gpr":
            mean, latent, obs = self.estimator.predict(Z, return_var=True)
        else:
            mean, obs = self.estimator.predict(Z, return_var=True)
            latent = obs - self.estimator.noise_var
        return self.scaler.inverse_y(mean), latent * s2, obs * s2

    def to_dict(self):
        return {
            "model": self.name,
            "hyperparameters": self.hyperparameters,
            "scaler": self.scaler.to_dict(),
            "estimator": self.estimator.to_dict(),
        }

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1)
            fh.write("\n")

    @classmethod
    def from_dict(cls, d):
        est = d["estimator"]
        kind = est["type"]
        if kind in ("mlr", "pr"):
            estimator = LinearModel.from_dict(est)
        elif kind == "wknn":
            estimator = WknnModel.from_dict(est)
        elif kind == "wnn":
            estimator = WnnModel.from_dict(est)
        elif kind == "grnn":
            estimator = GrnnModel.from_dict(est)
        elif kind == "elm":
            estimator = ElmModel.from_dict(est)
        elif kind == "rt":
            estimator = _TreeEstimator(RegressionTree.from_dict(est["tree"]))
        elif kind in ("bagging", "random_forest", "boosting"):
            estimator = Ensemble.from_dict(est)
        elif kind == "gpr":
            estimator = GprModel.from_dict(est)
        elif kind == "rvm":
            estimator = RvmModel.from_dict(est)
        else:
            raise ConfigurationError(f"unknown estimator type {kind!r}")
        return cls(d["model"], Scaler.from_dict(d["scaler"]), estimator, d.get("hyperparameters", {}))

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


class _TreeEstimator:
    """Adds the ``{"type": "rt", "tree": ...}`` envelope to a bare tree."""

    def __init__(self, tree):
        self.tree = tree

    def predict(self, X):
        return self.tree.predict(X)

    def to_dict(self):
        return {"type": "rt", "tree": self.tree.to_dict()}


def _resolve(name, overrides):
    params = dict(DEFAULT_HYPERPARAMETERS[name])
    for key, value in (overrides or {}).items():
        if key not in params:
            raise ConfigurationError(f"unknown hyperparameter {name}.{key}")
        params[key] = value
    return params


def _is_auto(value):
    return isinstance(value, str) and value in ("cv", "oob", "widrow")


def fit_model(name, train: Dataset, hyperparameters=None, seed=0, folds=5):
    """Fit one registered model on raw-unit training rows.

    Returns ``(FittedModel, curves)`` where ``curves`` maps an artifact stem
    to a :class:`Curve` (CV curves, OOB curves, training traces).
    """
    if name not in MODEL_NAMES:
        raise ConfigurationError(f"unknown model {name!r}; choose from {', '.join(MODEL_NAMES)}")
    p = _resolve(name, hyperparameters)
    scaler = fit_scaler(train, "minmax" if name == "wnn" else "zscore")
    tr = scaler.apply(train)
    X, y = tr.X, tr.y
    s2 = float(scaler.scale[5] ** 2)
    curves = {}
    chosen = {}

    if name == "mlr":
        est = fit_mlr(X, y)
    elif name == "pr":
        est = fit_pr(X, y)
    elif name == "wknn":
        k = p["k"]
        if _is_auto(k):
            cv = select_k(X, y, range(1, int(p["k_max"]) + 1), folds=folds, seed=seed)
            k = cv.best
            curves["wknn_cv"] = Curve(("k", "mean_mse"), cv.curve())
        est = WknnModel(X, y, int(k))
        chosen["k"] = int(k)
    elif name == "wnn":
        hidden = p["hidden"]
        if _is_auto(hidden):
            hidden = widrow_hidden_size(len(y), float(p["effectiveness"]), X.shape[1] + 3)
        est = fit_wnn(
            X, y, int(hidden), seed=seed,
            eta1=float(p["eta1"]), eta2=float(p["eta2"]),
            max_epochs=int(p["max_epochs"]), sse_threshold=float(p["sse_threshold"]),
        )
        chosen["hidden"] = int(hidden)
        curves["wnn_sse"] = Curve(("epoch", "sse"), list(enumerate(est.sse_trace, start=1)))
    elif name == "grnn":
        sigma = p["sigma"]
        if _is_auto(sigma):
            cv = grnn_select_spread(X, y, folds=folds, seed=seed)
            sigma = cv.best
            curves["grnn_cv"] = Curve(("sigma", "mean_mse"), cv.curve())
        est = GrnnModel(X, y, float(sigma))
        chosen["sigma"] = float(sigma)
    elif name == "elm":
        est = elm_fit(X, y, int(p["hidden"]), seed=seed)
        chosen["hidden"] = int(p["hidden"])
    elif name == "rt":
        leaf = p["min_leaf"]
        if _is_auto(leaf):
            cv = rt_select_leaf_size(X, y, range(1, int(p["min_leaf_max"]) + 1), folds=folds, seed=seed)
            leaf = cv.best
            curves["rt_cv"] = Curve(("min_leaf", "mean_mse"), cv.curve())
        est = _TreeEstimator(rt_fit(X, y, min_leaf_size=int(leaf)))
        chosen["min_leaf"] = int(leaf)
    elif name == "bagging":
        B = p["B"]
        if _is_auto(B):
            est, sweep = select_bagging(X, y, int(p["B_max"]), seed=seed)
            curve = sweep.curves[None]
            curves["bagging_oob"] = Curve(
                ("B", "oob_mse", "oob_mse_mpa2"),
                [(b + 1, c, c * s2) for b, c in enumerate(curve.tolist())],
            )
        else:
            est = bagging_fit(X, y, int(B), seed=seed)
        chosen["B"] = len(est.members)
    elif name == "rf":
        B, m = p["B"], p["m"]
        m_max = min(int(p["m_max"]), X.shape[1])
        if _is_auto(B) or _is_auto(m):
            m_grid = range(1, m_max + 1) if _is_auto(m) else [int(m)]
            B_max = int(p["B_max"]) if _is_auto(B) else int(B)
            est, sweep = select_random_forest(X, y, tuple(m_grid), B_max, seed=seed)
            if not _is_auto(B):
                est = rf_fit(X, y, int(B), sweep.best_m, seed=seed)
            curves["rf_oob"] = Curve(
                ("m", "B", "oob_mse", "oob_mse_mpa2"),
                [(mm, b + 1, c, c * s2) for mm, curve in sweep.curves.items()
                 for b, c in enumerate(curve.tolist())],
            )
        else:
            est = rf_fit(X, y, int(B), int(m), seed=seed)
        chosen["B"], chosen["m"] = len(est.members), int(est.m)
    elif name == "boosting":
        B, gamma = p["B"], p["gamma"]
        max_splits = int(p["max_splits"])
        if _is_auto(B) or _is_auto(gamma):
            gammas = (0.1, 0.2, 0.3, 0.4, 0.5) if _is_auto(gamma) else (float(gamma),)
            sizes = tuple(range(10, int(p["B_max"]) + 1, 10)) if _is_auto(B) else (int(B),)
            cv = boosting_cv(X, y, gammas, sizes, folds=folds, seed=seed, max_splits=max_splits)
            B, gamma = cv.best_B, cv.best_gamma
            curves["boosting_cv"] = Curve(
                ("gamma", "B", "mean_mse", "mean_mse_mpa2"),
                [(g, b, float(cv.scores[gi, bi]), float(cv.scores[gi, bi]) * s2)
                 for gi, g in enumerate(cv.gammas) for bi, b in enumerate(cv.sizes)],
            )
        est = boosting_fit(X, y, int(B), float(gamma), max_splits=max_splits)
        chosen["B"], chosen["gamma"] = int(B), float(gamma)
        curves["boosting_train"] = Curve(
            ("B", "train_mse", "train_mse_mpa2"),
            [(b + 1, v, v * s2) for b, v in enumerate(est.train_mse)],
        )
    elif name == "gpr":
        init = (float(p["sigma0"]), float(p["sigma_f0"]), float(p["sigma_l0"]))
        est = gpr_fit(X, y, init)
        chosen["theta"] = list(est.theta)
        chosen["log_likelihood"] = est.log_likelihood
        curves["gpr_lbfgs"] = Curve(("iteration", "log_likelihood"), list(enumerate(est.trace)))
    elif name == "rvm":
        width = p["width"]
        if _is_auto(width):
            cv = rvm_select_width(X, y, folds=folds, seed=seed)
            width = cv.best
            curves["rvm_cv"] = Curve(("width", "mean_mse"), cv.curve())
        est = rvm_fit(X, y, float(width))
        chosen["width"] = float(width)
        chosen["noise_var"] = est.noise_var
        chosen["relevance_vectors"] = len(est.relevance_vectors)
        curves["rvm_likelihood"] = Curve(("action", "log_marginal_likelihood"), list(enumerate(est.trace)))

    record = {**p, **chosen, "seed": seed}
    return FittedModel(name, scaler, est, record), curves
