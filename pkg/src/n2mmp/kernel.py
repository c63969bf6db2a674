"""Gaussian process regression and the relevance vector machine."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.spatial.distance import cdist

from .exceptions import CholeskyError, DegenerateFitError
from .lbfgs import lbfgs_minimize

LOG_2PI = math.log(2.0 * math.pi)

# --------------------------------------------------------------------------
# Gaussian process regression

GPR_INITIAL = (0.7071, 0.7071, 1.0)  # noise std, signal std, length scale


def exp_kernel(X1, X2, sigma_f, sigma_l):
    """Exponential covariance ``sigma_f^2 exp(-||x - x'|| / sigma_l)``."""
    D = cdist(np.atleast_2d(X1), np.atleast_2d(X2))
    return sigma_f**2 * np.exp(-D / sigma_l)


def _chol(K, sigma_f):
    """Cholesky factor with escalating jitter (1e-10 sigma_f^2, doubled up to 6 times)."""
    try:
        return cholesky(K, lower=True)
    except np.linalg.LinAlgError:
        pass
    jitter = 1e-10 * sigma_f**2
    eye = np.eye(len(K))
    for _ in range(7):
        try:
            return cholesky(K + jitter * eye, lower=True)
        except np.linalg.LinAlgError:
            jitter *= 2.0
    raise CholeskyError("covariance matrix is not positive definite even with jitter")


def gpr_log_likelihood(theta, X, y, return_grad=True):
    """Log marginal likelihood of ``y`` and its gradient w.r.t. ``log(theta)``.

    ``theta = (noise std, signal std, length scale)``.
    """
    sigma, sigma_f, sigma_l = (float(t) for t in theta)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    n = len(y)
    D = cdist(X, X)
    K = sigma_f**2 * np.exp(-D / sigma_l)
    Kt = K + sigma**2 * np.eye(n)
    L = _chol(Kt, sigma_f)
    alpha = cho_solve((L, True), y)
    logdet = 2.0 * np.sum(np.log(np.diag(L)))
    ll = -0.5 * float(y @ alpha) - 0.5 * logdet - 0.5 * n * LOG_2PI
    if not return_grad:
        return ll
    inner = np.outer(alpha, alpha) - cho_solve((L, True), np.eye(n))
    dK = (2.0 * sigma**2 * np.eye(n), 2.0 * K, K * D / sigma_l)
    grad = np.array([0.5 * np.sum(inner * d) for d in dK])
    return ll, grad


@dataclass(frozen=True)
class GprModel:
    theta: tuple
    X: np.ndarray
    chol: np.ndarray
    alpha: np.ndarray
    log_likelihood: float
    trace: tuple = ()
    status: str = ""

    @property
    def sigma(self):
        return self.theta[0]

    @property
    def sigma_f(self):
        return self.theta[1]

    @property
    def sigma_l(self):
        return self.theta[2]

    def predict(self, X, return_var=False):
        """Posterior mean; with ``return_var`` also latent and observation variance."""
        Ks = exp_kernel(X, self.X, self.sigma_f, self.sigma_l)
        mean = Ks @ self.alpha
        if not return_var:
            return mean
        v = solve_triangular(self.chol, Ks.T, lower=True)
        latent = self.sigma_f**2 - np.sum(v * v, axis=0)
        if np.any(latent < -1e-10 * max(self.sigma_f**2, 1.0)):
            warnings.warn("negative predictive variance beyond tolerance", RuntimeWarning, stacklevel=2)
        latent = np.maximum(latent, 0.0)
        return mean, latent, latent + self.sigma**2

    def to_dict(self):
        return {
            "type": "gpr",
            "theta": list(self.theta),
            "X": self.X.tolist(),
            "alpha": self.alpha.tolist(),
            "log_likelihood": self.log_likelihood,
            "trace": list(self.trace),
            "status": self.status,
        }

    @classmethod
    def from_dict(cls, d):
        X = np.array(d["X"])
        sigma, sigma_f, sigma_l = d["theta"]
        K = exp_kernel(X, X, sigma_f, sigma_l) + sigma**2 * np.eye(len(X))
        L = _chol(K, sigma_f)
        return cls(tuple(d["theta"]), X, L, np.array(d["alpha"]), d["log_likelihood"],
                   tuple(d.get("trace", ())), d.get("status", ""))


def gpr_condition(X, y, theta, trace=(), status="") -> GprModel:
    """Condition the GP on training data at fixed hyperparameters."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    sigma, sigma_f, sigma_l = (float(t) for t in theta)
    K = exp_kernel(X, X, sigma_f, sigma_l) + sigma**2 * np.eye(len(y))
    L = _chol(K, sigma_f)
    alpha = cho_solve((L, True), y)
    ll = gpr_log_likelihood(theta, X, y, return_grad=False)
    X = X.copy()
    X.setflags(write=False)
    return GprModel((sigma, sigma_f, sigma_l), X, L, alpha, ll, tuple(trace), status)


def gpr_fit(X, y, initial=GPR_INITIAL, **lbfgs_options) -> GprModel:
    """Maximize the log marginal likelihood over log-hyperparameters by L-BFGS.

    ``trace`` on the returned model is the log-likelihood after every
    accepted L-BFGS step.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)

    def objective(log_theta):
        theta = np.exp(log_theta)
        try:
            ll, grad = gpr_log_likelihood(theta, X, y)
        except CholeskyError:
            return np.inf, np.zeros_like(log_theta)
        return -ll, -grad

    res = lbfgs_minimize(objective, np.log(np.asarray(initial, dtype=float)), **lbfgs_options)
    if not res.converged:
        warnings.warn(f"L-BFGS stopped with status {res.status!r}", RuntimeWarning, stacklevel=2)
    return gpr_condition(X, y, np.exp(res.x), tuple(-v for v in res.trace), res.status)


def gpr_predict(model: GprModel, x):
    mean, _, obs = model.predict(np.atleast_2d(x), return_var=True)
    return float(mean[0]), float(obs[0])


# --------------------------------------------------------------------------
# relevance vector machine


def rbf_basis(X, centers, width):
    """Gaussian basis ``exp(-||x - c||^2 / (2 width^2))``, one column per center."""
    d2 = cdist(np.atleast_2d(X), np.atleast_2d(centers), "sqeuclidean")
    return np.exp(-d2 / (2.0 * width**2))


def rvm_design_matrix(X, width, centers=None):
    """``N x (M + 1)`` design matrix: a bias column of ones, then one RBF per center.

    By default every training row is a center.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if not width > 0:
        raise ValueError("kernel width must be positive")
    centers = X if centers is None else centers
    return np.column_stack([np.ones(len(X)), rbf_basis(X, centers, width)])


def rvm_log_marginal(Phi, y, alpha, noise_var):
    """Log marginal likelihood with ``C = noise I + Phi A^-1 Phi^T``.

    Basis functions with infinite ``alpha`` drop out of ``C``.
    """
    y = np.asarray(y, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    keep = np.isfinite(alpha)
    Pa = Phi[:, keep]
    C = noise_var * np.eye(len(y)) + (Pa / alpha[keep]) @ Pa.T
    L = cholesky(C, lower=True)
    z = solve_triangular(L, y, lower=True)
    return -0.5 * (len(y) * LOG_2PI + 2.0 * np.sum(np.log(np.diag(L))) + float(z @ z))


@dataclass(frozen=True)
class RvmModel:
    """Sparse Bayesian kernel regression.

    ``relevant`` indexes design-matrix columns (0 is the bias, ``i + 1`` the
    basis centred on training row ``i``).  ``mu``/``Sigma`` are the posterior
    over the retained weights only; every other weight is exactly 0.
    """

    width: float
    centers: np.ndarray
    relevant: tuple
    alpha: np.ndarray
    mu: np.ndarray
    Sigma: np.ndarray
    noise_var: float
    trace: tuple = ()
    actions: tuple = ()

    def design(self, X):
        return rvm_design_matrix(X, self.width, self.centers)

    def predict(self, X, return_var=False):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if not self.relevant:
            mean = np.zeros(len(X))
            return (mean, np.full(len(X), self.noise_var)) if return_var else mean
        phi = self.design(X)[:, list(self.relevant)]
        mean = phi @ self.mu
        if not return_var:
            return mean
        var = self.noise_var + np.einsum("ij,jk,ik->i", phi, self.Sigma, phi)
        return mean, var

    @property
    def relevance_vectors(self):
        """Training-row indices (0-based) whose basis function is retained."""
        return tuple(j - 1 for j in self.relevant if j > 0)

    def to_dict(self):
        return {
            "type": "rvm",
            "width": self.width,
            "centers": self.centers.tolist(),
            "relevant": list(self.relevant),
            "alpha": [float(a) for a in self.alpha],
            "mu": self.mu.tolist(),
            "Sigma": self.Sigma.tolist(),
            "noise_var": self.noise_var,
            "trace": list(self.trace),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            float(d["width"]),
            np.array(d["centers"]),
            tuple(int(j) for j in d["relevant"]),
            np.array(d["alpha"], dtype=float),
            np.array(d["mu"], dtype=float),
            np.array(d["Sigma"], dtype=float).reshape(len(d["relevant"]), len(d["relevant"])),
            float(d["noise_var"]),
            tuple(d.get("trace", ())),
        )


def _posterior(Phi_a, y, alpha_a, beta):
    """Posterior covariance and mean over the active basis (precision ``beta``).

    Also returns the Cholesky factor of the posterior precision.
    """
    prec = np.diag(alpha_a) + beta * Phi_a.T @ Phi_a
    Lp = cholesky(prec, lower=True)
    Sigma = cho_solve((Lp, True), np.eye(len(alpha_a)))
    mu = beta * Sigma @ (Phi_a.T @ y)
    return Sigma, mu, Lp


def _log_marginal_active(Phi_a, y, alpha_a, beta):
    """Same value as :func:`rvm_log_marginal` via the ``|a| x |a|`` posterior."""
    N = len(y)
    _, mu, Lp = _posterior(Phi_a, y, alpha_a, beta)
    logdet_C = -N * math.log(beta) + 2.0 * np.sum(np.log(np.diag(Lp))) - np.sum(np.log(alpha_a))
    quad = beta * float(y @ y) - beta * float(y @ (Phi_a @ mu))
    return -0.5 * (N * LOG_2PI + logdet_C + quad)


def rvm_fit(X, y, width, noise_var=None, max_iter=1000, tol=1e-3,
            noise_every=1, record_likelihood=True, max_precision_factor=1e6,
            on_action=None) -> RvmModel:
    """Fast sequential sparse Bayesian learning.

    Each cycle scores every candidate basis by the exact change in log
    marginal likelihood from adding it, re-estimating its ``alpha`` or
    deleting it, and performs the single best action.  Every
    ``noise_every`` actions the noise variance is re-estimated; the new value
    is kept only if the likelihood does not drop.  The noise precision is
    capped at ``max_precision_factor / var(y)``.  Iteration stops when no
    addition or deletion would help, every re-estimate changes
    ``log(alpha)`` by less than ``tol`` and the noise is stable.

    ``trace`` records the log marginal likelihood after every accepted
    action when ``record_likelihood`` is set.  ``on_action(action, alpha,
    noise_var)`` is called after each accepted action with a copy of the
    full ``alpha`` vector (``inf`` for pruned basis functions).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    Phi = rvm_design_matrix(X, width)
    N, M = Phi.shape
    var_y = max(float(np.var(y)), 1e-12)
    if noise_var is None:
        noise_var = 0.1 * var_y
    beta_max = max_precision_factor / var_y
    beta = min(1.0 / noise_var, beta_max)
    norms2 = np.sum(Phi**2, axis=0)
    PhiTy = Phi.T @ y

    # start from the single basis best aligned with the targets
    proj = PhiTy**2 / norms2
    j0 = int(np.argmax(proj))
    if not proj[j0] > 0:
        raise DegenerateFitError("no basis function explains the targets")
    alpha = np.full(M, np.inf)
    denom = proj[j0] - 1.0 / beta
    alpha[j0] = norms2[j0] / denom if denom > 0 else norms2[j0] / (0.1 * proj[j0])
    active = [j0]

    trace, actions = [], [("add", j0)]

    def loglik():
        return _log_marginal_active(Phi[:, active], y, alpha[active], beta)

    def accepted(action):
        actions.append(action)
        if record_likelihood:
            trace.append(loglik())
        if on_action is not None:
            on_action(action, alpha.copy(), 1.0 / beta)

    if record_likelihood:
        trace.append(loglik())
    if on_action is not None:
        on_action(actions[0], alpha.copy(), 1.0 / beta)
    since_noise = 0
    noise_stable = False
    converged = False

    for _ in range(max_iter):
        Pa = Phi[:, active]
        Sigma, mu, _ = _posterior(Pa, y, alpha[active], beta)
        B = Phi.T @ Pa
        S = beta * norms2 - beta**2 * np.einsum("ij,jk,ik->i", B, Sigma, B)
        Q = beta * PhiTy - beta**2 * B @ (Sigma @ (Pa.T @ y))
        s, q = S.copy(), Q.copy()
        a_act = alpha[active]
        s[active] = a_act * S[active] / (a_act - S[active])
        q[active] = a_act * Q[active] / (a_act - S[active])
        theta = q**2 - s
        is_active = np.zeros(M, dtype=bool)
        is_active[active] = True

        pos = theta > 0
        add = pos & ~is_active
        rec = pos & is_active
        dele = ~pos & is_active
        delta = np.full(M, -np.inf)
        new_alpha = np.full(M, np.inf)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            new_alpha[pos] = s[pos] ** 2 / theta[pos]
            delta[add] = (Q[add] ** 2 - S[add]) / S[add] + np.log(S[add] / Q[add] ** 2)
            d_inv = 1.0 / new_alpha[rec] - 1.0 / alpha[rec]
            delta[rec] = Q[rec] ** 2 / (S[rec] + 1.0 / d_inv) - np.log1p(S[rec] * d_inv)
            delta[dele] = Q[dele] ** 2 / (S[dele] - alpha[dele]) - np.log1p(-S[dele] / alpha[dele])
            log_change = np.abs(np.log(new_alpha) - np.log(alpha))
        if len(active) == 1:
            delta[dele] = -np.inf
        delta[~np.isfinite(delta)] = -np.inf

        structural = bool(np.any(delta[add] > 0) or np.any(delta[dele] > 0))
        settled = not rec.any() or not np.nanmax(np.where(rec, log_change, 0.0)) >= tol
        if not structural and settled and noise_stable:
            converged = True
            break

        j = int(np.argmax(delta))
        if delta[j] > 0 and not (settled and not structural):
            if add[j]:
                alpha[j] = new_alpha[j]
                active.append(j)
                accepted(("add", j))
            elif rec[j]:
                alpha[j] = new_alpha[j]
                accepted(("reestimate", j))
            else:
                alpha[j] = np.inf
                active.remove(j)
                accepted(("delete", j))
            since_noise += 1
            noise_stable = False
            if since_noise < noise_every:
                continue

        # noise re-estimation
        since_noise = 0
        Pa = Phi[:, active]
        Sigma, mu, _ = _posterior(Pa, y, alpha[active], beta)
        gamma = 1.0 - alpha[active] * np.diag(Sigma)
        resid = float(np.sum((y - Pa @ mu) ** 2))
        dof = N - float(np.sum(gamma))
        cand = min(dof / resid, beta_max) if dof > 0 and resid > 0 else beta_max
        if abs(math.log(cand) - math.log(beta)) < tol:
            noise_stable = True
            continue
        old_ll = loglik()
        old_beta, beta = beta, cand
        if loglik() < old_ll:
            beta = old_beta
            noise_stable = True
        else:
            noise_stable = False
            accepted(("noise", None))
    if not converged:
        warnings.warn("RVM reached max_iter before converging", RuntimeWarning, stacklevel=2)

    active = sorted(active)
    Sigma, mu, _ = _posterior(Phi[:, active], y, alpha[active], beta)
    return RvmModel(
        float(width),
        X.copy(),
        tuple(active),
        alpha[active].copy(),
        mu,
        Sigma,
        1.0 / beta,
        tuple(trace),
        tuple(actions),
    )


def rvm_predict(model: RvmModel, x):
    mean, var = model.predict(np.atleast_2d(x), return_var=True)
    return float(mean[0]), float(var[0])


DEFAULT_WIDTH_GRID = (0.5, 0.75, 1.0, 1.5, 2.0, 3.0)


def rvm_select_width(X, y, grid=DEFAULT_WIDTH_GRID, folds=5, seed=0):
    """CV over kernel width; ties go to the wider (smoother) kernel."""
    from .evaluation import crossval

    def fit_predict(width, Xtr, ytr, Xva):
        return rvm_fit(Xtr, ytr, width, record_likelihood=False).predict(Xva)

    return crossval(fit_predict, list(grid), X, y, folds=folds, seed=seed, simplicity=lambda w: -w)
