"""Exact Gaussian processes: regression by marginal-likelihood fitting and
binary classification by a Laplace approximation.

Kernels are ``s2 * T(x, x')`` (Tanimoto, binary features) and
``s2 * exp(-|x - x'|^2 / (2 l^2))`` (RBF, dense features).
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.optimize import minimize
from scipy.special import expit

from ..errors import DegenerateLabels, InvalidParams, ShapeMismatch, SingularKernel
from ..featurize import tanimoto_matrix
from .base import Predictions, as_matrix, check_features, feature_kind

JITTERS = (0.0, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4)
KERNELS = ("tanimoto", "rbf")

# log-space box for the optimizer: (log s2, log noise, log l / median distance)
_LOG_S2 = (np.log(1e-3), np.log(1e3))
_LOG_NOISE = (np.log(1e-6), np.log(10.0))
_LOG_ELL = (np.log(1e-2), np.log(1e2))


def _sqdist(A, B):
    d = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    return np.maximum(d, 0.0)


def base_gram(kernel, A, B=None):
    """Unit-variance kernel matrix. For RBF this is the squared distance matrix
    (the exponential is applied once the lengthscale is known)."""
    if kernel == "tanimoto":
        return tanimoto_matrix(A, B)
    A = np.asarray(A, float)
    B = A if B is None else np.asarray(B, float)
    return _sqdist(A, B)


def _kernel_from_base(kernel, G, s2, ell):
    if kernel == "tanimoto":
        return s2 * G
    return s2 * np.exp(-0.5 * G / ell ** 2)


def stable_cholesky(K):
    """Lower Cholesky factor of K, adding diagonal jitter 1e-8 .. 1e-4 as needed."""
    n = K.shape[0]
    for jit in JITTERS:
        try:
            A = K + jit * np.eye(n) if jit else K
            return np.linalg.cholesky(A), jit
        except np.linalg.LinAlgError:
            continue
    raise SingularKernel(f"Cholesky failed on a {n}x{n} kernel matrix even with jitter 1e-4")


def _check_kernel(kernel, X):
    if kernel not in KERNELS:
        raise InvalidParams(f"unknown kernel {kernel!r}; expected one of {KERNELS}")
    if kernel == "tanimoto" and feature_kind(X) != "binary":
        from ..errors import FeatureKindMismatch
        raise FeatureKindMismatch("Tanimoto kernel needs binary fingerprint features")


def _median_distance(G):
    iu = np.triu_indices(G.shape[0], 1)
    d = np.sqrt(G[iu])
    d = d[d > 0]
    return float(np.median(d)) if d.size else 1.0


class GPRegressor:
    """Exact GP regression with hyperparameters fitted on the log marginal likelihood.

    Targets are centered and scaled inside the model. ``predict`` reports the
    predictive stddev including observation noise (``latent=True`` drops it).
    """

    def __init__(self, kernel="tanimoto", n_restarts=5, seed=0, optimize=True,
                 signal_variance=1.0, noise=0.1, lengthscale=None, normalize_y=True):
        self.kernel = kernel
        self.n_restarts = n_restarts
        self.seed = seed
        self.optimize = optimize
        self.signal_variance = float(signal_variance)
        self.noise = float(noise)
        self.lengthscale = lengthscale
        self.normalize_y = normalize_y
        self.fitted = False

    # -- marginal likelihood ---------------------------------------------------

    def _nll(self, logp, G, y):
        s2 = np.exp(logp[0])
        noise = np.exp(logp[1])
        ell = np.exp(logp[2]) * self._dscale if self.kernel == "rbf" else None
        Kf = _kernel_from_base(self.kernel, G, s2, ell)
        n = len(y)
        try:
            L, _ = stable_cholesky(Kf + noise * np.eye(n))
        except SingularKernel:
            return 1e25, np.zeros_like(logp)
        alpha = cho_solve((L, True), y)
        nll = 0.5 * y @ alpha + np.log(np.diag(L)).sum() + 0.5 * n * np.log(2 * np.pi)
        Kinv = cho_solve((L, True), np.eye(n))
        W = np.outer(alpha, alpha) - Kinv
        # dNLL/dtheta = -0.5 tr(W dK/dtheta)
        grad = [-0.5 * np.sum(W * Kf), -0.5 * noise * np.trace(W)]
        if self.kernel == "rbf":
            grad.append(-0.5 * np.sum(W * Kf * (G / ell ** 2)))
        return float(nll), np.array(grad)

    def fit(self, X, y):
        X = as_matrix(X)
        y = np.asarray(y, float).ravel()
        if X.shape[0] != y.shape[0]:
            raise ShapeMismatch(f"{X.shape[0]} feature rows but {y.shape[0]} targets")
        if y.shape[0] < 1:
            raise ShapeMismatch("need at least one training point")
        _check_kernel(self.kernel, X)
        self.X_train = X.astype(np.uint8) if self.kernel == "tanimoto" else X.astype(float)
        self.n_features = X.shape[1]
        self.y_mean = float(y.mean()) if self.normalize_y else 0.0
        sd = float(y.std()) if self.normalize_y else 1.0
        self.y_scale = sd if sd > 0 else 1.0
        yz = (y - self.y_mean) / self.y_scale

        G = base_gram(self.kernel, self.X_train)
        self._dscale = _median_distance(G) if self.kernel == "rbf" else 1.0
        if self.optimize and len(y) >= 2:
            self._optimize(G, yz)
        elif self.kernel == "rbf" and self.lengthscale is None:
            self.lengthscale = self._dscale
        self._factor(G, yz)
        self.fitted = True
        return self

    def _optimize(self, G, yz):
        rng = np.random.default_rng(self.seed)
        bounds = [_LOG_S2, _LOG_NOISE] + ([_LOG_ELL] if self.kernel == "rbf" else [])
        best = None
        for _ in range(self.n_restarts):
            x0 = [rng.uniform(np.log(0.1), np.log(10.0)), rng.uniform(np.log(1e-3), np.log(1.0))]
            if self.kernel == "rbf":
                x0.append(rng.uniform(np.log(0.1), np.log(10.0)))
            res = minimize(self._nll, np.array(x0), args=(G, yz), jac=True,
                           method="L-BFGS-B", bounds=bounds)
            if np.isfinite(res.fun) and (best is None or res.fun < best.fun):
                best = res
        if best is None:
            raise SingularKernel("marginal likelihood could not be evaluated at any restart")
        self.signal_variance = float(np.exp(best.x[0]))
        self.noise = float(np.exp(best.x[1]))
        if self.kernel == "rbf":
            self.lengthscale = float(np.exp(best.x[2]) * self._dscale)
        self.log_marginal_likelihood = -float(best.fun)

    def _factor(self, G, yz):
        if self.signal_variance <= 0 or self.noise <= 0:
            raise InvalidParams("kernel hyperparameters must be strictly positive")
        K = _kernel_from_base(self.kernel, G, self.signal_variance, self.lengthscale)
        K = K + self.noise * np.eye(len(yz))
        self.L, self.jitter = stable_cholesky(K)
        self.alpha = cho_solve((self.L, True), yz)
        self._yz = yz

    # -- prediction ------------------------------------------------------------

    def cross_kernel(self, Xq):
        Xq = Xq.astype(np.uint8) if self.kernel == "tanimoto" else Xq.astype(float)
        G = base_gram(self.kernel, Xq, self.X_train)
        return _kernel_from_base(self.kernel, G, self.signal_variance, self.lengthscale)

    def predict(self, X, latent=False) -> Predictions:
        X = check_features(self, X, require_binary=self.kernel == "tanimoto")
        if X.shape[0] == 0:
            return Predictions(np.zeros(0), np.zeros(0))
        Ks = self.cross_kernel(X)
        mu = Ks @ self.alpha
        v = solve_triangular(self.L, Ks.T, lower=True)
        var = np.maximum(self.signal_variance - (v * v).sum(0), 0.0)
        if not latent:
            var = var + self.noise
        return Predictions(mu * self.y_scale + self.y_mean, np.sqrt(var) * self.y_scale)

    # -- checkpoint ------------------------------------------------------------

    def get_state(self):
        return {"kernel": self.kernel, "signal_variance": self.signal_variance,
                "noise": self.noise, "lengthscale": self.lengthscale,
                "y_mean": self.y_mean, "y_scale": self.y_scale,
                "normalize_y": self.normalize_y, "seed": self.seed,
                "X_train": self.X_train.tolist(), "y_train_z": self._yz.tolist()}

    @classmethod
    def from_state(cls, st):
        m = cls(kernel=st["kernel"], seed=st["seed"], optimize=False,
                signal_variance=st["signal_variance"], noise=st["noise"],
                lengthscale=st["lengthscale"], normalize_y=st["normalize_y"])
        dtype = np.uint8 if m.kernel == "tanimoto" else float
        m.X_train = np.asarray(st["X_train"], dtype=dtype)
        m.n_features = m.X_train.shape[1]
        m.y_mean, m.y_scale = st["y_mean"], st["y_scale"]
        m._factor(base_gram(m.kernel, m.X_train), np.asarray(st["y_train_z"], float))
        m.fitted = True
        return m


# --- Laplace classification --------------------------------------------------

def _logloss(y, p, eps=1e-12):
    p = np.clip(p, eps, 1 - eps)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log(1 - p)))


def laplace_mode(K, y, m, max_iter=100, tol=1e-10):
    """Newton iterations for the posterior mode of a logistic-likelihood GP.

    Latent prior N(m, K). Returns (f, W, L, log_evidence) where L is the
    Cholesky factor of B = I + W^1/2 K W^1/2.
    """
    n = len(y)
    a = np.zeros(n)
    f = np.full(n, m, dtype=float)

    def objective(a, f):
        return -0.5 * a @ (f - m) + np.sum(y * f - np.logaddexp(0.0, f))

    psi = objective(a, f)
    for _ in range(max_iter):
        pi = expit(f)
        W = pi * (1 - pi)
        sW = np.sqrt(W)
        B = np.eye(n) + sW[:, None] * K * sW[None, :]
        L, _ = stable_cholesky(B)
        b = W * (f - m) + (y - pi)
        c = cho_solve((L, True), sW * (K @ b))
        a_new = b - sW * c
        da = a_new - a
        # step halving keeps the objective nondecreasing
        step = 1.0
        while True:
            a_try = a + step * da
            f_try = K @ a_try + m
            psi_try = objective(a_try, f_try)
            if psi_try >= psi - 1e-12 or step < 1e-6:
                break
            step *= 0.5
        converged = abs(psi_try - psi) < tol * (1 + abs(psi))
        a, f, psi = a_try, f_try, psi_try
        if converged:
            break
    pi = expit(f)
    W = pi * (1 - pi)
    sW = np.sqrt(W)
    L, _ = stable_cholesky(np.eye(n) + sW[:, None] * K * sW[None, :])
    log_ev = psi - np.log(np.diag(L)).sum()
    return f, W, L, float(log_ev)


def probit_probability(mu, var):
    """Approximate E[logistic(f)] for f ~ N(mu, var) via the scaled probit."""
    kappa = 1.0 / np.sqrt(1.0 + np.pi * var / 8.0)
    return expit(kappa * mu)


class GPClassifier:
    """Binary GP classifier with a logistic likelihood and Laplace posterior.

    The latent prior mean is the training log-odds. Hyperparameters come from
    a small grid, scored by validation log-loss when ``val`` is given to
    ``fit`` and otherwise by the Laplace approximate evidence.
    """

    S2_GRID = (0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0)
    ELL_GRID = (0.25, 0.5, 1.0, 2.0, 4.0)   # multiples of the median train distance

    def __init__(self, kernel="tanimoto", signal_variance=None, lengthscale=None, seed=0):
        self.kernel = kernel
        self.signal_variance = signal_variance
        self.lengthscale = lengthscale
        self.seed = seed
        self.fitted = False

    def _grid(self, G):
        if self.signal_variance is not None:
            s2s = [float(self.signal_variance)]
        else:
            s2s = list(self.S2_GRID)
        if self.kernel == "tanimoto":
            return [(s, None) for s in s2s]
        if self.lengthscale is not None:
            ells = [float(self.lengthscale)]
        else:
            d = _median_distance(G)
            ells = [d * f for f in self.ELL_GRID]
        return [(s, e) for s in s2s for e in ells]

    def fit(self, X, y, val=None):
        X = as_matrix(X)
        y = np.asarray(y, float).ravel()
        if X.shape[0] != y.shape[0]:
            raise ShapeMismatch(f"{X.shape[0]} feature rows but {y.shape[0]} labels")
        if not np.isin(y, (0, 1)).all():
            raise InvalidParams("binary labels must be 0 or 1")
        if len(np.unique(y)) < 2:
            raise DegenerateLabels("binary GP needs both classes in the training labels")
        _check_kernel(self.kernel, X)
        self.X_train = X.astype(np.uint8) if self.kernel == "tanimoto" else X.astype(float)
        self.n_features = X.shape[1]
        self.y_train = y
        frac = y.mean()
        self.prior_mean = float(np.log(frac / (1 - frac)))
        G = base_gram(self.kernel, self.X_train)

        best = None
        for s2, ell in self._grid(G):
            K = _kernel_from_base(self.kernel, G, s2, ell)
            f, W, L, log_ev = laplace_mode(K, y, self.prior_mean)
            state = (s2, ell, f, W, L)
            if val is not None:
                Xv, yv = val
                self._set(*state)
                score = -_logloss(np.asarray(yv, float), self.predict(Xv).mean)
            else:
                score = log_ev
            if best is None or score > best[0]:
                best = (score, state, log_ev)
        self._set(*best[1])
        self.log_evidence = best[2]
        self.selection_score = best[0]
        return self

    def _set(self, s2, ell, f, W, L):
        self.signal_variance, self.lengthscale = s2, ell
        self.f_mode, self.W, self.L = f, W, L
        self.grad_loglik = self.y_train - expit(f)
        self.fitted = True

    def latent(self, X):
        """Laplace latent predictive mean and variance at X."""
        X = check_features(self, X, require_binary=self.kernel == "tanimoto")
        Xq = X.astype(np.uint8) if self.kernel == "tanimoto" else X.astype(float)
        Ks = _kernel_from_base(self.kernel, base_gram(self.kernel, Xq, self.X_train),
                               self.signal_variance, self.lengthscale)
        mu = self.prior_mean + Ks @ self.grad_loglik
        v = solve_triangular(self.L, (np.sqrt(self.W)[:, None] * Ks.T), lower=True)
        var = np.maximum(self.signal_variance - (v * v).sum(0), 0.0)
        return mu, var

    def predict(self, X) -> Predictions:
        X = check_features(self, X, require_binary=self.kernel == "tanimoto")
        if X.shape[0] == 0:
            return Predictions(np.zeros(0), None, task="binary")
        mu, var = self.latent(X)
        return Predictions(probit_probability(mu, var), None, task="binary")

    def get_state(self):
        return {"kernel": self.kernel, "signal_variance": self.signal_variance,
                "lengthscale": self.lengthscale, "seed": self.seed,
                "X_train": self.X_train.tolist(), "y_train": self.y_train.tolist()}

    @classmethod
    def from_state(cls, st):
        m = cls(kernel=st["kernel"], signal_variance=st["signal_variance"],
                lengthscale=st["lengthscale"], seed=st["seed"])
        dtype = np.uint8 if m.kernel == "tanimoto" else float
        return m.fit(np.asarray(st["X_train"], dtype=dtype), np.asarray(st["y_train"], float))


def gp_fit(X, y, kernel="tanimoto", task="regression", seed=0, val=None, **kw):
    if task == "regression":
        return GPRegressor(kernel=kernel, seed=seed, **kw).fit(X, y)
    if task == "binary":
        return GPClassifier(kernel=kernel, seed=seed, **kw).fit(X, y, val=val)
    raise InvalidParams(f"unknown task {task!r}")


def gp_predict(model, X) -> Predictions:
    return model.predict(X)
