"""Natural-gradient boosting with Gaussian and Bernoulli output distributions."""

from __future__ import annotations

import numpy as np
from scipy.special import expit

from ..errors import DegenerateLabels, InvalidParams, ShapeMismatch
from .base import Predictions, as_matrix, check_features
from .trees import SplitFinder, Tree

FAMILIES = ("gaussian", "bernoulli")
GRAD_CLAMP = 1e4
SIGMA_FLOOR = 1e-6


def natural_gradient(family, params, y):
    """Fisher-preconditioned gradient of the negative log-likelihood.

    ``params`` has shape (..., 2) = (mu, log sigma) for the Gaussian and
    (...,) = log-odds for the Bernoulli family. Broadcasts over leading axes.
    """
    params = np.asarray(params, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if family == "gaussian":
        if params.shape[-1:] != (2,):
            raise InvalidParams("Gaussian parameters are (mu, log sigma)")
        if not np.all(np.isfinite(params)):
            raise InvalidParams("Gaussian parameters must be finite (sigma > 0)")
        mu, log_sigma = params[..., 0], params[..., 1]
        z2 = (y - mu) ** 2 * np.exp(-2.0 * log_sigma)
        return np.stack([mu - y, 0.5 * (1.0 - z2)], axis=-1)
    if family == "bernoulli":
        if not np.all(np.isfinite(params)):
            raise InvalidParams("Bernoulli log-odds must be finite")
        p = expit(params)
        with np.errstate(divide="ignore", invalid="ignore"):
            g = (p - y) / (p * (1.0 - p))
        g = np.where(np.isnan(g), np.sign(p - y) * GRAD_CLAMP, g)
        return np.clip(g, -GRAD_CLAMP, GRAD_CLAMP)
    raise InvalidParams(f"unknown family {family!r}")


def nll(family, params, y):
    """Per-sample negative log-likelihood."""
    params = np.asarray(params, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if family == "gaussian":
        mu, log_sigma = params[..., 0], params[..., 1]
        return log_sigma + 0.5 * np.log(2 * np.pi) + 0.5 * (y - mu) ** 2 * np.exp(-2 * log_sigma)
    # log(1 + e^-t) for y = 1, log(1 + e^t) for y = 0
    return np.logaddexp(0.0, params) - y * params


def _initial_params(family, y):
    if family == "gaussian":
        return np.array([y.mean(), np.log(max(y.std(), SIGMA_FLOOR))])
    p = y.mean()
    return np.array([np.log(p / (1 - p))])


class NGBoost:
    """Boosted trees on natural gradients; one tree per output parameter per stage.

    Training stops once the validation NLL has not improved for ``patience``
    stages; the model keeps the stages up to the best one.
    """

    def __init__(self, family="gaussian", max_trees=2000, depth=3, learning_rate=0.01,
                 patience=50, seed=0):
        if family not in FAMILIES:
            raise InvalidParams(f"unknown family {family!r}")
        self.family = family
        self.max_trees = int(max_trees)
        self.depth = int(depth)
        self.learning_rate = float(learning_rate)
        self.patience = int(patience)
        self.seed = seed
        self.fitted = False

    @property
    def n_params(self):
        return 2 if self.family == "gaussian" else 1

    def _check_xy(self, X, y):
        X = as_matrix(X)
        y = np.asarray(y, dtype=np.float64).ravel()
        if X.shape[0] != y.shape[0]:
            raise ShapeMismatch(f"{X.shape[0]} feature rows but {y.shape[0]} targets")
        if self.family == "bernoulli":
            if not np.isin(y, (0, 1)).all():
                raise InvalidParams("Bernoulli targets must be 0 or 1")
            if len(np.unique(y)) < 2:
                raise DegenerateLabels("Bernoulli boosting needs both classes")
        return X, y

    def fit(self, X, y, val):
        X, y = self._check_xy(X, y)
        if X.shape[0] < 10:
            raise ShapeMismatch("boosting needs at least 10 training rows")
        if val is None or len(val[1]) == 0:
            raise ShapeMismatch("a nonempty validation set is required")
        Xv, yv = as_matrix(val[0]), np.asarray(val[1], dtype=np.float64).ravel()
        self.n_features = X.shape[1]
        P = self.n_params
        finder = SplitFinder(X)
        self.init = _initial_params(self.family, y)
        theta = np.tile(self.init, (len(y), 1))
        theta_v = np.tile(self.init, (len(yv), 1))

        def score(tv):
            return float(nll(self.family, self._unpack(tv), yv).mean())

        trees = []
        history = [score(theta_v)]
        best, best_stage, since = history[0], 0, 0
        for _ in range(self.max_trees):
            G = natural_gradient(self.family, self._unpack(theta), y).reshape(len(y), P)
            stage = [finder.fit(G[:, j], self.depth) for j in range(P)]
            for j, t in enumerate(stage):
                theta[:, j] -= self.learning_rate * t.predict(finder.Xf)
                theta_v[:, j] -= self.learning_rate * t.predict(Xv)
            trees.append(stage)
            history.append(score(theta_v))
            if history[-1] < best:
                best, best_stage, since = history[-1], len(trees), 0
            else:
                since += 1
                if since >= self.patience:
                    break
        self.trees = trees[:best_stage]
        self.val_history = np.array(history)
        self.best_stage = best_stage
        self.fitted = True
        return self

    def _unpack(self, theta):
        return theta if self.family == "gaussian" else theta[:, 0]

    def staged_params(self, X, stages=None):
        """Raw parameters (n, P) after ``stages`` boosting stages."""
        X = check_features(self, X)
        theta = np.tile(self.init, (X.shape[0], 1))
        Xf = np.asarray(X, dtype=np.float64)
        for stage in self.trees[:stages]:
            for j, t in enumerate(stage):
                theta[:, j] -= self.learning_rate * t.predict(Xf)
        return theta

    def predict(self, X) -> Predictions:
        theta = self.staged_params(X)
        if self.family == "gaussian":
            return Predictions(theta[:, 0], np.exp(theta[:, 1]))
        return Predictions(expit(theta[:, 0]), None, task="binary")

    def get_state(self):
        return {"family": self.family, "max_trees": self.max_trees, "depth": self.depth,
                "learning_rate": self.learning_rate, "patience": self.patience,
                "seed": self.seed, "n_features": self.n_features,
                "init": self.init.tolist(), "best_stage": self.best_stage,
                "trees": [[t.to_dict() for t in stage] for stage in self.trees]}

    @classmethod
    def from_state(cls, st):
        m = cls(st["family"], st["max_trees"], st["depth"], st["learning_rate"],
                st["patience"], st["seed"])
        m.n_features = st["n_features"]
        m.init = np.asarray(st["init"], float)
        m.best_stage = st["best_stage"]
        m.trees = [[Tree.from_dict(d) for d in stage] for stage in st["trees"]]
        m.fitted = True
        return m


def ngboost_fit(X, y, family="gaussian", max_trees=2000, depth=3, learning_rate=0.01,
                val=None, patience=50, seed=0) -> NGBoost:
    return NGBoost(family, max_trees, depth, learning_rate, patience, seed).fit(X, y, val)
