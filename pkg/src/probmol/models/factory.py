"""Model construction from (model name, feature kind, task)."""

from __future__ import annotations

import numpy as np

from ..errors import InvalidParams
from .base import as_matrix, feature_kind
from .gp import gp_fit
from .ngboost import ngboost_fit

MODELS = ("gp", "ngboost")
HOLDOUT_FRAC = 0.1


def kernel_for(X):
    return "tanimoto" if feature_kind(X) == "binary" else "rbf"


def holdout_indices(y, task, seed, frac=HOLDOUT_FRAC):
    """Seeded (train, val) index split used when no validation set is supplied.
    Binary tasks split per class so both classes stay in the training part."""
    y = np.asarray(y)
    rng = np.random.default_rng(seed)
    groups = [np.nonzero(y == c)[0] for c in np.unique(y)] if task == "binary" else [np.arange(len(y))]
    val = []
    for g in groups:
        k = int(round(frac * len(g)))
        if task == "binary":
            k = min(k, len(g) - 1)
        val.append(rng.permutation(g)[:k])
    val = np.sort(np.concatenate(val)).astype(np.int64)
    if val.size == 0:
        val = np.array([int(rng.integers(len(y)))])
    train = np.setdiff1d(np.arange(len(y)), val)
    return train, val


def fit_model(model, X, y, task, seed=0, val=None, **kw):
    """Fit ``model`` ('gp' or 'ngboost'); the GP kernel follows the feature kind."""
    X = as_matrix(X)
    y = np.asarray(y, dtype=np.float64)
    if model == "gp":
        return gp_fit(X, y, kernel=kernel_for(X), task=task, seed=seed, val=val, **kw)
    if model == "ngboost":
        family = "gaussian" if task == "regression" else "bernoulli"
        if val is None:
            tr, va = holdout_indices(y, task, seed)
            X, y, val = X[tr], y[tr], (X[va], y[va])
        return ngboost_fit(X, y, family=family, val=val, seed=seed, **kw)
    raise InvalidParams(f"unknown model {model!r}; expected one of {MODELS}")
