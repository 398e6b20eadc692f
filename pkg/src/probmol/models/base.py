"""Prediction containers, feature-kind checks and the model checkpoint format."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import FeatureKindMismatch, NotFitted

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class PosteriorPrediction:
    """One candidate's prediction.

    For regression ``mean`` is the predicted value and ``stddev`` the
    predictive standard deviation. For binary tasks ``mean`` is the class-1
    probability and ``stddev`` is None.
    """
    mean: float
    stddev: float | None = None


@dataclass(frozen=True)
class Predictions:
    """Vectorized predictions; iterating yields :class:`PosteriorPrediction`."""
    mean: np.ndarray
    stddev: np.ndarray | None = None
    task: str = "regression"

    def __len__(self):
        return int(self.mean.shape[0])

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def __getitem__(self, i):
        sd = None if self.stddev is None else float(self.stddev[i])
        return PosteriorPrediction(float(self.mean[i]), sd)

    @property
    def probability(self):
        if self.task != "binary":
            raise AttributeError("probability is only defined for binary predictions")
        return self.mean


def feature_kind(X) -> str:
    """'binary' for 0/1 matrices (fingerprints), otherwise 'dense'."""
    X = np.asarray(X)
    if X.dtype == bool:
        return "binary"
    if X.size and np.isin(X, (0, 1)).all():
        return "binary"
    return "dense"


def as_matrix(X) -> np.ndarray:
    X = np.asarray(X)
    if X.dtype == bool:
        X = X.astype(np.uint8)
    if X.ndim == 1:
        X = X[None, :] if X.size else X.reshape(0, 0)
    return X


def check_features(model, X, require_binary=False):
    """Validate query features against what ``model`` was fitted on."""
    if not getattr(model, "fitted", False):
        raise NotFitted(f"{type(model).__name__} has not been fitted")
    X = as_matrix(X)
    if X.shape[0] == 0:
        return X.reshape(0, model.n_features)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise FeatureKindMismatch(
            f"expected {model.n_features} feature columns, got shape {X.shape}")
    if require_binary and feature_kind(X) != "binary":
        raise FeatureKindMismatch("Tanimoto kernel needs binary fingerprint features")
    return X


def model_predict(model, X) -> Predictions:
    """Uniform prediction entry point used by the harness and the BO loop."""
    if not hasattr(model, "predict"):
        raise TypeError(f"{type(model).__name__} is not a probmol model")
    return model.predict(X)


# --- checkpoints -------------------------------------------------------------

def _registry():
    from .gp import GPClassifier, GPRegressor
    from .ngboost import NGBoost
    return {cls.__name__: cls for cls in (GPRegressor, GPClassifier, NGBoost)}


def save_model(model, path):
    """Serialize a fitted model to JSON (floats are written with exact repr)."""
    if not getattr(model, "fitted", False):
        raise NotFitted("cannot checkpoint an unfitted model")
    payload = {"format": "probmol-model", "version": CHECKPOINT_VERSION,
               "class": type(model).__name__, "state": model.get_state()}
    Path(path).write_text(json.dumps(payload, sort_keys=True), encoding="utf-8")
    return Path(path)


def load_model(path):
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("format") != "probmol-model":
        raise ValueError(f"{path} is not a probmol model checkpoint")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {payload.get('version')}")
    cls = _registry()[payload["class"]]
    return cls.from_state(payload["state"])
