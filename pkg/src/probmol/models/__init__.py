"""Probabilistic surrogate models with a shared fit/predict contract."""

from .base import (PosteriorPrediction, Predictions, feature_kind, load_model,
                   model_predict, save_model)
from .factory import MODELS, fit_model, holdout_indices, kernel_for
from .gp import GPClassifier, GPRegressor, gp_fit, gp_predict
from .ngboost import NGBoost, natural_gradient, ngboost_fit
from .trees import SplitFinder, Tree, fit_tree

__all__ = ["PosteriorPrediction", "Predictions", "feature_kind", "load_model", "model_predict",
           "save_model", "MODELS", "fit_model", "holdout_indices", "kernel_for",
           "GPClassifier", "GPRegressor", "gp_fit", "gp_predict", "NGBoost",
           "natural_gradient", "ngboost_fit", "SplitFinder", "Tree", "fit_tree"]
