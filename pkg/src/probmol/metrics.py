"""Predictive performance and calibration metrics, bootstrap intervals."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri
from scipy.stats import rankdata

from .errors import (ConstantTruth, DegenerateLabels, NonpositiveSigma, ProbmolError,
                     ResampleExhausted, ShapeMismatch)

N_QUANTILES = 101
N_BINS = 10
# exact decimal edges 0.50, 0.55, ..., 1.00
BIN_EDGES = np.array([(10 + i) / 20 for i in range(N_BINS + 1)])
PROB_EDGES = np.array([i / 10 for i in range(N_BINS + 1)])


def _pair(y, yhat):
    y = np.asarray(y, dtype=np.float64).ravel()
    yhat = np.asarray(yhat, dtype=np.float64).ravel()
    if y.shape != yhat.shape:
        raise ShapeMismatch(f"length mismatch: {y.size} vs {yhat.size}")
    if y.size == 0:
        raise ShapeMismatch("empty input")
    return y, yhat


def r_squared(y, yhat) -> float:
    y, yhat = _pair(y, yhat)
    ss_tot = np.sum((y - y.mean()) ** 2)
    if ss_tot == 0:
        raise ConstantTruth("R^2 is undefined for constant targets")
    return float(1.0 - np.sum((y - yhat) ** 2) / ss_tot)


def auroc(y, p) -> float:
    """Probability that a random positive outranks a random negative (ties count 1/2)."""
    y, p = _pair(y, p)
    pos = y == 1
    n1 = int(pos.sum())
    n0 = y.size - n1
    if n1 == 0 or n0 == 0:
        raise DegenerateLabels("AUROC needs both classes")
    r = rankdata(p)  # average ranks handle ties
    u = r[pos].sum() - n1 * (n1 + 1) / 2.0
    return float(u / (n1 * n0))


@dataclass(frozen=True)
class ReliabilityCurve:
    quantiles: np.ndarray
    values: np.ndarray


def regression_reliability(y, yhat, sigma, n_quantiles=N_QUANTILES) -> ReliabilityCurve:
    """C(q): fraction of |z| below the two-sided Gaussian quantile for level q."""
    y, yhat = _pair(y, yhat)
    sigma = np.asarray(sigma, dtype=np.float64).ravel()
    if sigma.shape != y.shape:
        raise ShapeMismatch("sigma length differs from y")
    if not np.all(sigma > 0):
        raise NonpositiveSigma("predictive standard deviations must be > 0")
    q = np.linspace(0.0, 1.0, n_quantiles)
    z = np.abs((yhat - y) / sigma)
    thresh = ndtri((1.0 + q) / 2.0)  # 0 at q=0, inf at q=1
    zs = np.sort(z)
    counts = np.searchsorted(zs, thresh, side="left")  # number with |z| < t
    return ReliabilityCurve(q, counts / z.size)


def ama(curve: ReliabilityCurve) -> float:
    """Absolute miscalibration area by the trapezoid rule."""
    d = np.abs(curve.values - curve.quantiles)
    return float(np.sum((d[1:] + d[:-1]) * np.diff(curve.quantiles)) / 2.0)


@dataclass(frozen=True)
class CalibrationBins:
    edges: np.ndarray
    confidence: np.ndarray   # NaN for empty bins
    accuracy: np.ndarray
    counts: np.ndarray

    @property
    def n(self):
        return int(self.counts.sum())


def classification_reliability(y, p, mode="confidence") -> CalibrationBins:
    """Bin predictions into 10 intervals.

    ``mode="confidence"`` bins max(p, 1-p) over [0.5, 1] and scores whether
    the implied class (p >= 0.5 means 1) is right. ``mode="probability"``
    bins raw p over [0, 1] and compares against the class-1 frequency.
    """
    y, p = _pair(y, p)
    if np.any((p < 0) | (p > 1)):
        raise ValueError("probabilities must lie in [0, 1]")
    if mode == "confidence":
        edges = BIN_EDGES
        conf = np.maximum(p, 1.0 - p)
        hit = ((p >= 0.5).astype(float) == y).astype(float)
    elif mode == "probability":
        edges = PROB_EDGES
        conf, hit = p, (y == 1).astype(float)
    else:
        raise ValueError(f"unknown binning mode {mode!r}")
    idx = np.clip(np.searchsorted(edges, conf, side="right") - 1, 0, N_BINS - 1)
    counts = np.bincount(idx, minlength=N_BINS)
    with np.errstate(invalid="ignore", divide="ignore"):
        c = np.bincount(idx, weights=conf, minlength=N_BINS) / counts
        a = np.bincount(idx, weights=hit, minlength=N_BINS) / counts
    return CalibrationBins(edges, c, a, counts)


def ece(bins: CalibrationBins) -> float:
    occ = bins.counts > 0
    w = bins.counts[occ] / bins.n
    return float(np.sum(w * np.abs(bins.accuracy[occ] - bins.confidence[occ])))


def bootstrap_ci(metric, y, predictions, n_boot=1000, level=0.95, seed=0):
    """Percentile bootstrap interval of ``metric(y, predictions)``.

    ``predictions`` may be one array or a tuple of arrays resampled jointly.
    Resamples on which the metric raises a precondition error are redrawn,
    up to 10 * n_boot draws in total. Each resample uses its own child RNG
    stream so the result does not depend on evaluation order.
    """
    y = np.asarray(y)
    preds = predictions if isinstance(predictions, tuple) else (predictions,)
    preds = tuple(np.asarray(a) for a in preds)
    n = y.shape[0]
    if n == 0:
        raise ShapeMismatch("bootstrap needs a nonempty sample")
    children = np.random.SeedSequence(seed).spawn(n_boot)
    values = np.empty(n_boot)
    attempts = 0
    for b, child in enumerate(children):
        rng = np.random.default_rng(child)
        while True:
            attempts += 1
            if attempts > 10 * n_boot:
                raise ResampleExhausted(f"more than {10 * n_boot} resamples were invalid")
            idx = rng.integers(0, n, n)
            try:
                values[b] = metric(y[idx], *(a[idx] for a in preds))
                break
            except ProbmolError:
                continue
    alpha = (1.0 - level) / 2.0
    lo, hi = np.quantile(values, [alpha, 1.0 - alpha])
    return float(lo), float(hi)


def ama_metric(y, yhat, sigma):
    return ama(regression_reliability(y, yhat, sigma))


def ece_metric(y, p):
    return ece(classification_reliability(y, p))


METRIC_FIELDS = ("dataset", "model", "feature", "metric", "value", "ci_low", "ci_high")


def write_metric_rows(path, rows):
    """Write report rows (dicts keyed by METRIC_FIELDS) as CSV."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=METRIC_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(r.get(k, "")) for k in METRIC_FIELDS})


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v
