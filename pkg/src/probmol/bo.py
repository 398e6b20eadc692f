"""Simulated Bayesian-optimization campaigns over a fixed candidate pool."""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyPool, InitTooSmall, InvalidParams, NoBothClasses
from .metrics import ama_metric, auroc, ece_metric, r_squared
from .models import fit_model, model_predict

ACQUISITIONS = ("ucb", "iucb", "greedy", "random")
DEFAULT_BUDGET = 300
DEFAULT_BATCH = 5
BETAS = (0.0, 0.25, 0.5, 0.75, 1.0)


@dataclass(frozen=True)
class AcquisitionSpec:
    kind: str = "ucb"
    beta: float = 0.25
    direction: str = "minimize"

    def __post_init__(self):
        if self.kind not in ACQUISITIONS:
            raise InvalidParams(f"unknown acquisition {self.kind!r}; expected one of {ACQUISITIONS}")
        if self.direction not in ("minimize", "maximize"):
            raise InvalidParams(f"direction must be minimize or maximize, not {self.direction!r}")
        if not np.isfinite(self.beta) or self.beta < 0:
            raise InvalidParams("beta must be a finite value >= 0")
        if self.kind == "iucb" and self.beta > 1:
            raise InvalidParams("interpolated UCB needs beta in [0, 1]")

    @property
    def delta(self):
        return 1.0 - self.beta

    @property
    def sign(self):
        return -1.0 if self.direction == "minimize" else 1.0


def ucb_score(mean, stddev, beta, direction="maximize"):
    """Signed mean plus beta times stddev (works on scalars and arrays)."""
    if beta < 0:
        raise InvalidParams("beta must be >= 0")
    s = -1.0 if direction == "minimize" else 1.0
    return s * np.asarray(mean, dtype=np.float64) + beta * np.asarray(stddev, dtype=np.float64)


def _minmax(v):
    lo, hi = v.min(), v.max()
    if hi == lo:
        return np.zeros_like(v)
    return (v - lo) / (hi - lo)


def interpolated_ucb_scores(mean, stddev, beta, direction="maximize"):
    """(1 - beta) * normalized signed mean + beta * normalized stddev over the pool."""
    mean = np.asarray(mean, dtype=np.float64)
    stddev = np.asarray(stddev, dtype=np.float64)
    if mean.size == 0:
        raise EmptyPool("no unmeasured candidates to score")
    if not 0.0 <= beta <= 1.0:
        raise InvalidParams("interpolated UCB needs beta in [0, 1]")
    s = -1.0 if direction == "minimize" else 1.0
    return (1.0 - beta) * _minmax(s * mean) + beta * _minmax(stddev)


def top_k(scores, k):
    """Indices of the k largest scores; equal scores go to the lower index."""
    order = np.lexsort((np.arange(len(scores)), -np.asarray(scores)))
    return order[:k]


@dataclass
class BOTrace:
    seed: int
    acq: AcquisitionSpec
    model: str
    task: str
    init_size: int
    iterations: list = field(default_factory=list)   # (iteration, index, value, best)
    batch_metrics: list = field(default_factory=list)  # (batch, metric, value)

    @property
    def selected(self):
        return np.array([r[1] for r in self.iterations], dtype=np.int64)

    @property
    def values(self):
        return np.array([r[2] for r in self.iterations], dtype=np.float64)

    @property
    def cumulative_best(self):
        return np.array([r[3] for r in self.iterations], dtype=np.float64)

    def best_per_batch(self):
        """Cumulative best after the initial design and after each batch."""
        it = np.array([r[0] for r in self.iterations])
        best = self.cumulative_best
        return np.array([best[it <= k][-1] for k in range(it.max() + 1)])

    def metric_curve(self, name):
        return np.array([v for b, m, v in self.batch_metrics if m == name])


def init_size(n, task, init_frac=None, init_min=None, init_max=None):
    """Initial-design size: 5% (at least 25) for regression, 10% (at most 100) for binary."""
    if task == "regression":
        frac = 0.05 if init_frac is None else init_frac
        lo = 25 if init_min is None else init_min
        k = max(int(round(frac * n)), lo)
        if init_max is not None:
            k = min(k, init_max)
    else:
        frac = 0.10 if init_frac is None else init_frac
        hi = 100 if init_max is None else init_max
        k = min(int(round(frac * n)), hi)
        if init_min is not None:
            k = max(k, init_min)
    return min(k, n)


def _draw_initial(rng, y, k, task):
    n = len(y)
    for _ in range(100):
        idx = rng.choice(n, size=k, replace=False)
        if task != "binary" or len(np.unique(y[idx])) == 2:
            return np.sort(idx)
    raise NoBothClasses("initial design lacked one class after 100 redraws")


def _holdout_metrics(model, task, Xh, yh):
    pred = model_predict(model, Xh)
    if task == "regression":
        return [("r2", r_squared(yh, pred.mean)), ("ama", ama_metric(yh, pred.mean, pred.stddev))]
    return [("auroc", auroc(yh, pred.mean)), ("ece", ece_metric(yh, pred.mean))]


def run_bo(X, y, task="regression", model="gp", acq=None, init_frac=None, batch=DEFAULT_BATCH,
           budget=DEFAULT_BUDGET, seed=0, holdout=None, init_min=None, init_max=None) -> BOTrace:
    """One campaign: fit on the measured set, score the rest, measure the top batch.

    ``budget`` counts every measured candidate including the initial design.
    Binary tasks always select greedily on the class-1 probability.
    """
    X = np.asarray(X)
    y = np.asarray(y, dtype=np.float64)
    n = len(y)
    if n == 0:
        raise EmptyPool("empty candidate pool")
    if acq is None:
        acq = AcquisitionSpec("greedy" if task == "binary" else "ucb",
                              0.0 if task == "binary" else 0.25,
                              "maximize" if task == "binary" else "minimize")
    if task == "binary" and acq.kind not in ("random", "greedy"):
        acq = AcquisitionSpec("greedy", 0.0, "maximize")
    k0 = init_size(n, task, init_frac, init_min, init_max)
    if k0 < 2:
        raise InitTooSmall(f"initial design of {k0} candidates is too small (need >= 2)")
    budget = n if budget is None else min(int(budget), n)
    rng = np.random.default_rng(seed)
    measured = list(_draw_initial(rng, y, k0, task))
    trace = BOTrace(seed, acq, model, task, k0)
    best = None
    sign = acq.sign if task == "regression" else 1.0

    def record(it, idx):
        nonlocal best
        for i in idx:
            v = float(y[i])
            if best is None or sign * v > sign * best:
                best = v
            trace.iterations.append((it, int(i), v, best))

    record(0, measured)
    mask = np.zeros(n, bool)
    mask[measured] = True
    it = 0
    fitted = None
    while mask.sum() < budget:
        it += 1
        pool = np.nonzero(~mask)[0]
        k = min(batch, budget - int(mask.sum()))
        if acq.kind == "random":
            pick = np.sort(rng.choice(pool, size=k, replace=False))
        else:
            if fitted is None:
                m_idx = np.sort(np.array(measured))
                fitted = fit_model(model, X[m_idx], y[m_idx], task, seed=seed)
            pred = model_predict(fitted, X[pool])
            if task == "binary" or acq.kind == "greedy":
                s = pred.mean if task == "binary" else sign * pred.mean
            elif acq.kind == "ucb":
                s = ucb_score(pred.mean, pred.stddev, acq.beta, acq.direction)
            else:
                s = interpolated_ucb_scores(pred.mean, pred.stddev, acq.beta, acq.direction)
            pick = pool[top_k(s, k)]
        record(it, pick)
        measured.extend(int(i) for i in pick)
        mask[pick] = True
        fitted = None
        if holdout is not None:
            m_idx = np.sort(np.array(measured))
            fitted = fit_model(model, X[m_idx], y[m_idx], task, seed=seed)
            for name, val in _holdout_metrics(fitted, task, *holdout):
                trace.batch_metrics.append((it, name, val))
    return trace


def count_hits(trace: BOTrace, pool_targets, task="regression", direction="minimize"):
    """Measured candidates in the best decile of the pool (regression) or measured positives."""
    y = np.asarray(pool_targets, dtype=np.float64)
    sel = trace.selected
    if task == "binary":
        return int((y[sel] == 1).sum())
    if direction == "minimize":
        return int((y[sel] <= np.percentile(y, 10)).sum())
    return int((y[sel] >= np.percentile(y, 90)).sum())


# --- multi-run campaigns -----------------------------------------------------

def _run_one(args):
    X, y, kw = args
    return run_bo(X, y, **kw)


def run_campaigns(X, y, seeds, jobs=1, **kw):
    """Run one campaign per seed; results come back in seed order for any ``jobs``."""
    tasks = [(X, y, dict(kw, seed=int(s))) for s in seeds]
    if jobs <= 1 or len(tasks) <= 1:
        return [_run_one(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(_run_one, tasks))


def _mean_ci(a):
    a = np.asarray(a, dtype=np.float64)
    m = a.mean(0)
    half = 1.96 * a.std(0, ddof=1) / np.sqrt(a.shape[0]) if a.shape[0] > 1 else np.zeros_like(m)
    return m, m - half, m + half


@dataclass
class BetaScan:
    betas: tuple
    seeds: tuple
    best: np.ndarray            # (n_betas, n_seeds, n_batches + 1) cumulative best
    metrics: dict               # name -> (n_betas, n_seeds, n_batches)
    traces: list                # [beta][seed] BOTrace

    def summary(self, name=None):
        arr = self.best if name is None else self.metrics[name]
        return [_mean_ci(arr[b]) for b in range(len(self.betas))]


def beta_scan(X, y, holdout, betas=BETAS, seeds=range(5), task="regression", model="gp",
              direction="minimize", jobs=1, **kw) -> BetaScan:
    seeds = tuple(int(s) for s in seeds)
    traces = []
    for b in betas:
        acq = AcquisitionSpec("iucb", float(b), direction)
        traces.append(run_campaigns(X, y, seeds, jobs=jobs, task=task, model=model, acq=acq,
                                    holdout=holdout, **kw))
    best = np.array([[t.best_per_batch() for t in row] for row in traces])
    names = sorted({m for row in traces for t in row for _, m, _ in t.batch_metrics})
    metrics = {m: np.array([[t.metric_curve(m) for t in row] for row in traces]) for m in names}
    return BetaScan(tuple(betas), seeds, best, metrics, traces)


# --- files -------------------------------------------------------------------

TRACE_FIELDS = ("run_id", "seed", "beta", "iteration", "selected_smiles", "measured_value",
                "cumulative_best")
METRIC_FIELDS = ("run_id", "batch", "metric", "value")


def write_traces(path, traces, smiles, run_ids=None):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_FIELDS)
        for r, t in enumerate(traces):
            rid = r if run_ids is None else run_ids[r]
            for it, idx, v, best in t.iterations:
                w.writerow([rid, t.seed, repr(float(t.acq.beta)), it, smiles[idx], repr(v), repr(best)])


def write_trace_metrics(path, traces, run_ids=None):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRIC_FIELDS)
        for r, t in enumerate(traces):
            rid = r if run_ids is None else run_ids[r]
            for b, m, v in t.batch_metrics:
                w.writerow([rid, b, m, repr(float(v))])
