"""Experiment configs, the supervised and cluster-ladder suites, BO campaigns,
result persistence and report emission."""

from __future__ import annotations

import csv
import hashlib
import json
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import scipy

from .. import __version__
from ..bo import AcquisitionSpec, count_hits, run_campaigns, write_trace_metrics, write_traces
from ..errors import InvalidParams, MissingResults
from ..featurize import (DESCRIPTOR_SCHEMA_VERSION, FP_RADIUS, FP_WIDTH, descriptor_matrix,
                         fingerprint_matrix, standardize)
from ..metrics import (METRIC_FIELDS, ama_metric, auroc, bootstrap_ci, ece_metric, r_squared,
                       write_metric_rows)
from ..models import fit_model, model_predict
from ..splits import (cluster_assign, cluster_ladder, random_split, stratified_split,
                      write_split_manifest)
from .datasets import Dataset, load_dataset, load_registered

FEATURES = ("mfp", "physchem")
MODELS = ("gp", "ngboost")
PROTOCOLS = ("random", "cluster", "bo", "clusters")


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str
    task: str = "regression"
    models: tuple = ("gp",)
    features: tuple = ("mfp",)
    seeds: tuple = (0,)
    n_boot: int = 1000
    data_path: str | None = None
    protocol: str = "random"
    bo: dict | None = None

    def __post_init__(self):
        object.__setattr__(self, "models", tuple(self.models))
        object.__setattr__(self, "features", tuple(self.features))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if not self.seeds:
            raise InvalidParams("at least one seed is required")
        if self.task not in ("regression", "binary"):
            raise InvalidParams(f"task must be regression or binary, not {self.task!r}")
        for m in self.models:
            if m not in MODELS:
                raise InvalidParams(f"unknown model {m!r}")
        for f in self.features:
            if f not in FEATURES:
                raise InvalidParams(f"unknown feature {f!r}")
        if self.protocol not in PROTOCOLS:
            raise InvalidParams(f"unknown protocol {self.protocol!r}")

    def to_dict(self):
        d = asdict(self)
        d["models"], d["features"], d["seeds"] = list(self.models), list(self.features), list(self.seeds)
        return d

    @property
    def hash(self):
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


# --- data -------------------------------------------------------------------

def load_config_dataset(cfg: ExperimentConfig) -> Dataset:
    if cfg.data_path:
        return load_dataset(cfg.data_path, cfg.task, cfg.dataset)
    return load_registered(cfg.dataset)


def featurize(dataset: Dataset, feature):
    if feature == "mfp":
        return fingerprint_matrix(dataset.graphs)
    if feature == "physchem":
        return descriptor_matrix(dataset.graphs)
    raise InvalidParams(f"unknown feature {feature!r}")


def prepare_features(X, feature, train, others):
    """Descriptor columns are standardized with training-row statistics only."""
    if feature != "physchem":
        return X[train], [X[o] for o in others]
    Ztr, scaler = standardize(X[train], X[train])
    return Ztr, [scaler.transform(X[o]) for o in others]


def split_for(dataset: Dataset, seed):
    if dataset.task == "binary":
        return stratified_split(dataset.targets, seed=seed)
    return random_split(len(dataset), seed=seed)


def metric_fns(task):
    if task == "regression":
        return [("r2", lambda y, m, s: r_squared(y, m)), ("ama", ama_metric)]
    return [("auroc", lambda y, p: auroc(y, p)), ("ece", ece_metric)]


def evaluate(model, task, X, y, n_boot=0, seed=0):
    """Test metrics with optional percentile-bootstrap intervals: list of (name, value, lo, hi)."""
    pred = model_predict(model, X)
    args = (pred.mean, pred.stddev) if task == "regression" else (pred.mean,)
    out = []
    for name, fn in metric_fns(task):
        value = fn(y, *args)
        lo = hi = float("nan")
        if n_boot:
            lo, hi = bootstrap_ci(fn, y, tuple(args), n_boot=n_boot, seed=seed)
        out.append((name, float(value), lo, hi))
    return out


# --- supervised suite -------------------------------------------------------

def _eval_job(job):
    dataset, X, model, feature, seed, n_boot = job
    plan = split_for(dataset, seed)
    y = dataset.targets
    Xtr, (Xva, Xte) = prepare_features(X, feature, plan.train, [plan.val, plan.test])
    m = fit_model(model, Xtr, y[plan.train], dataset.task, seed=seed, val=(Xva, y[plan.val]))
    rows = []
    for name, v, lo, hi in evaluate(m, dataset.task, Xte, y[plan.test], n_boot, seed):
        rows.append({"dataset": dataset.name, "model": model, "feature": feature, "seed": seed,
                     "metric": name, "value": v, "ci_low": lo, "ci_high": hi})
    return rows


def _map(fn, jobs, n_jobs):
    if n_jobs <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n_jobs) as ex:
        return list(ex.map(fn, jobs))


def run_eval_suite(cfg: ExperimentConfig, jobs=1, dataset=None):
    """Per-seed rows {dataset, model, feature, seed, metric, value, ci_low, ci_high}."""
    dataset = dataset or load_config_dataset(cfg)
    feats = {f: featurize(dataset, f) for f in cfg.features}
    work = [(dataset, feats[f], m, f, s, cfg.n_boot)
            for m in cfg.models for f in cfg.features for s in cfg.seeds]
    return [r for rows in _map(_eval_job, work, jobs) for r in rows]


def aggregate_rows(rows):
    """Average per-seed rows into one row per (dataset, model, feature, metric)."""
    groups = {}
    for r in rows:
        groups.setdefault((r["dataset"], r["model"], r["feature"], r["metric"]), []).append(r)
    out = []
    for (d, m, f, k), rs in groups.items():
        out.append({"dataset": d, "model": m, "feature": f, "metric": k,
                    "value": float(np.mean([r["value"] for r in rs])),
                    "ci_low": float(np.mean([r["ci_low"] for r in rs])),
                    "ci_high": float(np.mean([r["ci_high"] for r in rs]))})
    return out


# --- generalizability -------------------------------------------------------

LADDER_FIELDS = ("dataset", "model", "feature", "seed", "rung", "train_size", "train_fraction",
                 "metric", "value")


def _ladder_job(job):
    dataset, X, model, feature, seed, ladder = job
    y = dataset.targets
    total = ladder.sizes[-1]
    rows = []
    for r, plan in enumerate(ladder.rungs):
        Xtr, (Xva, Xte) = prepare_features(X, feature, plan.train, [plan.val, plan.test])
        m = fit_model(model, Xtr, y[plan.train], dataset.task, seed=seed, val=(Xva, y[plan.val]))
        for name, v, _, _ in evaluate(m, dataset.task, Xte, y[plan.test]):
            rows.append({"dataset": dataset.name, "model": model, "feature": feature, "seed": seed,
                         "rung": r, "train_size": len(plan.train),
                         "train_fraction": ladder.sizes[r] / total, "metric": name, "value": v})
    return rows


def build_ladder(dataset: Dataset, seed, fps=None):
    fps = fingerprint_matrix(dataset.graphs) if fps is None else fps
    ca = cluster_assign(fps, dataset.targets, dataset.task)
    return ca, cluster_ladder(ca.labels, dataset.targets, dataset.task, seed=seed,
                              embedding=ca.embedding)


def run_generalizability(cfg: ExperimentConfig, jobs=1, dataset=None):
    """Ladder curve rows plus the median-over-rungs summary per (model, feature, metric)."""
    dataset = dataset or load_config_dataset(cfg)
    fps = fingerprint_matrix(dataset.graphs)
    feats = {f: (fps if f == "mfp" else featurize(dataset, f)) for f in cfg.features}
    ladders = {s: build_ladder(dataset, s, fps)[1] for s in cfg.seeds}
    work = [(dataset, feats[f], m, f, s, ladders[s])
            for m in cfg.models for f in cfg.features for s in cfg.seeds]
    rows = [r for rs in _map(_ladder_job, work, jobs) for r in rs]
    return rows, median_summary(rows)


def median_summary(rows):
    groups = {}
    for r in rows:
        groups.setdefault((r["dataset"], r["model"], r["feature"], r["metric"]), []).append(r["value"])
    return [{"dataset": d, "model": m, "feature": f, "metric": k, "median": float(np.median(v))}
            for (d, m, f, k), v in groups.items()]


# --- BO ---------------------------------------------------------------------

def run_bo_suite(cfg: ExperimentConfig, jobs=1, dataset=None):
    """Campaigns for config.bo = {acq, beta, init_frac, batch, budget, runs}; one model/feature."""
    dataset = dataset or load_config_dataset(cfg)
    bo = dict(cfg.bo or {})
    model, feature = cfg.models[0], cfg.features[0]
    X = featurize(dataset, feature)
    if feature == "physchem":
        X, _ = standardize(X, X)   # pool-wide scaling uses features only, never targets
    direction = "maximize" if dataset.task == "binary" else "minimize"
    acq_kind = bo.get("acq", "greedy" if dataset.task == "binary" else "ucb")
    beta = float(bo.get("beta", 0.0 if acq_kind == "greedy" else 0.25))
    acq = AcquisitionSpec(acq_kind, beta, direction)
    traces = run_campaigns(X, dataset.targets, cfg.seeds, jobs=jobs, task=dataset.task,
                           model=model, acq=acq, init_frac=bo.get("init_frac"),
                           batch=int(bo.get("batch", 5)), budget=bo.get("budget", 300))
    hits = [count_hits(t, dataset.targets, dataset.task, direction) for t in traces]
    return dataset, traces, hits


# --- persistence ------------------------------------------------------------

def versions():
    return {"probmol": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version(),
            "descriptor_schema": DESCRIPTOR_SCHEMA_VERSION,
            "fingerprint": {"radius": FP_RADIUS, "width": FP_WIDTH}}


def write_manifest(run_dir, cfg: ExperimentConfig, kind, dataset: Dataset, extra=None):
    run_dir = Path(run_dir)
    man = {"kind": kind, "config": cfg.to_dict(), "config_hash": cfg.hash,
           "seeds": list(cfg.seeds), "versions": versions(),
           "datasets": {dataset.name: dataset.checksum}}
    if extra:
        man.update(extra)
    (run_dir / "manifest.json").write_text(json.dumps(man, sort_keys=True, indent=2) + "\n",
                                           encoding="utf-8")
    return man


def _write_rows(path, fields, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n", extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v)
                        for k, v in r.items() if k in fields})


def save_eval(out, cfg, rows, dataset):
    run_dir = Path(out) / cfg.hash
    run_dir.mkdir(parents=True, exist_ok=True)
    write_metric_rows(run_dir / "metrics.csv", aggregate_rows(rows))
    _write_rows(run_dir / "metrics_by_seed.csv", METRIC_FIELDS[:3] + ("seed",) + METRIC_FIELDS[3:], rows)
    write_manifest(run_dir, cfg, "eval", dataset)
    return run_dir


def save_ladder(out, cfg, rows, summary, dataset, ladders=None):
    run_dir = Path(out) / cfg.hash
    run_dir.mkdir(parents=True, exist_ok=True)
    _write_rows(run_dir / "ladder.csv", LADDER_FIELDS, rows)
    _write_rows(run_dir / "ladder_summary.csv", ("dataset", "model", "feature", "metric", "median"),
                summary)
    write_manifest(run_dir, cfg, "generalizability", dataset)
    return run_dir


def save_bo(out, cfg, dataset, traces, hits):
    run_dir = Path(out) / cfg.hash
    run_dir.mkdir(parents=True, exist_ok=True)
    write_traces(run_dir / "traces.csv", traces, dataset.smiles)
    write_trace_metrics(run_dir / "trace_metrics.csv", traces)
    _write_rows(run_dir / "hits.csv", ("run_id", "seed", "hits"),
                [{"run_id": i, "seed": t.seed, "hits": h} for i, (t, h) in enumerate(zip(traces, hits))])
    write_manifest(run_dir, cfg, "bo", dataset, {"hits_mean": float(np.mean(hits))})
    return run_dir


def save_clusters(out, cfg, dataset, labels, ladder):
    run_dir = Path(out) / cfg.hash
    run_dir.mkdir(parents=True, exist_ok=True)
    _write_rows(run_dir / "clusters.csv", ("index", "smiles", "cluster"),
                [{"index": i, "smiles": s, "cluster": int(c)}
                 for i, (s, c) in enumerate(zip(dataset.smiles, labels))])
    write_split_manifest(run_dir / "ladder_manifest.json", ladder)
    write_manifest(run_dir, cfg, "clusters", dataset)
    return run_dir


def replay(manifest_path, jobs=1):
    """Rerun the experiment described by a manifest; returns the fresh rows."""
    man = json.loads(Path(manifest_path).read_text(encoding="utf-8"))
    cfg = ExperimentConfig.from_dict(man["config"])
    if man["kind"] == "eval":
        return run_eval_suite(cfg, jobs)
    if man["kind"] == "generalizability":
        return run_generalizability(cfg, jobs)[0]
    if man["kind"] == "bo":
        return run_bo_suite(cfg, jobs)[1]
    raise InvalidParams(f"cannot replay a {man['kind']!r} manifest")


# --- report -----------------------------------------------------------------

REPORT_FILES = ("metrics.csv", "traces.csv", "ladder.csv")


def emit_report(results_dir, out_dir):
    """Merge every run under ``results_dir`` into one CSV per kind plus a manifest."""
    results_dir = Path(results_dir)
    runs = sorted(p.parent for p in results_dir.glob("*/manifest.json")) if results_dir.is_dir() else []
    if not runs:
        raise MissingResults(f"no completed runs under {results_dir}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    merged = {name: [] for name in REPORT_FILES}
    header = {}
    manifest = {"runs": {}, "versions": versions(), "datasets": {}}
    for run in runs:
        man = json.loads((run / "manifest.json").read_text(encoding="utf-8"))
        manifest["runs"][man["config_hash"]] = {"kind": man["kind"], "config": man["config"],
                                                "seeds": man["seeds"]}
        manifest["datasets"].update(man["datasets"])
        for name in REPORT_FILES:
            f = run / name
            if not f.exists():
                continue
            with open(f, newline="", encoding="utf-8") as fh:
                rd = csv.reader(fh)
                cols = next(rd)
                header[name] = ["config_hash"] + cols
                merged[name].extend([man["config_hash"]] + row for row in rd)
    written = []
    for name, rows in merged.items():
        if name not in header:
            continue
        with open(out_dir / name, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header[name])
            w.writerows(rows)
        written.append(name)
    manifest["files"] = written
    (out_dir / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n",
                                           encoding="utf-8")
    return out_dir
