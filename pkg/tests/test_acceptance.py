"""Acceptance suite. Each test prints one PASS/FAIL line with the measured value.

Quantitative anchors are reference results for the bundled datasets; the bands
absorb the in-house fingerprint hash and descriptor set.
"""

import csv
import time

import numpy as np
import pytest

from probmol.bo import AcquisitionSpec, beta_scan, count_hits, run_campaigns
from probmol.cli import main
from probmol.featurize import fingerprint_matrix, tanimoto_matrix
from probmol.harness import (ExperimentConfig, build_ladder, load_registered, run_eval_suite,
                             run_generalizability)
from probmol.metrics import ama_metric, ece_metric
from probmol.splits import intra_inter_similarity

from test_metrics import auroc_max_mismatch
from test_models import gp_oracle_max_error, natural_gradient_max_error

SEEDS5 = tuple(range(5))
SEEDS10 = tuple(range(10))


@pytest.fixture
def report(capsys):
    def _report(n, ok, detail):
        with capsys.disabled():
            print(f"\nacceptance {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail
    return _report


def _mean(rows, metric):
    return float(np.mean([r["value"] for r in rows if r["metric"] == metric]))


@pytest.mark.slow
def test_01_delaney_gp_r2(report, delaney):
    cfg = ExperimentConfig("delaney", models=("gp",), seeds=SEEDS5, n_boot=0)
    t = time.perf_counter()
    rows = run_eval_suite(cfg, dataset=delaney)
    per_seed = (time.perf_counter() - t) / len(SEEDS5)
    r2 = _mean(rows, "r2")
    report(1, abs(r2 - 0.724) <= 0.10 and per_seed < 300,
           f"Delaney GP+MFP mean R2 {r2:.3f} (0.724 +- 0.10), {per_seed:.1f}s/seed (< 300s)")


@pytest.mark.slow
def test_02_delaney_ngboost_r2(report, delaney):
    cfg = ExperimentConfig("delaney", models=("ngboost",), seeds=SEEDS5, n_boot=0)
    r2 = _mean(run_eval_suite(cfg, dataset=delaney), "r2")
    report(2, abs(r2 - 0.486) <= 0.12, f"Delaney NGBoost+MFP mean R2 {r2:.3f} (0.486 +- 0.12)")


@pytest.mark.slow
def test_03_bace_gp_auroc_ece(report, bace):
    cfg = ExperimentConfig("bace", "binary", models=("gp",), seeds=SEEDS5, n_boot=0)
    rows = run_eval_suite(cfg, dataset=bace)
    auc, ece = _mean(rows, "auroc"), _mean(rows, "ece")
    report(3, abs(auc - 0.917) <= 0.05 and ece <= 0.20,
           f"BACE GP+MFP mean AUROC {auc:.3f} (0.917 +- 0.05), ECE {ece:.3f} (<= 0.20)")


def _bo_hits(ds, acq):
    X = fingerprint_matrix(ds.graphs)
    traces = run_campaigns(X, ds.targets, SEEDS10, task=ds.task, model="gp", acq=acq,
                           batch=5, budget=300)
    return float(np.mean([count_hits(t, ds.targets, ds.task, acq.direction) for t in traces]))


@pytest.mark.slow
def test_04_bo_delaney_ucb(report, delaney):
    t = time.perf_counter()
    gp = _bo_hits(delaney, AcquisitionSpec("ucb", 0.25, "minimize"))
    rnd = _bo_hits(delaney, AcquisitionSpec("random", 0.0, "minimize"))
    took = time.perf_counter() - t
    report(4, gp >= 2 * rnd and took < 1800,
           f"Delaney BO UCB(0.25) hits {gp:.2f} vs random {rnd:.2f} (>= 2x), {took:.0f}s (< 1800s)")


@pytest.mark.slow
def test_05_bo_bace_greedy(report, bace):
    gp = _bo_hits(bace, AcquisitionSpec("greedy", 0.0, "maximize"))
    rnd = _bo_hits(bace, AcquisitionSpec("random", 0.0, "maximize"))
    report(5, gp >= 1.5 * rnd, f"BACE BO greedy hits {gp:.2f} vs random {rnd:.2f} (>= 1.5x)")


def test_06_calibration_oracles(report):
    rng = np.random.default_rng(0)
    z = rng.normal(size=100_000)
    a = ama_metric(z, np.zeros_like(z), np.ones_like(z))
    p = rng.random(10_000)
    y = (rng.random(10_000) < p).astype(float)
    e = ece_metric(y, p)
    report(6, a < 0.01 and e <= 0.03,
           f"N(0,1) z-scores AMA {a:.4f} (< 0.01), calibrated classifier ECE {e:.4f} (<= 0.03)")


def test_07_gp_dense_inverse(report):
    err = max(gp_oracle_max_error(s, k) for k in ("rbf", "tanimoto") for s in range(50))
    report(7, err < 1e-8, f"GP vs dense inverse, 100 problems, max error {err:.2e} (< 1e-8)")


def test_08_natural_gradient(report):
    err = max(natural_gradient_max_error(s) for s in range(100))
    report(8, err < 1e-5, f"natural gradient vs Fisher-preconditioned FD, 100 draws, max error {err:.2e} (< 1e-5)")


def test_09_auroc_brute_force(report):
    bad = auroc_max_mismatch(n_sets=200, seed=0)
    report(9, bad == 0, f"AUROC vs pair count on 200 sets, {bad} mismatches (exact)")


@pytest.mark.slow
def test_10_cluster_suite(report, delaney):
    sims = {}
    for name in ("delaney", "freesolv", "bace", "bbbp"):
        ds = delaney if name == "delaney" else load_registered(name)
        fps = fingerprint_matrix(ds.graphs)
        ca, _ = build_ladder(ds, 0, fps)
        sims[name] = intra_inter_similarity(tanimoto_matrix(fps, fps), ca.labels)
    cfg = ExperimentConfig("delaney", seeds=(0,), n_boot=0, protocol="cluster")
    rows, _ = run_generalizability(cfg, dataset=delaney)
    curve = [r["value"] for r in rows if r["metric"] == "r2"]
    ok = all(i > o for i, o in sims.values()) and curve[-1] > curve[0]
    detail = ", ".join(f"{k} {i:.3f}>{o:.3f}" for k, (i, o) in sims.items())
    report(10, ok, f"intra>inter: {detail}; Delaney GP ladder R2 {curve[0]:.3f} -> {curve[-1]:.3f}")


@pytest.mark.slow
def test_11_beta_scan_shape(report):
    X = np.linspace(-10, 10, 200)[:, None]
    y = (X[:, 0] - 0.5) ** 2
    xh = np.random.default_rng(123).uniform(-10, 10, 100)
    sc = beta_scan(X, y, (xh[:, None], (xh - 0.5) ** 2), betas=(0.0, 1.0), seeds=range(20),
                   budget=50)
    final = sc.metrics["r2"][:, :, -1]
    wins = int(np.sum(final[1] >= final[0]))
    report(11, wins >= 15, f"1-D pool final holdout R2, beta=1 >= beta=0 in {wins}/20 seeds (>= 15)")


def _tree(root):
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def _small_csv(path, ds, n):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["smiles", "target"])
        w.writerows(zip(ds.smiles[:n], (repr(float(t)) for t in ds.targets[:n])))
    return str(path)


@pytest.mark.slow
def test_12_cli_jobs_determinism(report, tmp_path, delaney):
    data = _small_csv(tmp_path / "small.csv", delaney, 150)
    commands = {
        "featurize": ["featurize", "--data", data, "--task", "regression", "--feature", "physchem"],
        "eval": ["eval", "--data", data, "--task", "regression", "--model", "ngboost",
                 "--n-seeds", "3", "--boot", "100"],
        "ladder": ["eval", "--data", "freesolv", "--protocol", "cluster", "--n-seeds", "2"],
        "bo": ["bo", "--data", data, "--task", "regression", "--budget", "40", "--runs", "4"],
        "clusters": ["clusters", "--data", "bace"],
    }
    differ = []
    for name, args in commands.items():
        trees = []
        for jobs in ("1", "8"):
            out = tmp_path / f"{name}-{jobs}"
            target = str(out / "features.csv") if name == "featurize" else str(out)
            out.mkdir()
            assert main(args + ["--jobs", jobs, "--out", target]) == 0
            trees.append(_tree(out))
        if trees[0] != trees[1] or not trees[0]:
            differ.append(name)
    reports = []
    for jobs in ("1", "8"):
        res = tmp_path / f"all-{jobs}"
        res.mkdir()
        for name in ("eval", "ladder", "bo"):
            for run in (tmp_path / f"{name}-{jobs}").iterdir():
                run.rename(res / run.name)
        assert main(["report", "--in", str(res), "--out", str(tmp_path / f"rep-{jobs}")]) == 0
        reports.append(_tree(tmp_path / f"rep-{jobs}"))
    if reports[0] != reports[1]:
        differ.append("report")
    report(12, not differ, f"CLI outputs byte-identical for --jobs 1 vs 8 over "
                           f"{len(commands) + 1} commands; differing: {differ or 'none'}")
