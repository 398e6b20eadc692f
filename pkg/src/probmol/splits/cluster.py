"""Cluster splits: embedding, HDBSCAN assignment and the training-size ladder."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import TooFewClusters, TooFewItems
from .basic import SplitPlan, iterative_stratified_split
from .hdbscan import hdbscan

MIN_CLUSTER_SIZE = 10
MIN_SAMPLES = 5
N_COMPONENTS = 5
N_TARGET_BINS = 10


def pca_embed(X, n_components=N_COMPONENTS):
    """Project mean-centered rows onto the leading principal axes.

    Axis signs are fixed so the largest-magnitude loading is positive.
    """
    X = np.asarray(X, dtype=np.float64)
    Xc = X - X.mean(0)
    _, _, Vt = np.linalg.svd(Xc, full_matrices=False)
    V = Vt[:n_components]
    flip = np.sign(V[np.arange(V.shape[0]), np.argmax(np.abs(V), axis=1)])
    flip[flip == 0] = 1.0
    V = V * flip[:, None]
    out = Xc @ V.T
    if out.shape[1] < n_components:
        out = np.hstack([out, np.zeros((out.shape[0], n_components - out.shape[1]))])
    return out


def encode_targets(y, task, n_bins=N_TARGET_BINS):
    """Label bits: one-hot of equal-width bins (regression) or the label itself."""
    y = np.asarray(y, dtype=np.float64).ravel()
    if task == "binary":
        return y[:, None]
    lo, hi = y.min(), y.max()
    if hi == lo:
        b = np.zeros(len(y), dtype=np.int64)
    else:
        b = np.minimum(((y - lo) / (hi - lo) * n_bins).astype(np.int64), n_bins - 1)
    return np.eye(n_bins)[b]


def stratification_labels(y, task, n_bins=N_TARGET_BINS):
    """Label one-hots used to balance a split (both classes for binary targets)."""
    y = np.asarray(y, dtype=np.float64).ravel()
    if task == "binary":
        return np.stack([1 - y, y], axis=1)
    return encode_targets(y, task, n_bins)


@dataclass(frozen=True)
class ClusterAssignment:
    labels: np.ndarray       # raw HDBSCAN ids, -1 for noise
    embedding: np.ndarray    # space the clustering ran in

    @property
    def n_clusters(self):
        return int(self.labels.max() + 1) if self.labels.size else 0


def cluster_assign(fingerprints, targets, task, min_cluster_size=MIN_CLUSTER_SIZE,
                   min_samples=MIN_SAMPLES, n_components=N_COMPONENTS) -> ClusterAssignment:
    X = np.asarray(fingerprints, dtype=np.float64)
    if X.shape[0] < 30:
        raise TooFewItems(f"cluster assignment needs at least 30 molecules, got {X.shape[0]}")
    emb = np.hstack([pca_embed(X, n_components), encode_targets(targets, task)])
    labels = hdbscan(emb, min_cluster_size=min_cluster_size, min_samples=min_samples)
    return ClusterAssignment(labels, emb)


def attach_noise(labels, embedding):
    """Give every noise point the id of the nearest cluster centroid."""
    labels = np.asarray(labels, dtype=np.int64).copy()
    noise = labels < 0
    if not noise.any() or noise.all():
        return labels
    ids = np.unique(labels[~noise])
    cents = np.stack([embedding[labels == c].mean(0) for c in ids])
    d = ((embedding[noise][:, None, :] - cents[None]) ** 2).sum(-1)
    labels[noise] = ids[np.argmin(d, axis=1)]
    return labels


@dataclass(frozen=True)
class ClusterLadder:
    cluster_ids: np.ndarray          # raw ids, -1 noise
    test: np.ndarray
    rungs: list                      # list of SplitPlan (train/val from the rung, shared test)
    seed: int
    rung_clusters: list = field(default_factory=list)

    @property
    def sizes(self):
        return [len(r.train) + len(r.val) for r in self.rungs]

    def to_dict(self):
        return {"provenance": "cluster", "seed": int(self.seed),
                "cluster_ids": self.cluster_ids.tolist(), "test": self.test.tolist(),
                "rungs": [{"clusters": [int(c) for c in cl], "train": r.train.tolist(),
                           "val": r.val.tolist()}
                          for r, cl in zip(self.rungs, self.rung_clusters)]}


def _rung_cuts(sizes, n_rungs):
    """End positions (exclusive) of each rung over clusters in shuffled order."""
    k = len(sizes)
    total = float(np.sum(sizes))
    cum = np.cumsum(sizes)
    cuts, prev = [], 0
    for r in range(1, n_rungs):
        target = r * total / n_rungs
        hi = k - (n_rungs - r)          # leave one cluster for each later rung
        pos = prev + 1
        while pos < hi and cum[pos - 1] < target - 1e-9:
            pos += 1
        cuts.append(pos)
        prev = pos
    cuts.append(k)
    return cuts


def cluster_ladder(cluster_ids, targets, task="regression", test_frac=0.2, val_frac=0.15,
                   seed=0, n_rungs=5, embedding=None) -> ClusterLadder:
    """Fixed stratified test set plus growing training pools made of whole clusters.

    Noise points never enter the test set; they follow their nearest cluster
    centroid in ``embedding`` (or, without one, join the last rung).
    """
    raw = np.asarray(cluster_ids, dtype=np.int64)
    y = np.asarray(targets, dtype=np.float64).ravel()
    clusters = np.unique(raw[raw >= 0])
    if len(clusters) < 2:
        raise TooFewClusters(f"need at least 2 clusters, found {len(clusters)}")
    ss = np.random.SeedSequence(seed)
    s_test, s_order, s_val = (int(c.generate_state(1)[0]) for c in ss.spawn(3))

    core = np.nonzero(raw >= 0)[0]
    lab = stratification_labels(y, task)
    onehot = (raw[core][:, None] == clusters[None, :]).astype(float)
    rest, test = iterative_stratified_split(np.hstack([onehot, lab[core]]),
                                            (1.0 - test_frac, test_frac), seed=s_test)
    test = np.sort(core[test])

    if embedding is not None:
        owner = attach_noise(raw, np.asarray(embedding))
    else:
        owner = raw.copy()
    in_test = np.zeros(len(raw), bool)
    in_test[test] = True
    pool = {c: np.nonzero((owner == c) & ~in_test)[0] for c in clusters}
    orphans = np.nonzero((owner < 0) & ~in_test)[0]

    order = np.random.default_rng(s_order).permutation(clusters)
    sizes = [len(pool[c]) for c in order]
    n_rungs = min(n_rungs, len(clusters))
    cuts = _rung_cuts(sizes, n_rungs)

    rungs, rung_clusters = [], []
    for r, end in enumerate(cuts):
        members = list(order[:end])
        idx = np.concatenate([pool[c] for c in members])
        if r == len(cuts) - 1 and len(orphans):
            idx = np.concatenate([idx, orphans])
        idx = np.sort(idx)
        strat = np.hstack([(owner[idx][:, None] == clusters[None, :]).astype(float), lab[idx]])
        tr, va = iterative_stratified_split(strat, (1.0 - val_frac, val_frac), seed=s_val + r)
        rungs.append(SplitPlan(idx[tr], idx[va], test, "cluster", seed,
                               {"rung": r, "clusters": [int(c) for c in members]}))
        rung_clusters.append(members)
    return ClusterLadder(raw, test, rungs, seed, rung_clusters)


def intra_inter_similarity(sim, labels):
    """Mean pairwise similarity within clusters and across clusters (noise ignored)."""
    labels = np.asarray(labels)
    keep = labels >= 0
    S = np.asarray(sim)[np.ix_(keep, keep)]
    lab = labels[keep]
    same = lab[:, None] == lab[None, :]
    off = ~np.eye(len(lab), dtype=bool)
    return float(S[same & off].mean()), float(S[~same].mean())


def write_split_manifest(path, plan):
    """Write a SplitPlan or ClusterLadder as JSON."""
    Path(path).write_text(json.dumps(plan.to_dict(), sort_keys=True), encoding="utf-8")
    return Path(path)


def read_split_manifest(path):
    d = json.loads(Path(path).read_text(encoding="utf-8"))
    if d.get("provenance") == "cluster":
        test = np.asarray(d["test"], dtype=np.int64)
        rungs = [SplitPlan(np.asarray(r["train"], np.int64), np.asarray(r["val"], np.int64), test,
                           "cluster", d["seed"], {"rung": i, "clusters": r["clusters"]})
                 for i, r in enumerate(d["rungs"])]
        return ClusterLadder(np.asarray(d["cluster_ids"], np.int64), test, rungs, d["seed"],
                             [r["clusters"] for r in d["rungs"]])
    extra = {k: v for k, v in d.items() if k not in ("train", "val", "test", "provenance", "seed")}
    return SplitPlan(np.asarray(d["train"], np.int64), np.asarray(d["val"], np.int64),
                     np.asarray(d["test"], np.int64), d["provenance"], d["seed"], extra)
