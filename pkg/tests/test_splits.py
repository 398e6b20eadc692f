from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from probmol.errors import DegenerateLabels, EmptyInput, TooFewClusters, TooFewItems
from probmol.featurize import tanimoto_matrix
from probmol.splits import (cluster_assign, cluster_ladder, hdbscan, intra_inter_similarity,
                            iterative_stratified_split, largest_remainder, random_split,
                            read_split_manifest, stratified_split, write_split_manifest)
from probmol.splits.hdbscan import core_distances, minimum_spanning_tree, mutual_reachability


def _disjoint(*parts):
    allidx = np.concatenate(parts)
    return len(allidx) == len(np.unique(allidx))


# --- random / stratified ------------------------------------------------------

def test_random_split_examples():
    assert random_split(10).sizes == (7, 1, 2)
    assert random_split(1116).sizes == (781, 112, 223)
    a, b = random_split(50, seed=3), random_split(50, seed=3)
    assert all(np.array_equal(x, y) for x, y in zip(a.parts().values(), b.parts().values()))
    assert not np.array_equal(random_split(50, seed=4).test, a.test)
    with pytest.raises(TooFewItems):
        random_split(9)


def _lr_oracle(n, f):
    # exact rational restatement: floor, then hand out leftovers by remainder
    raw = [n * Fraction(str(x)) for x in f]
    base = [int(r // 1) for r in raw]
    order = sorted(range(len(f)), key=lambda j: (-(raw[j] - base[j]), j))
    for j in order[: n - sum(base)]:
        base[j] += 1
    return base


@given(st.integers(10, 5000))
def test_largest_remainder_oracle(n):
    got = largest_remainder(n, (0.7, 0.1, 0.2))
    assert got.sum() == n
    assert np.all(np.abs(got - n * np.array([0.7, 0.1, 0.2])) < 1 + 1e-9)
    assert list(got) == _lr_oracle(n, (0.7, 0.1, 0.2))


@settings(max_examples=40, deadline=None)
@given(st.integers(10, 400), st.integers(0, 1000))
def test_random_split_properties(n, seed):
    p = random_split(n, seed=seed)
    assert _disjoint(p.train, p.val, p.test) and sum(p.sizes) == n
    assert np.all(np.abs(np.array(p.sizes) - n * np.array([0.7, 0.1, 0.2])) <= 1)


def test_stratified_examples():
    y = np.r_[np.zeros(50), np.ones(50)]
    p = stratified_split(y, seed=0)
    assert np.bincount(y[p.test].astype(int)).tolist() == [10, 10]
    y = np.r_[np.zeros(180), np.ones(20)]
    for seed in range(10):
        assert int(y[stratified_split(y, seed=seed).test].sum()) in (3, 4, 5)
    a, b = stratified_split(y, seed=1), stratified_split(y, seed=1)
    assert np.array_equal(a.train, b.train)
    with pytest.raises(DegenerateLabels):
        stratified_split(np.r_[np.zeros(20), np.ones(4)])


@settings(max_examples=40, deadline=None)
@given(st.integers(5, 200), st.integers(5, 200), st.integers(0, 1000))
def test_stratified_properties(n0, n1, seed):
    y = np.r_[np.zeros(n0), np.ones(n1)]
    p = stratified_split(y, seed=seed)
    n = n0 + n1
    f = np.array([0.7, 0.1, 0.2])
    assert _disjoint(p.train, p.val, p.test) and sum(p.sizes) == n
    assert np.all(np.abs(np.array(p.sizes) - n * f) <= 1)
    for part, frac in zip((p.train, p.val, p.test), f):
        assert abs(y[part].sum() - n1 * frac) <= 1
        assert abs((1 - y[part]).sum() - n0 * frac) <= 1


# --- iterative stratification -----------------------------------------------------

def test_iterative_single_label_matches_stratified():
    y = np.r_[np.zeros(70), np.ones(30)]
    a, b = iterative_stratified_split(np.stack([1 - y, y], 1), (0.8, 0.2), seed=0)
    assert abs(len(b) - 20) <= 1 and abs(y[b].sum() - 6) <= 1
    assert _disjoint(a, b) and len(a) + len(b) == 100


def test_iterative_two_rare_labels():
    Y = np.zeros((20, 2), bool)
    Y[:5, 0] = True
    Y[5:10, 1] = True
    a, b = iterative_stratified_split(Y, (0.8, 0.2), seed=2)
    for k in range(2):
        assert abs(Y[b, k].sum() - 1) <= 1 and abs(Y[a, k].sum() - 4) <= 1
    assert abs(len(b) - 4) <= 1


def test_iterative_shared_label():
    a, b = iterative_stratified_split(np.ones((20, 1)), (0.8, 0.2), seed=0)
    assert (len(a), len(b)) == (16, 4)
    with pytest.raises(EmptyInput):
        iterative_stratified_split(np.zeros((0, 2)))


@settings(max_examples=30, deadline=None)
@given(st.integers(20, 150), st.integers(1, 6), st.integers(0, 1000))
def test_iterative_properties(n, L, seed):
    rng = np.random.default_rng(seed)
    Y = rng.random((n, L)) < rng.uniform(0.05, 0.6, L)
    Y[0] = True
    parts = iterative_stratified_split(Y, (0.8, 0.2), seed=seed)
    assert _disjoint(*parts) and sum(map(len, parts)) == n
    again = iterative_stratified_split(Y, (0.8, 0.2), seed=seed)
    assert all(np.array_equal(x, y) for x, y in zip(parts, again))


# --- HDBSCAN ------------------------------------------------------------------

def test_core_distance_includes_self():
    D = np.abs(np.subtract.outer(np.arange(6.0), np.arange(6.0)))
    assert np.array_equal(core_distances(D, 1), np.zeros(6))
    assert np.array_equal(core_distances(D, 2), np.ones(6))
    M = mutual_reachability(D, 3)
    assert np.all(M >= D) and np.allclose(M, M.T)


def test_mst_weight_matches_scipy():
    from scipy.sparse.csgraph import minimum_spanning_tree as sp_mst
    rng = np.random.default_rng(0)
    X = rng.normal(size=(60, 3))
    D = np.sqrt(((X[:, None] - X[None]) ** 2).sum(-1))
    edges = minimum_spanning_tree(D)
    assert len(edges) == 59
    assert sum(e[2] for e in edges) == pytest.approx(sp_mst(D).sum(), rel=1e-12)


def _blobs(rng, centers, n, scale):
    return np.vstack([c + scale * rng.normal(size=(n, len(c))) for c in centers])


def _same_partition(a, b):
    if not np.array_equal(a < 0, b < 0):
        return False
    pairs = {(x, y) for x, y in zip(a, b) if x >= 0}
    return len(pairs) == len({x for x, _ in pairs}) == len({y for _, y in pairs})


def test_hdbscan_against_sklearn_no_ties():
    skc = pytest.importorskip("sklearn.cluster")
    for seed in range(15):
        rng = np.random.default_rng(seed)
        X = np.vstack([_blobs(rng, rng.uniform(-10, 10, (4, 2)), 30, rng.uniform(0.3, 1.5)),
                       rng.uniform(-12, 12, (15, 2))])
        ref = skc.HDBSCAN(min_cluster_size=10, min_samples=1).fit_predict(X)
        assert _same_partition(hdbscan(X, 10, 1), ref)


def test_hdbscan_against_sklearn_default_params():
    skc = pytest.importorskip("sklearn.cluster")
    from sklearn.metrics import adjusted_rand_score
    for seed in range(15):
        rng = np.random.default_rng(seed)
        X = np.vstack([_blobs(rng, rng.uniform(-10, 10, (4, 2)), 30, rng.uniform(0.3, 1.5)),
                       rng.uniform(-12, 12, (15, 2))])
        ref = skc.HDBSCAN(min_cluster_size=10, min_samples=5).fit_predict(X)
        assert adjusted_rand_score(ref, hdbscan(X, 10, 5)) >= 0.95


def test_hdbscan_floor_and_duplicates():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(8, 2)) * 10
    assert np.all(hdbscan(X, 10, 5) == -1)
    base = _blobs(rng, [(0, 0), (20, 20)], 15, 0.5)
    X = np.vstack([base, base[:5]])
    lab = hdbscan(X, 10, 5)
    assert np.array_equal(lab[:5], lab[-5:])


def fp_blobs(seed):
    """Two fingerprint families: 50 members each, 4 of 60 core bits dropped per member."""
    rng = np.random.default_rng(seed)
    X = np.zeros((100, 2048), np.uint8)
    for b in range(2):
        core = rng.choice(np.arange(b * 1024, (b + 1) * 1024), 60, replace=False)
        for i in range(50):
            X[b * 50 + i, np.delete(core, rng.choice(60, 4, replace=False))] = 1
    return X


def test_cluster_assign_blobs():
    X = fp_blobs(0)
    S = tanimoto_matrix(X)
    same = np.zeros((100, 100), bool)
    same[:50, :50] = same[50:, 50:] = True
    assert S[same].min() > 0.8 and S[~same].max() < 0.2
    ca = cluster_assign(X, np.random.default_rng(0).normal(size=100), "regression")
    assert ca.n_clusters == 2 and (ca.labels < 0).sum() <= 5
    assert len(set(ca.labels[:50]) - {-1}) == 1 and len(set(ca.labels[50:]) - {-1}) == 1


def test_cluster_assign_duplicates_and_errors():
    X = fp_blobs(1)
    X = np.vstack([X, X[:10]])
    y = np.r_[np.zeros(50), np.ones(50), np.zeros(10)]
    lab = cluster_assign(X, y, "binary").labels
    assert np.array_equal(lab[:10], lab[100:])
    with pytest.raises(TooFewItems):
        cluster_assign(X[:29], y[:29], "binary")


# --- ladder -------------------------------------------------------------------

def test_ladder_equal_clusters():
    ids = np.repeat(np.arange(5), 25)
    for seed in range(5):
        L = cluster_ladder(ids, np.zeros(125), val_frac=0.2, seed=seed)
        assert np.bincount(ids[L.test]).tolist() == [5] * 5
        assert L.sizes == [20, 40, 60, 80, 100]
        assert [len(r.train) for r in L.rungs] == [16, 32, 48, 64, 80]
    L = cluster_ladder(ids, np.zeros(125), seed=0)      # default val_frac 0.15
    assert [len(r.val) for r in L.rungs] == [3, 6, 9, 12, 15]


def test_ladder_invariants_and_determinism():
    rng = np.random.default_rng(0)
    ids = np.repeat(np.arange(8), rng.integers(12, 40, 8))
    ids[rng.choice(len(ids), 15, replace=False)] = -1
    y = rng.normal(size=len(ids))
    emb = rng.normal(size=(len(ids), 3)) + ids[:, None]
    L = cluster_ladder(ids, y, seed=4, embedding=emb)
    assert len(L.rungs) == 5
    assert np.all(np.diff(L.sizes) > 0)
    assert not np.any(ids[L.test] < 0)
    from probmol.splits import attach_noise
    owner = attach_noise(ids, emb)
    for r, cl in zip(L.rungs, L.rung_clusters):
        idx = np.r_[r.train, r.val]
        assert len(np.intersect1d(idx, L.test)) == 0 and _disjoint(r.train, r.val)
        assert np.array_equal(r.test, L.test)
        # whole clusters: every non-test member of a rung cluster is present
        expect = np.nonzero(np.isin(owner, cl) & ~np.isin(np.arange(len(ids)), L.test))[0]
        assert np.array_equal(np.sort(idx), expect)
    M = cluster_ladder(ids, y, seed=4, embedding=emb)
    assert all(np.array_equal(a.train, b.train) for a, b in zip(L.rungs, M.rungs))
    with pytest.raises(TooFewClusters):
        cluster_ladder(np.r_[np.zeros(30, int), -np.ones(5, int)], np.zeros(35))


def test_split_manifest_roundtrip(tmp_path):
    ids = np.repeat(np.arange(5), 25)
    L = cluster_ladder(ids, np.zeros(125), seed=1)
    R = read_split_manifest(write_split_manifest(tmp_path / "l.json", L))
    assert R.to_dict() == L.to_dict()
    p = random_split(40, seed=2)
    assert read_split_manifest(write_split_manifest(tmp_path / "p.json", p)).to_dict() == p.to_dict()


def test_intra_inter_blobs():
    X = fp_blobs(2)
    intra, inter = intra_inter_similarity(tanimoto_matrix(X), np.repeat([0, 1], 50))
    assert intra > 0.8 > 0.2 > inter
