import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from helpers import random_smiles, sample_dataset_smiles
from probmol.errors import ShapeMismatch, WidthMismatch
from probmol.featurize import (DESCRIPTOR_NAMES, FP_WIDTH, Fingerprint, descriptor_matrix,
                               fingerprint_matrix, fit_standardizer, morgan_fingerprint,
                               physchem_descriptors, read_feature_cache, standardize, tanimoto,
                               tanimoto_matrix, write_feature_cache)
from probmol.smiles import parse_smiles


def fp(s):
    return morgan_fingerprint(parse_smiles(s))


def desc(s):
    return dict(zip(DESCRIPTOR_NAMES, physchem_descriptors(parse_smiles(s))))


def test_fingerprint_shape():
    f = fp("c1ccccc1O")
    assert f.width == FP_WIDTH == 2048 and f.radius == 3
    assert f.popcount == int(f.bits.sum()) > 0
    assert fp("c1ccccc1O") == f


def test_fingerprint_examples():
    assert fp("CCO") == fp("OCC")
    assert fp("C") != fp("N")
    # ethane: one environment at r=0, one at r=1, nothing new after
    assert fp("CC").popcount <= 2


def test_hex_roundtrip():
    f = fp("CC(=O)Nc1ccc(O)cc1")
    assert Fingerprint.from_hex(f.to_hex()) == f


def test_tanimoto_examples():
    a = Fingerprint.from_on_bits([1, 2, 3])
    b = Fingerprint.from_on_bits([2, 3, 4])
    assert tanimoto(a, a) == 1.0
    assert tanimoto(a, Fingerprint.from_on_bits([7, 8])) == 0.0
    assert tanimoto(a, b) == 0.5
    z = Fingerprint.from_on_bits([])
    assert tanimoto(z, z) == 1.0
    with pytest.raises(WidthMismatch):
        tanimoto(a, Fingerprint.from_on_bits([1], width=64))


@given(st.sets(st.integers(0, 63), max_size=20), st.sets(st.integers(0, 63), max_size=20))
def test_tanimoto_symmetric(x, y):
    a, b = Fingerprint.from_on_bits(x, 64), Fingerprint.from_on_bits(y, 64)
    assert tanimoto(a, b) == tanimoto(b, a)
    assert tanimoto(a, a) == 1.0
    union = len(x | y)
    assert tanimoto(a, b) == (len(x & y) / union if union else 1.0)


def test_tanimoto_matrix_matches_pairwise():
    rng = np.random.default_rng(0)
    A = (rng.random((12, 64)) < 0.2).astype(np.uint8)
    A[0] = 0
    A[1] = 0
    S = tanimoto_matrix(A)
    for i in range(12):
        for j in range(12):
            ref = tanimoto(Fingerprint(A[i].astype(bool)), Fingerprint(A[j].astype(bool)))
            assert S[i, j] == pytest.approx(ref, abs=1e-15)
    assert np.allclose(S, S.T) and S[0, 1] == 1.0


def test_descriptor_examples():
    d = desc("C")
    assert d["mol_weight"] == pytest.approx(12.011 + 4 * 1.008, abs=1e-3)   # 16.043
    d = desc("CCO")
    assert d["heavy_atoms"] == 3 and d["hbd_proxy"] == 1
    assert desc("c1ccccc1")["ring_count"] == 1
    assert len(physchem_descriptors(parse_smiles("CCO"))) == len(DESCRIPTOR_NAMES)


def _wiener_oracle(g):
    n = g.num_atoms
    if n == 1:
        return 0.0
    rows = [b.begin for b in g.bonds] + [b.end for b in g.bonds]
    cols = [b.end for b in g.bonds] + [b.begin for b in g.bonds]
    D = shortest_path(csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n)), unweighted=True)
    D[~np.isfinite(D)] = 0
    return D[np.triu_indices(n, 1)].sum()


def test_wiener_against_graph_oracle():
    i = DESCRIPTOR_NAMES.index("wiener_index")
    for s in sample_dataset_smiles(40, seed=5) + ["CCCC", "CC.CC", "C"]:
        g = parse_smiles(s)
        assert physchem_descriptors(g)[i] == _wiener_oracle(g)
    assert desc("CCCC")["wiener_index"] == 10   # 1+2+3+1+2+1


def test_descriptors_finite_on_datasets(delaney):
    D = descriptor_matrix(delaney.graphs)
    assert D.shape == (len(delaney), len(DESCRIPTOR_NAMES))
    assert np.isfinite(D).all()


def test_rerooting_invariance():
    rng = np.random.default_rng(11)
    smiles = sample_dataset_smiles(120, seed=1)
    assert len(smiles) >= 100
    for s in smiles:
        g = parse_smiles(s)
        f, d = morgan_fingerprint(g), physchem_descriptors(g)
        for _ in range(5):
            h = parse_smiles(random_smiles(g, rng))
            assert morgan_fingerprint(h) == f
            assert np.array_equal(physchem_descriptors(h), d)


def test_standardize_examples():
    X = np.array([[0.0, 1.0, 5.0], [4.0, 3.0, 5.0], [2.0, 8.0, 5.0]])
    Z, sc = standardize(X, X)
    assert np.allclose(Z[:, :2].mean(0), 0) and np.allclose(Z[:, :2].std(0), 1)
    assert np.all(Z[:, 2] == 0)
    sc2 = fit_standardizer(np.array([[0.0], [4.0]]))     # mean 2, population std 2
    assert sc2.transform(np.array([[6.0]]))[0, 0] == 2.0
    with pytest.raises(ShapeMismatch):
        standardize(X, X[:, :2])


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 30), st.integers(1, 6), st.integers(0, 2**31))
def test_standardize_inverse(n, d, seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d)) * rng.uniform(0.1, 100, d) + rng.normal(0, 50, d)
    Z, sc = standardize(X, X)
    back = sc.inverse_transform(Z)
    nonconst = ~sc.constant
    assert np.allclose(back[:, nonconst], X[:, nonconst], rtol=1e-9, atol=0)


def test_feature_cache_roundtrip(tmp_path):
    smiles = ["CCO", "c1ccccc1", "CC(=O)O"]
    graphs = [parse_smiles(s) for s in smiles]
    p = write_feature_cache(tmp_path / "f.jsonl", smiles, graphs)
    header, smi, F, D = read_feature_cache(p)
    assert smi == smiles and header["descriptor_schema_version"] == 1
    assert np.array_equal(F, fingerprint_matrix(graphs))
    assert np.array_equal(D, descriptor_matrix(graphs))
