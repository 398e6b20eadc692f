"""Vector features for molecular graphs.

* Morgan-style circular fingerprints (binary, 2048 bits, radius 3 by default)
  hashed with a keyed 64-bit BLAKE2b digest, so bits are reproducible across
  platforms and runs.
* A small 2D physicochemical descriptor set (``DESCRIPTOR_NAMES``).
* Tanimoto similarity and a train-statistics standardizer.
* A JSON-lines feature cache.
"""

from __future__ import annotations

import hashlib
import json
import math
import struct
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .elements import atomic_mass, atomic_number
from .errors import ShapeMismatch, WidthMismatch
from .smiles import BondOrder, MolecularGraph

FP_WIDTH = 2048
FP_RADIUS = 3
_HASH_KEY = b"probmol-morgan-v1"

DESCRIPTOR_SCHEMA_VERSION = 1
DESCRIPTOR_NAMES = (
    "mol_weight", "heavy_atoms", "n_C", "n_N", "n_O", "n_S", "n_P", "n_F", "n_Cl",
    "n_Br", "n_I", "n_other", "n_halogen", "ring_count", "n_ring_atoms",
    "n_aromatic_atoms", "hbd_proxy", "hba_proxy", "rotatable_bonds",
    "n_double_bonds", "n_triple_bonds", "mean_degree", "max_degree",
    "wiener_index", "fraction_sp3_carbon", "net_charge", "total_h",
)


@dataclass(frozen=True, eq=False)
class Fingerprint:
    bits: np.ndarray
    radius: int = FP_RADIUS

    @property
    def width(self) -> int:
        return int(self.bits.shape[0])

    @cached_property
    def popcount(self) -> int:
        return int(self.bits.sum())

    @cached_property
    def on_bits(self) -> tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(self.bits))

    def to_hex(self) -> str:
        return np.packbits(self.bits, bitorder="little").tobytes().hex()

    @classmethod
    def from_hex(cls, text, width=FP_WIDTH, radius=FP_RADIUS):
        raw = np.frombuffer(bytes.fromhex(text), dtype=np.uint8)
        bits = np.unpackbits(raw, bitorder="little")[:width].astype(bool)
        return cls(bits, radius)

    @classmethod
    def from_on_bits(cls, on, width=FP_WIDTH, radius=FP_RADIUS):
        bits = np.zeros(width, dtype=bool)
        bits[list(on)] = True
        return cls(bits, radius)

    def __eq__(self, other):
        if not isinstance(other, Fingerprint):
            return NotImplemented
        return self.width == other.width and bool(np.array_equal(self.bits, other.bits))

    def __hash__(self):
        return hash(self.to_hex())


def _hash(*values: int) -> int:
    payload = struct.pack(f"<{len(values)}q", *[_to_signed(v) for v in values])
    return int.from_bytes(hashlib.blake2b(payload, digest_size=8, key=_HASH_KEY).digest(), "little")


def _to_signed(v):
    v &= 0xFFFFFFFFFFFFFFFF
    return v - (1 << 64) if v >= (1 << 63) else v


def atom_invariants(graph: MolecularGraph) -> list[int]:
    """Initial 64-bit identifiers: element, degree, H count, charge, aromatic, ring."""
    return [_hash(atomic_number(a.element), a.degree, a.implicit_h, a.charge,
                  int(a.is_aromatic), int(a.in_ring))
            for a in graph.atoms]


def morgan_identifiers(graph: MolecularGraph, radius: int = FP_RADIUS) -> list[tuple[int, int]]:
    """All retained (radius, identifier) environments of ``graph``.

    At each radius an atom's identifier is re-hashed with the sorted
    (bond order, neighbor identifier) pairs. An environment is dropped when
    its bond set stopped growing or when an identical bond set was already
    emitted (the atom with the smaller identifier keeps it).
    """
    ids = atom_invariants(graph)
    out = [(0, i) for i in ids]
    incident = [set() for _ in graph.atoms]
    for k, b in enumerate(graph.bonds):
        incident[b.begin].add(k)
        incident[b.end].add(k)
    env = [frozenset() for _ in graph.atoms]
    alive = [True] * len(graph.atoms)
    seen = set()
    for r in range(1, radius + 1):
        new_ids = list(ids)
        new_env = list(env)
        for a, nbrs in enumerate(graph.adjacency):
            if not alive[a]:
                continue
            pairs = sorted((int(order), ids[n]) for n, order in nbrs)
            flat = [v for p in pairs for v in p]
            new_ids[a] = _hash(r, ids[a], *flat)
            grown = set(env[a]) | incident[a]
            for n, _ in nbrs:
                grown |= env[n]
            new_env[a] = frozenset(grown)
        candidates = {}
        for a in range(len(graph.atoms)):
            if not alive[a]:
                continue
            if new_env[a] == env[a]:
                alive[a] = False
                continue
            candidates.setdefault(new_env[a], []).append(a)
        for bondset, atoms in candidates.items():
            atoms.sort(key=lambda a: new_ids[a])
            if bondset in seen:
                for a in atoms:
                    alive[a] = False
                continue
            seen.add(bondset)
            out.append((r, new_ids[atoms[0]]))
            for a in atoms[1:]:
                alive[a] = False
        ids, env = new_ids, new_env
    return out


def morgan_fingerprint(graph: MolecularGraph, radius: int = FP_RADIUS,
                       width: int = FP_WIDTH) -> Fingerprint:
    if radius < 0 or width < 1:
        raise ValueError("radius must be >= 0 and width >= 1")
    bits = np.zeros(width, dtype=bool)
    for _, ident in morgan_identifiers(graph, radius):
        bits[ident % width] = True
    return Fingerprint(bits, radius)


def fingerprint_matrix(graphs, radius=FP_RADIUS, width=FP_WIDTH) -> np.ndarray:
    """Stack fingerprints of ``graphs`` into an (n, width) uint8 array."""
    mat = np.zeros((len(graphs), width), dtype=np.uint8)
    for i, g in enumerate(graphs):
        mat[i] = morgan_fingerprint(g, radius, width).bits
    return mat


def tanimoto(a: Fingerprint, b: Fingerprint) -> float:
    """|a AND b| / |a OR b|, with two empty fingerprints defined as identical (1.0)."""
    if a.width != b.width:
        raise WidthMismatch(f"fingerprint widths differ: {a.width} vs {b.width}")
    union = int(np.count_nonzero(a.bits | b.bits))
    if union == 0:
        return 1.0
    return int(np.count_nonzero(a.bits & b.bits)) / union


def tanimoto_matrix(A, B=None) -> np.ndarray:
    """Pairwise Tanimoto similarities between rows of binary matrices."""
    A = np.asarray(A, dtype=np.float64)
    B = A if B is None else np.asarray(B, dtype=np.float64)
    if A.shape[1] != B.shape[1]:
        raise WidthMismatch(f"fingerprint widths differ: {A.shape[1]} vs {B.shape[1]}")
    inter = A @ B.T
    union = A.sum(1)[:, None] + B.sum(1)[None, :] - inter
    with np.errstate(invalid="ignore", divide="ignore"):
        sim = np.where(union > 0, inter / np.where(union > 0, union, 1.0), 1.0)
    return sim


# --- descriptors -------------------------------------------------------------

_COUNTED = ("C", "N", "O", "S", "P", "F", "Cl", "Br", "I")
_HALOGENS = {"F", "Cl", "Br", "I"}


def _wiener_index(graph):
    total = 0
    adj = [[n for n, _ in nbrs] for nbrs in graph.adjacency]
    for src in range(graph.num_atoms):
        dist = {src: 0}
        q = deque([src])
        while q:
            u = q.popleft()
            for v in adj[u]:
                if v not in dist:
                    dist[v] = dist[u] + 1
                    q.append(v)
        total += sum(d for node, d in dist.items() if node > src)
    return total


def physchem_descriptors(graph: MolecularGraph) -> np.ndarray:
    """Graph-derived descriptor vector in ``DESCRIPTOR_NAMES`` order."""
    atoms = graph.atoms
    counts = {e: 0 for e in _COUNTED}
    other = 0
    for a in atoms:
        if a.element in counts:
            counts[a.element] += 1
        else:
            other += 1
    total_h = sum(a.implicit_h for a in atoms)
    weight = math.fsum([atomic_mass(a.element) for a in atoms] + [total_h * atomic_mass("H")])
    ring_count = graph.num_bonds - graph.num_atoms + graph.num_components
    n_double = sum(b.order is BondOrder.DOUBLE for b in graph.bonds)
    n_triple = sum(b.order is BondOrder.TRIPLE for b in graph.bonds)
    rotatable = sum(
        1 for b in graph.bonds
        if b.order is BondOrder.SINGLE and not b.in_ring
        and atoms[b.begin].degree > 1 and atoms[b.end].degree > 1
    )
    degrees = [a.degree for a in atoms]
    carbons = [i for i, a in enumerate(atoms) if a.element == "C"]
    sp3 = sum(1 for i in carbons
              if not atoms[i].is_aromatic
              and all(o is BondOrder.SINGLE for _, o in graph.adjacency[i]))
    values = [
        weight,
        len(atoms),
        *[counts[e] for e in _COUNTED],
        other,
        sum(counts[e] for e in _HALOGENS),
        ring_count,
        sum(a.in_ring for a in atoms),
        sum(a.is_aromatic for a in atoms),
        sum(1 for a in atoms if a.element in ("N", "O") and a.implicit_h > 0),
        sum(1 for a in atoms if a.element in ("N", "O") and a.implicit_h == 0),
        rotatable,
        n_double,
        n_triple,
        float(np.mean(degrees)) if degrees else 0.0,
        max(degrees) if degrees else 0,
        _wiener_index(graph),
        sp3 / len(carbons) if carbons else 0.0,
        graph.net_charge,
        total_h,
    ]
    return np.asarray(values, dtype=np.float64)


def descriptor_matrix(graphs) -> np.ndarray:
    return np.vstack([physchem_descriptors(g) for g in graphs]) if len(graphs) else \
        np.zeros((0, len(DESCRIPTOR_NAMES)))


# --- standardization ---------------------------------------------------------

@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    @property
    def constant(self):
        return self.std == 0

    def transform(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.mean.shape[0]:
            raise ShapeMismatch(f"expected {self.mean.shape[0]} columns, got shape {X.shape}")
        scale = np.where(self.constant, 1.0, self.std)
        Z = (X - self.mean) / scale
        Z[:, self.constant] = 0.0
        return Z

    def inverse_transform(self, Z):
        Z = np.asarray(Z, dtype=np.float64)
        return Z * np.where(self.constant, 0.0, self.std) + self.mean


def fit_standardizer(train) -> Standardizer:
    train = np.asarray(train, dtype=np.float64)
    if train.ndim != 2 or train.shape[0] == 0:
        raise ShapeMismatch("training matrix must be 2-D and nonempty")
    return Standardizer(train.mean(axis=0), train.std(axis=0))


def standardize(train, apply_to):
    """Scale ``apply_to`` by column statistics of ``train``.

    Returns the standardized matrix and the fitted :class:`Standardizer`.
    """
    scaler = fit_standardizer(train)
    return scaler.transform(apply_to), scaler


# --- feature cache -----------------------------------------------------------

def write_feature_cache(path, smiles, graphs, radius=FP_RADIUS, width=FP_WIDTH):
    """Write one JSON record per molecule, preceded by a schema header line."""
    path = Path(path)
    header = {"format": "probmol-features", "descriptor_schema_version": DESCRIPTOR_SCHEMA_VERSION,
              "descriptor_names": list(DESCRIPTOR_NAMES), "fp_radius": radius, "fp_width": width}
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for smi, g in zip(smiles, graphs):
            rec = {"smiles": smi,
                   "fingerprint": morgan_fingerprint(g, radius, width).to_hex(),
                   "descriptors": [float(v) for v in physchem_descriptors(g)]}
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    return path


def read_feature_cache(path):
    """Load a feature cache; returns (header, smiles, fingerprint matrix, descriptor matrix)."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    header = json.loads(lines[0])
    if header.get("descriptor_schema_version") != DESCRIPTOR_SCHEMA_VERSION:
        raise ValueError(f"feature cache schema {header.get('descriptor_schema_version')} "
                         f"!= {DESCRIPTOR_SCHEMA_VERSION}")
    width, radius = header["fp_width"], header["fp_radius"]
    recs = [json.loads(line) for line in lines[1:] if line]
    smiles = [r["smiles"] for r in recs]
    fps = np.array([Fingerprint.from_hex(r["fingerprint"], width, radius).bits for r in recs],
                   dtype=np.uint8).reshape(len(recs), width)
    desc = np.array([r["descriptors"] for r in recs], dtype=np.float64).reshape(
        len(recs), len(header["descriptor_names"]))
    return header, smiles, fps, desc
