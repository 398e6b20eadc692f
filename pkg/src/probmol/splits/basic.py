"""Random, stratified and iterative-stratified partitions."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from ..errors import DegenerateLabels, EmptyInput, InvalidParams, TooFewItems

DEFAULT_FRACTIONS = (0.7, 0.1, 0.2)
PART_NAMES = ("train", "val", "test")


@dataclass(frozen=True)
class SplitPlan:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    provenance: str
    seed: int
    extra: dict = field(default_factory=dict)

    @property
    def sizes(self):
        return (len(self.train), len(self.val), len(self.test))

    def parts(self):
        return {"train": self.train, "val": self.val, "test": self.test}

    def to_dict(self):
        d = {"provenance": self.provenance, "seed": int(self.seed),
             "train": self.train.tolist(), "val": self.val.tolist(), "test": self.test.tolist()}
        d.update(self.extra)
        return d


def _check_fractions(fractions):
    f = np.asarray(fractions, dtype=np.float64)
    if f.ndim != 1 or np.any(f < 0) or not np.isclose(f.sum(), 1.0):
        raise InvalidParams(f"fractions must be nonnegative and sum to 1, got {fractions}")
    return f


def largest_remainder(n, fractions):
    """Integer part sizes summing to n; leftover items go to the largest fractional parts
    (ties to the earlier part)."""
    f = _check_fractions(fractions)
    raw = n * f
    base = np.floor(raw + 1e-9).astype(np.int64)
    rem = raw - base
    left = n - int(base.sum())
    order = sorted(range(len(f)), key=lambda j: (-round(rem[j], 9), j))
    for j in order[:left]:
        base[j] += 1
    return base


def _plan(parts, provenance, seed):
    parts = [np.sort(np.asarray(p, dtype=np.int64)) for p in parts]
    return SplitPlan(parts[0], parts[1], parts[2], provenance, seed)


def random_split(n, fractions=DEFAULT_FRACTIONS, seed=0) -> SplitPlan:
    if n < 10:
        raise TooFewItems(f"random split needs at least 10 items, got {n}")
    sizes = largest_remainder(n, fractions)
    perm = np.random.default_rng(seed).permutation(n)
    cuts = np.cumsum(sizes)[:-1]
    return _plan(np.split(perm, cuts), "random", seed)


def _class_counts(n_per_class, part_sizes, fractions):
    """Per-class part counts with row sums = class sizes, column sums = part sizes,
    and each entry within one item of its proportional target."""
    f = np.asarray(fractions, float)
    n0, n1 = n_per_class
    ideal0 = n0 * f
    ideal1 = n1 * f
    ranges = []
    for j in range(len(f)):
        lo = int(np.floor(ideal0[j])) - 1
        ranges.append(range(max(lo, 0), int(np.ceil(ideal0[j])) + 2))
    best = None
    for c0 in itertools.product(*ranges):
        if sum(c0) != n0:
            continue
        c1 = part_sizes - np.array(c0)
        if np.any(c1 < 0):
            continue
        dev = np.abs(np.array(c0) - ideal0).max(), np.abs(c1 - ideal1).max()
        key = (max(dev), sum(dev))
        if best is None or key < best[0]:
            best = (key, np.array(c0), c1)
    return best[1], best[2]


def stratified_split(labels, fractions=DEFAULT_FRACTIONS, seed=0) -> SplitPlan:
    y = np.asarray(labels).ravel()
    classes = np.unique(y)
    if len(classes) != 2:
        raise DegenerateLabels("stratified split needs exactly two classes")
    idx = [np.nonzero(y == c)[0] for c in classes]
    if min(len(i) for i in idx) < 5:
        raise DegenerateLabels("each class needs at least 5 items for a stratified split")
    sizes = largest_remainder(len(y), fractions)
    c0, c1 = _class_counts((len(idx[0]), len(idx[1])), sizes, fractions)
    rng = np.random.default_rng(seed)
    parts = [[] for _ in sizes]
    for members, counts in zip(idx, (c0, c1)):
        perm = rng.permutation(members)
        for j, chunk in enumerate(np.split(perm, np.cumsum(counts)[:-1])):
            parts[j].append(chunk)
    return _plan([np.concatenate(p) for p in parts], "stratified", seed)


def iterative_stratified_split(labelsets, fractions=(0.8, 0.2), seed=0):
    """Greedy multi-label stratification.

    The rarest remaining label is handled first; each of its items goes to the
    part with the largest remaining demand for that label, ties going to the
    larger remaining total capacity and then to a seed-shuffled part order.
    Returns one sorted index array per part.
    """
    Y = np.asarray(labelsets)
    if Y.ndim == 1:
        Y = Y[:, None]
    if Y.shape[0] == 0:
        raise EmptyInput("no items to split")
    Y = Y.astype(bool)
    f = _check_fractions(fractions)
    n, L = Y.shape
    rng = np.random.default_rng(seed)
    part_rank = rng.permutation(len(f))      # random tie-break order of parts
    item_order = rng.permutation(n)
    need = f * n                               # remaining total capacity
    need_l = f[:, None] * Y.sum(0)[None, :]    # remaining per-label demand
    assigned = np.full(n, -1)
    remaining = Y.copy()
    alive = np.ones(n, bool)

    def choose(scores_primary):
        keys = [(-scores_primary[j], -need[j], part_rank[j]) for j in range(len(f))]
        return min(range(len(f)), key=lambda j: keys[j])

    while alive.any():
        counts = remaining[alive].sum(0)
        active = np.nonzero(counts > 0)[0]
        if active.size == 0:
            # unlabelled leftovers fill remaining capacity
            for i in item_order[alive[item_order]]:
                j = choose(need)
                assigned[i] = j
                need[j] -= 1
            break
        lab = active[np.argmin(counts[active])]
        members = [i for i in item_order if alive[i] and remaining[i, lab]]
        for i in members:
            j = choose(need_l[:, lab])
            assigned[i] = j
            alive[i] = False
            need[j] -= 1
            need_l[j] -= Y[i]
        remaining[~alive] = False
    return [np.nonzero(assigned == j)[0] for j in range(len(f))]
