"""Depth-limited least-squares regression trees for boosting.

Splits maximize variance reduction over every threshold at a midpoint of
consecutive sorted unique node values. Ties go to the lowest feature index,
then the lowest threshold. Two exact scan strategies produce the same tree:
a matrix-product scan for 0/1 features and a histogram scan over value codes
for general features.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Tree:
    feature: np.ndarray     # -1 marks a leaf
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def depth(self):
        d = np.zeros(len(self.feature), int)
        for i in range(len(self.feature)):
            if self.feature[i] >= 0:
                d[self.left[i]] = d[self.right[i]] = d[i] + 1
        return int(d.max())

    def predict(self, X):
        node = np.zeros(X.shape[0], dtype=np.int64)
        while True:
            f = self.feature[node]
            inner = f >= 0
            if not inner.any():
                break
            idx = np.nonzero(inner)[0]
            go_left = X[idx, f[idx]] <= self.threshold[node[idx]]
            node[idx] = np.where(go_left, self.left[node[idx]], self.right[node[idx]])
        return self.value[node]

    def to_dict(self):
        return {k: getattr(self, k).tolist() for k in ("feature", "threshold", "left", "right", "value")}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["feature"], np.int64), np.asarray(d["threshold"], float),
                   np.asarray(d["left"], np.int64), np.asarray(d["right"], np.int64),
                   np.asarray(d["value"], float))


class SplitFinder:
    """Precomputed per-feature value codes of a training matrix."""

    def __init__(self, X, method="auto"):
        X = np.asarray(X)
        self.X = X
        self.n, self.d = X.shape
        binary = X.dtype == bool or (X.size > 0 and np.isin(X, (0, 1)).all())
        if method == "auto":
            method = "binary" if binary else "histogram"
        if method == "binary" and not binary:
            raise ValueError("binary split scan needs 0/1 features")
        self.method = method
        if method == "binary":
            self.Xf = np.asarray(X, dtype=np.float64)
            self.uniques = [np.array([0.0, 1.0])] * self.d
        else:
            Xf = np.asarray(X, dtype=np.float64)
            self.Xf = Xf
            self.uniques = []
            codes = np.empty(X.shape, dtype=np.int64)
            for j in range(self.d):
                u, inv = np.unique(Xf[:, j], return_inverse=True)
                self.uniques.append(u)
                codes[:, j] = inv
            self.sizes = np.array([len(u) for u in self.uniques], dtype=np.int64)
            self.offsets = np.concatenate([[0], np.cumsum(self.sizes)[:-1]])
            self.total = int(self.sizes.sum())
            self.flat = codes + self.offsets[None, :]

    # Each scan returns, per node, (gain, feature, left-bin) for the best split.
    # Gains within TIE_RTOL * sum(g^2) of the best count as ties, so the lowest
    # feature / threshold wins regardless of summation order.
    TIE_RTOL = 1e-9

    def _scan_binary(self, groups, g):
        k = len(groups)
        M = np.zeros((self.n, 2 * k))
        for c, rows in enumerate(groups):
            M[rows, c] = g[rows]
            M[rows, k + c] = 1.0
        R = self.Xf.T @ M                       # right-side (x = 1) sums and counts
        out = []
        for c, rows in enumerate(groups):
            s, n = g[rows].sum(), float(len(rows))
            sr, nr = R[:, c], R[:, k + c]
            sl, nl = s - sr, n - nr
            ok = (nl >= 1) & (nr >= 1)
            with np.errstate(divide="ignore", invalid="ignore"):
                gain = np.where(ok, sl * sl / np.where(ok, nl, 1) + sr * sr / np.where(ok, nr, 1), -np.inf)
            gain = gain - s * s / n
            tol = self.TIE_RTOL * float(np.dot(g[rows], g[rows]))
            j = int(np.argmax(gain >= gain.max() - tol))
            out.append((gain[j], j, 0))
        return out

    def _scan_hist(self, groups, g):
        out = []
        for rows in groups:
            flat = self.flat[rows].ravel()
            w = np.repeat(g[rows], self.d)
            sums = np.bincount(flat, weights=w, minlength=self.total)
            cnts = np.bincount(flat, minlength=self.total).astype(float)
            s, n = g[rows].sum(), float(len(rows))
            tol = self.TIE_RTOL * float(np.dot(g[rows], g[rows]))
            best = (-np.inf, -1, -1)
            for j in range(self.d):
                a, b = self.offsets[j], self.offsets[j] + self.sizes[j]
                if b - a < 2:
                    continue
                cl = np.cumsum(cnts[a:b])[:-1]
                sl = np.cumsum(sums[a:b])[:-1]
                nr, sr = n - cl, s - sl
                # only thresholds between values present at this node
                ok = (cl >= 1) & (nr >= 1) & (cnts[a:b - 1] > 0)
                if not ok.any():
                    continue
                with np.errstate(divide="ignore", invalid="ignore"):
                    gain = np.where(ok, sl * sl / np.where(ok, cl, 1) + sr * sr / np.where(ok, nr, 1), -np.inf)
                gain = gain - s * s / n
                k = int(np.argmax(gain >= gain.max() - tol))
                if gain[k] > best[0] + tol:
                    best = (gain[k], j, k)
            out.append(best)
        return out

    def threshold(self, rows, j, k):
        """Midpoint between the largest node value in the left bin and the next node value."""
        x = self.Xf[rows, j]
        cut = self.uniques[j][k]
        lo = x[x <= cut].max()
        hi = x[x > cut].min()
        return 0.5 * (lo + hi)

    def fit(self, g, max_depth=3, rows=None, min_gain=1e-12) -> Tree:
        g = np.asarray(g, dtype=np.float64)
        rows = np.arange(self.n) if rows is None else np.asarray(rows)
        scale = max(float(np.dot(g[rows], g[rows])), 1e-300)
        feature, threshold, left, right, value = [-1], [0.0], [-1], [-1], [float(g[rows].mean())]
        frontier = [(0, rows)]
        for _ in range(max_depth):
            if not frontier:
                break
            groups = [r for _, r in frontier]
            scan = self._scan_binary if self.method == "binary" else self._scan_hist
            found = scan(groups, g)
            nxt = []
            for (node, r), (gain, j, k) in zip(frontier, found):
                if not np.isfinite(gain) or gain <= min_gain * scale:
                    continue
                t = 0.5 if self.method == "binary" else self.threshold(r, j, k)
                mask = self.Xf[r, j] <= t
                rl, rr = r[mask], r[~mask]
                feature[node], threshold[node] = j, t
                for child_rows in (rl, rr):
                    feature.append(-1); threshold.append(0.0)
                    left.append(-1); right.append(-1)
                    value.append(float(g[child_rows].mean()))
                left[node], right[node] = len(value) - 2, len(value) - 1
                nxt += [(left[node], rl), (right[node], rr)]
            frontier = nxt
        return Tree(np.array(feature, np.int64), np.array(threshold, float),
                    np.array(left, np.int64), np.array(right, np.int64), np.array(value, float))


def fit_tree(X, g, max_depth=3, method="auto") -> Tree:
    return SplitFinder(X, method).fit(g, max_depth)
