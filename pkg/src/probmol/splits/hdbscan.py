"""Density-based hierarchical clustering (HDBSCAN) with excess-of-mass selection.

Dense O(n^2) implementation, adequate for datasets of a few thousand points.
"""

from __future__ import annotations

import numpy as np

MIN_DIST = 1e-12


def pairwise_euclidean(X):
    X = np.asarray(X, dtype=np.float64)
    sq = (X * X).sum(1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * X @ X.T
    np.fill_diagonal(d2, 0.0)
    return np.sqrt(np.maximum(d2, 0.0))


def core_distances(D, min_samples):
    """Distance to the min_samples-th nearest point, the point itself included."""
    k = min(min_samples, D.shape[0]) - 1
    return np.partition(D, k, axis=1)[:, k]


def mutual_reachability(D, min_samples):
    core = core_distances(D, min_samples)
    M = np.maximum(D, np.maximum(core[:, None], core[None, :]))
    np.fill_diagonal(M, 0.0)
    return M


def minimum_spanning_tree(M):
    """Prim's algorithm on a dense matrix. Returns edges (a, b, w) sorted by weight."""
    n = M.shape[0]
    in_tree = np.zeros(n, bool)
    best = np.full(n, np.inf)
    parent = np.full(n, -1)
    edges = []
    cur = 0
    in_tree[0] = True
    for _ in range(n - 1):
        row = M[cur]
        upd = (~in_tree) & (row < best)
        best[upd] = row[upd]
        parent[upd] = cur
        cand = np.where(in_tree, np.inf, best)
        nxt = int(np.argmin(cand))
        edges.append((int(parent[nxt]), nxt, float(best[nxt])))
        in_tree[nxt] = True
        cur = nxt
    edges.sort(key=lambda e: (e[2], min(e[0], e[1]), max(e[0], e[1])))
    return edges


def single_linkage(edges, n):
    """Merge the MST edges into a linkage table rows (left, right, distance, size)."""
    parent = np.arange(2 * n - 1)
    size = np.ones(2 * n - 1, dtype=np.int64)

    def find(x):
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    Z = []
    nxt = n
    for a, b, w in edges:
        ra, rb = find(a), find(b)
        Z.append((ra, rb, w, size[ra] + size[rb]))
        parent[ra] = parent[rb] = nxt
        size[nxt] = size[ra] + size[rb]
        nxt += 1
    return Z


def _contracted_children(Z, n):
    """Children of each linkage node after merging equal-distance chains.

    Merges at the same distance happen at the same density level, so a chain
    of them becomes one n-ary node. This makes the tree independent of how
    ties between MST edge weights were ordered.
    """
    m = len(Z)
    kids = {}
    for i in range(m):
        node = n + i
        out, stack = [], [Z[i][0], Z[i][1]]
        while stack:
            c = stack.pop()
            if c >= n and Z[c - n][2] == Z[i][2]:
                stack.extend((Z[c - n][0], Z[c - n][1]))
            else:
                out.append(c)
        kids[node] = sorted(out)
    return kids


def condense_tree(Z, n, min_cluster_size):
    """Condensed cluster tree as rows (parent, child, lambda, child_size).

    Children with id < n are points; cluster ids start at n (the root).
    """
    m = len(Z)
    if not m:
        return []
    root = n + m - 1
    kids = _contracted_children(Z, n)
    sizes = {n + i: Z[i][3] for i in range(m)}

    def node_size(x):
        return 1 if x < n else sizes[x]

    def leaves(x):
        out, stack = [], [x]
        while stack:
            y = stack.pop()
            if y < n:
                out.append(y)
            else:
                stack.extend(kids[y])
        return sorted(out)

    rows = []
    label = {root: n}
    next_label = n + 1
    stack = [root]
    while stack:
        node = stack.pop()
        lam = 1.0 / max(Z[node - n][2], MIN_DIST)
        parent_label = label[node]
        big = [c for c in kids[node] if node_size(c) >= min_cluster_size]
        for c in kids[node]:
            if node_size(c) < min_cluster_size:
                for p in leaves(c):
                    rows.append((parent_label, p, lam, 1))
        if len(big) >= 2:
            for c in big:
                label[c] = next_label
                rows.append((parent_label, next_label, lam, node_size(c)))
                next_label += 1
            stack.extend(reversed(big))
        elif big:
            c = big[0]
            if c >= n:
                label[c] = parent_label
                stack.append(c)
            else:
                rows.append((parent_label, c, lam, 1))
    return rows


def excess_of_mass(rows, n):
    """Select clusters maximizing total stability; the root is never selected."""
    if not rows:
        return set(), {}
    birth = {n: 0.0}
    children = {}
    for p, c, lam, sz in rows:
        if c >= n:
            birth[c] = lam
            children.setdefault(p, []).append(c)
    stability = {c: 0.0 for c in birth}
    for p, c, lam, sz in rows:
        stability[p] += (lam - birth[p]) * sz
    selected = {}
    for c in sorted(birth, reverse=True):     # children carry larger ids than parents
        if c == n:
            continue
        kids = children.get(c, [])
        sub = sum(stability[k] for k in kids)
        if kids and sub > stability[c]:
            stability[c] = sub
            selected[c] = False
        else:
            selected[c] = True
    # keep the highest selected node on every root-to-leaf path
    chosen = set()
    stack = list(children.get(n, []))
    while stack:
        c = stack.pop()
        if selected[c]:
            chosen.add(c)
        else:
            stack.extend(children.get(c, []))
    return chosen, stability


def label_points(rows, n, chosen):
    parent_of = {}
    for p, c, lam, sz in rows:
        parent_of[c] = p
    labels = np.full(n, -1, dtype=np.int64)
    order = {c: k for k, c in enumerate(sorted(chosen))}
    for i in range(n):
        x = parent_of.get(i)
        while x is not None and x not in chosen:
            x = parent_of.get(x)
        if x is not None:
            labels[i] = order[x]
    return labels


def hdbscan(X, min_cluster_size=10, min_samples=5, metric="euclidean"):
    """Cluster labels for the rows of X (-1 marks noise)."""
    D = pairwise_euclidean(X) if metric == "euclidean" else np.asarray(X, dtype=np.float64)
    n = D.shape[0]
    if n < 2:
        return np.full(n, -1, dtype=np.int64)
    M = mutual_reachability(D, min_samples)
    Z = single_linkage(minimum_spanning_tree(M), n)
    rows = condense_tree(Z, n, min_cluster_size)
    chosen, _ = excess_of_mass(rows, n)
    return label_points(rows, n, chosen)
