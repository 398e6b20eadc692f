"""Test utilities: a randomized SMILES writer for re-rooting checks."""

import numpy as np

from probmol.smiles import BondOrder

_BOND = {BondOrder.SINGLE: "-", BondOrder.DOUBLE: "=", BondOrder.TRIPLE: "#",
         BondOrder.AROMATIC: ":"}


def _atom_token(a):
    sym = a.element.lower() if a.is_aromatic else a.element
    iso = "" if a.isotope is None else str(a.isotope)
    h = "" if a.implicit_h == 0 else ("H" if a.implicit_h == 1 else f"H{a.implicit_h}")
    if a.charge == 0:
        q = ""
    else:
        q = ("+" if a.charge > 0 else "-") + (str(abs(a.charge)) if abs(a.charge) > 1 else "")
    return f"[{iso}{sym}{h}{q}]"


def _ring_label(d):
    return str(d) if d < 10 else f"%{d}"


def random_smiles(graph, rng) -> str:
    """Write ``graph`` as SMILES from a random root with a random branch order.

    All atoms are written in brackets and every bond explicitly, so the text
    encodes the parsed graph exactly.
    """
    n = graph.num_atoms
    adj = [list(nb) for nb in graph.adjacency]
    for nb in adj:
        rng.shuffle(nb)
    # pass 1: classify edges into tree edges and ring closures
    visited = [False] * n
    used = set()
    children = [[] for _ in range(n)]
    closures = [[] for _ in range(n)]      # (partner, order, is_opening)
    roots = []
    comp_order = list(range(graph.num_components))
    rng.shuffle(comp_order)
    members = {}
    for i, c in enumerate(graph.components):
        members.setdefault(c, []).append(i)
    for c in comp_order:
        root = members[c][int(rng.integers(len(members[c])))]
        roots.append(root)
        visited[root] = True
        stack = [(root, iter(adj[root]))]
        while stack:
            u, it = stack[-1]
            for v, o in it:
                key = (min(u, v), max(u, v))
                if key in used:
                    continue
                used.add(key)
                if visited[v]:
                    closures[v].append((u, o, True))
                    closures[u].append((v, o, False))
                    continue
                visited[v] = True
                children[u].append((v, o))
                stack.append((v, iter(adj[v])))
                break
            else:
                stack.pop()

    # pass 2: emit, allocating ring labels in emission order
    free = list(range(1, 100))
    open_label = {}
    out = []

    def emit(u):
        out.append(_atom_token(graph.atoms[u]))
        for v, o, opening in closures[u]:
            key = (min(u, v), max(u, v))
            if opening:
                d = free.pop(0)
                open_label[key] = d
                out.append(_BOND[o] + _ring_label(d))
            else:
                d = open_label.pop(key)
                free.insert(0, d)
                free.sort()
                out.append(_ring_label(d))
        kids = children[u]
        for j, (v, o) in enumerate(kids):
            last = j == len(kids) - 1
            if not last:
                out.append("(")
            out.append(_BOND[o])
            emit(v)
            if not last:
                out.append(")")

    for k, r in enumerate(roots):
        if k:
            out.append(".")
        emit(r)
    return "".join(out)


def sample_dataset_smiles(k=120, seed=0):
    """A fixed sample of molecules across the bundled datasets."""
    from probmol.harness import load_registered
    rng = np.random.default_rng(seed)
    out = []
    for name in ("delaney", "freesolv", "bace", "bbbp"):
        ds = load_registered(name)
        idx = rng.choice(len(ds), size=k // 4, replace=False)
        out.extend(ds.smiles[i] for i in sorted(idx))
    return out
