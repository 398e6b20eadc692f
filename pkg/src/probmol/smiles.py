"""SMILES parsing into immutable heavy-atom molecular graphs.

Covers the subset of SMILES found in small QSAR datasets: the organic subset,
bracket atoms (isotope, explicit H count, charge, atom class), ring closures
including ``%nn``, branches, dot-disconnected components and lowercase
aromatic atoms. Stereo marks (``/``, ``\\``, ``@``, ``@@``) are consumed and
recorded but have no effect on the graph. Aromatic bonds of closed ring
systems are kept as their own bond order and never kekulized; only lowercase
chains that cannot be aromatic are resolved to single/double bonds.
"""

from __future__ import annotations

import hashlib
import re
from collections import Counter
from dataclasses import dataclass, field
from enum import IntEnum
from functools import cached_property

from .elements import AROMATIC_SYMBOLS, ELEMENTS, ORGANIC_VALENCES
from .errors import (EmptyInput, InvalidAromaticity, SmilesError, UnclosedRing,
                     UnknownElement, UnmatchedParenthesis, ValenceOverflow)

__all__ = ["Atom", "Bond", "BondOrder", "MolecularGraph", "Formula",
           "parse_smiles", "molecular_formula", "constitution_key"]


class BondOrder(IntEnum):
    SINGLE = 1
    DOUBLE = 2
    TRIPLE = 3
    AROMATIC = 4

    @property
    def valence(self):
        """Contribution to the valence sum (aromatic counted as 1)."""
        return 1 if self is BondOrder.AROMATIC else int(self)


@dataclass(frozen=True)
class Atom:
    element: str
    charge: int = 0
    is_aromatic: bool = False
    implicit_h: int = 0
    in_ring: bool = False
    degree: int = 0
    isotope: int | None = None
    bracket: bool = False


@dataclass(frozen=True)
class Bond:
    begin: int
    end: int
    order: BondOrder
    in_ring: bool = False

    @property
    def endpoints(self):
        return (self.begin, self.end)


@dataclass(frozen=True)
class MolecularGraph:
    atoms: tuple[Atom, ...]
    bonds: tuple[Bond, ...]
    smiles: str = ""
    stereo_tokens: tuple[str, ...] = field(default=(), compare=False)

    @property
    def has_stereo(self) -> bool:
        return bool(self.stereo_tokens)

    @property
    def num_atoms(self) -> int:
        return len(self.atoms)

    @property
    def num_bonds(self) -> int:
        return len(self.bonds)

    @property
    def net_charge(self) -> int:
        return sum(a.charge for a in self.atoms)

    @cached_property
    def adjacency(self) -> tuple[tuple[tuple[int, BondOrder], ...], ...]:
        """Per atom, the (neighbor index, bond order) pairs."""
        adj = [[] for _ in self.atoms]
        for b in self.bonds:
            adj[b.begin].append((b.end, b.order))
            adj[b.end].append((b.begin, b.order))
        return tuple(tuple(a) for a in adj)

    @cached_property
    def components(self) -> tuple[int, ...]:
        """Connected-component label for every atom, numbered from 0."""
        label = [-1] * len(self.atoms)
        current = 0
        for start in range(len(self.atoms)):
            if label[start] >= 0:
                continue
            label[start] = current
            stack = [start]
            while stack:
                u = stack.pop()
                for v, _ in self.adjacency[u]:
                    if label[v] < 0:
                        label[v] = current
                        stack.append(v)
            current += 1
        return tuple(label)

    @property
    def num_components(self) -> int:
        return max(self.components) + 1 if self.atoms else 0


# --- tokenizing ----------------------------------------------------------------

_BRACKET = re.compile(
    r"(?P<isotope>\d+)?"
    r"(?P<symbol>[A-Z][a-z]?|se|as|te|si|[bcnops]|\*)"
    r"(?P<chiral>@(?:@|TH[12]|AL[12]|SP[123]|TB\d{1,2}|OH\d{1,2})?)?"
    r"(?P<hcount>H\d*)?"
    r"(?P<charge>\+\+?|--?|[+-]\d+)?"
    r"(?::(?P<cls>\d+))?$"
)

_BOND_SYMBOLS = {"-", "=", "#", "$", ":", "/", "\\"}
_ORGANIC_TWO = ("Cl", "Br")
_ORGANIC_ONE = set("BCNOPSFIbcnops")


class _Builder:
    """Mutable scratch state used while reading one SMILES string."""

    def __init__(self, text):
        self.text = text
        self.atoms = []          # dicts, converted to Atom at the end
        self.bonds = {}          # (i, j) with i < j -> bond symbol or None
        self.stereo = []

    def add_atom(self, **kw):
        self.atoms.append(kw)
        return len(self.atoms) - 1

    def add_bond(self, a, b, symbol):
        if a == b:
            raise SmilesError(f"atom bonded to itself in {self.text!r}")
        key = (a, b) if a < b else (b, a)
        if key in self.bonds:
            raise SmilesError(f"duplicate bond between atoms {a} and {b} in {self.text!r}")
        self.bonds[key] = symbol


def _parse_bracket(body, text):
    m = _BRACKET.match(body)
    if m is None:
        sym = re.match(r"\d*([A-Za-z][a-z]?)", body)
        if sym and sym.group(1) not in ELEMENTS and sym.group(1) not in AROMATIC_SYMBOLS:
            raise UnknownElement(f"unknown element in [{body}] of {text!r}")
        raise SmilesError(f"malformed bracket atom [{body}] in {text!r}")
    symbol = m["symbol"]
    if symbol == "*":
        raise UnknownElement(f"wildcard atom in {text!r}")
    aromatic = symbol[0].islower()
    element = AROMATIC_SYMBOLS[symbol] if aromatic else symbol
    if element not in ELEMENTS:
        raise UnknownElement(f"unknown element {symbol!r} in {text!r}")
    h = m["hcount"]
    hcount = 0 if not h else (1 if h == "H" else int(h[1:]))
    c = m["charge"]
    if not c:
        charge = 0
    elif c in ("+", "++", "-", "--"):
        charge = len(c) if c[0] == "+" else -len(c)
    else:
        charge = int(c)
    return dict(element=element, charge=charge, is_aromatic=aromatic, h=hcount,
                isotope=int(m["isotope"]) if m["isotope"] else None,
                bracket=True, chiral=m["chiral"])


def _resolve_ring_bond(first, second, text):
    if first is None:
        return second
    if second is None or first == second:
        return first
    single_like = {"-", "/", "\\"}
    if first in single_like and second in single_like:
        return "-"
    raise SmilesError(f"conflicting ring-closure bond symbols in {text!r}")


def _read(text):
    b = _Builder(text)
    stack = []
    prev = None
    pending = None
    rings = {}
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "(":
            if prev is None:
                raise SmilesError(f"branch opened before any atom in {text!r}")
            stack.append(prev)
            i += 1
        elif ch == ")":
            if not stack:
                raise UnmatchedParenthesis(f"unmatched ')' at position {i} in {text!r}")
            if pending is not None:
                raise SmilesError(f"dangling bond before ')' in {text!r}")
            prev = stack.pop()
            i += 1
        elif ch == ".":
            if pending is not None:
                raise SmilesError(f"dangling bond before '.' in {text!r}")
            prev = None
            i += 1
        elif ch in _BOND_SYMBOLS:
            if pending is not None:
                raise SmilesError(f"two consecutive bond symbols at {i} in {text!r}")
            if ch in "/\\":
                b.stereo.append(ch)
            pending = ch
            i += 1
        elif ch.isdigit() or ch == "%":
            if ch == "%":
                digits = text[i + 1:i + 3]
                if len(digits) != 2 or not digits.isdigit():
                    raise SmilesError(f"bad %nn ring label at {i} in {text!r}")
                num = int(digits)
                i += 3
            else:
                num = int(ch)
                i += 1
            if prev is None:
                raise SmilesError(f"ring label without an atom in {text!r}")
            if num in rings:
                other, sym = rings.pop(num)
                b.add_bond(other, prev, _resolve_ring_bond(sym, pending, text))
            else:
                rings[num] = (prev, pending)
            pending = None
        elif ch == "[":
            close = text.find("]", i)
            if close < 0:
                raise SmilesError(f"unterminated bracket atom in {text!r}")
            spec = _parse_bracket(text[i + 1:close], text)
            if spec["chiral"]:
                b.stereo.append(spec["chiral"][:2] if spec["chiral"].startswith("@@") else "@")
            idx = b.add_atom(**spec)
            if prev is not None:
                b.add_bond(prev, idx, pending)
            elif pending is not None:
                raise SmilesError(f"bond symbol without a preceding atom in {text!r}")
            prev, pending = idx, None
            i = close + 1
        elif ch.isalpha():
            if text[i:i + 2] in _ORGANIC_TWO:
                symbol = text[i:i + 2]
            elif ch in _ORGANIC_ONE:
                symbol = ch
            else:
                raise UnknownElement(f"unknown organic-subset symbol {ch!r} at {i} in {text!r}")
            aromatic = symbol.islower()
            element = symbol.upper() if aromatic else symbol
            idx = b.add_atom(element=element, charge=0, is_aromatic=aromatic, h=None,
                             isotope=None, bracket=False, chiral=None)
            if prev is not None:
                b.add_bond(prev, idx, pending)
            elif pending is not None:
                raise SmilesError(f"bond symbol without a preceding atom in {text!r}")
            prev, pending = idx, None
            i += len(symbol)
        else:
            raise SmilesError(f"unexpected character {ch!r} at {i} in {text!r}")
    if stack:
        raise UnmatchedParenthesis(f"{len(stack)} unclosed '(' in {text!r}")
    if rings:
        raise UnclosedRing(f"ring label(s) {sorted(rings)} never closed in {text!r}")
    if pending is not None:
        raise SmilesError(f"trailing bond symbol in {text!r}")
    return b


def _ring_bonds(n_atoms, edges):
    """Return the set of edge keys lying on a cycle (non-bridges)."""
    adj = [[] for _ in range(n_atoms)]
    for k, (u, v) in enumerate(edges):
        adj[u].append((v, k))
        adj[v].append((u, k))
    disc = [-1] * n_atoms
    low = [0] * n_atoms
    bridges = set()
    t = 0
    for root in range(n_atoms):
        if disc[root] >= 0:
            continue
        disc[root] = low[root] = t
        t += 1
        stack = [(root, -1, iter(adj[root]))]
        while stack:
            u, via, it = stack[-1]
            advanced = False
            for v, k in it:
                if k == via:
                    continue
                if disc[v] < 0:
                    disc[v] = low[v] = t
                    t += 1
                    stack.append((v, k, iter(adj[v])))
                    advanced = True
                    break
                low[u] = min(low[u], disc[v])
            if not advanced:
                stack.pop()
                if stack:
                    p = stack[-1][0]
                    low[p] = min(low[p], low[u])
                    if low[u] > disc[p]:
                        bridges.add(via)
    return {edges[k] for k in range(len(edges)) if k not in bridges}


def _demote_open_systems(raw, orders, n_arom, valence, aromatic, text):
    """Kekulize aromatic-bond components that are not closed aromatic systems.

    A lowercase component containing an atom with a single aromatic bond is
    really a chain written in aromatic notation; its atoms lose the aromatic
    flag and its bonds get single/double orders from a perfect matching over
    the atoms that still need one double bond.
    """
    arom_adj = {}
    for (u, v), order in orders.items():
        if order is BondOrder.AROMATIC:
            arom_adj.setdefault(u, []).append(v)
            arom_adj.setdefault(v, []).append(u)
    seen = set()
    for start in sorted(arom_adj):
        if start in seen:
            continue
        comp, stack = [], [start]
        seen.add(start)
        while stack:
            u = stack.pop()
            comp.append(u)
            for v in arom_adj[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        if all(n_arom[u] >= 2 for u in comp):
            continue
        needs = {u for u in comp
                 if not raw[u]["bracket"]
                 and ORGANIC_VALENCES[raw[u]["element"]][0] - valence[u] - 1 >= 0}
        needs |= {u for u in comp if raw[u]["bracket"] and raw[u]["is_aromatic"]
                  and raw[u]["element"] in ("C", "N") and raw[u]["h"] + valence[u] < 3}
        match = _perfect_matching(sorted(needs), arom_adj)
        if match is None:
            raise InvalidAromaticity(f"cannot kekulize aromatic atoms in {text!r}")
        for u in comp:
            aromatic[u] = False
            for v in arom_adj[u]:
                key = (u, v) if u < v else (v, u)
                pair = match.get(u) == v
                orders[key] = BondOrder.DOUBLE if pair else BondOrder.SINGLE


def _perfect_matching(nodes, adj):
    nodes_set = set(nodes)
    match = {}

    def solve(i):
        while i < len(nodes) and nodes[i] in match:
            i += 1
        if i == len(nodes):
            return True
        u = nodes[i]
        for v in adj.get(u, ()):
            if v in nodes_set and v not in match:
                match[u], match[v] = v, u
                if solve(i + 1):
                    return True
                del match[u], match[v]
        return False

    return dict(match) if solve(0) else None


_ORDER_OF = {"-": BondOrder.SINGLE, "/": BondOrder.SINGLE, "\\": BondOrder.SINGLE,
             "=": BondOrder.DOUBLE, "#": BondOrder.TRIPLE, ":": BondOrder.AROMATIC}


def parse_smiles(text: str) -> MolecularGraph:
    """Parse ``text`` into a :class:`MolecularGraph`.

    Implicit hydrogens of organic-subset atoms follow the default valence
    rules; lowercase aromatic atoms reserve one valence unit for the aromatic
    system. Neutral explicit ``[H]`` atoms bound to a single heavy atom are
    folded into that atom's hydrogen count.

    Raises
    ------
    EmptyInput, UnclosedRing, UnmatchedParenthesis, UnknownElement,
    ValenceOverflow, InvalidAromaticity, SmilesError
    """
    if text is None or not str(text).strip():
        raise EmptyInput("empty SMILES string")
    text = str(text).strip()
    b = _read(text)
    raw = b.atoms
    edges = sorted(b.bonds)
    ring = _ring_bonds(len(raw), edges)

    orders = {}
    for key in edges:
        sym = b.bonds[key]
        if sym == "$":
            raise SmilesError(f"quadruple bonds are not supported: {text!r}")
        if sym is None:
            u, v = key
            both = raw[u]["is_aromatic"] and raw[v]["is_aromatic"]
            orders[key] = BondOrder.AROMATIC if both and key in ring else BondOrder.SINGLE
        else:
            orders[key] = _ORDER_OF[sym]

    valence = [0] * len(raw)
    n_arom = [0] * len(raw)
    for (u, v), order in orders.items():
        valence[u] += order.valence
        valence[v] += order.valence
        if order is BondOrder.AROMATIC:
            n_arom[u] += 1
            n_arom[v] += 1

    hcount = []
    for idx, a in enumerate(raw):
        if a["bracket"]:
            hcount.append(a["h"])
            continue
        allowed = ORGANIC_VALENCES[a["element"]]
        used = valence[idx]
        if used > allowed[-1]:
            raise ValenceOverflow(
                f"{a['element']} atom {idx} has valence {used} > {allowed[-1]} in {text!r}")
        if a["is_aromatic"]:
            if n_arom[idx] == 0:
                raise InvalidAromaticity(
                    f"aromatic atom {idx} has no aromatic bond in {text!r}")
            hcount.append(max(0, allowed[0] - used - 1))
        else:
            hcount.append(next(v for v in allowed if v >= used) - used)

    aromatic = [a["is_aromatic"] for a in raw]
    _demote_open_systems(raw, orders, n_arom, valence, aromatic, text)

    # fold neutral explicit hydrogens into their heavy neighbor
    neighbors = [[] for _ in raw]
    for u, v in edges:
        neighbors[u].append(v)
        neighbors[v].append(u)
    drop = set()
    for idx, a in enumerate(raw):
        if (a["element"] == "H" and a["charge"] == 0 and a["isotope"] is None
                and len(neighbors[idx]) == 1 and raw[neighbors[idx][0]]["element"] != "H"):
            drop.add(idx)
            hcount[neighbors[idx][0]] += 1 + hcount[idx]
    remap = {}
    for idx in range(len(raw)):
        if idx not in drop:
            remap[idx] = len(remap)

    degree = [0] * len(raw)
    in_ring = [False] * len(raw)
    bonds = []
    for key in edges:
        u, v = key
        if u in drop or v in drop:
            continue
        degree[u] += 1
        degree[v] += 1
        r = key in ring
        in_ring[u] |= r
        in_ring[v] |= r
        bonds.append(Bond(remap[u], remap[v], orders[key], r))

    atoms = tuple(
        Atom(element=a["element"], charge=a["charge"], is_aromatic=aromatic[idx],
             implicit_h=hcount[idx], in_ring=in_ring[idx], degree=degree[idx],
             isotope=a["isotope"], bracket=a["bracket"])
        for idx, a in enumerate(raw) if idx not in drop
    )
    return MolecularGraph(atoms=atoms, bonds=tuple(bonds), smiles=text,
                          stereo_tokens=tuple(b.stereo))


# --- derived summaries -------------------------------------------------------------

@dataclass(frozen=True)
class Formula:
    counts: dict
    charge: int = 0

    @property
    def hill(self) -> str:
        counts = {k: v for k, v in self.counts.items() if v}
        if "C" in counts:
            order = ["C"] + (["H"] if "H" in counts else [])
            order += sorted(k for k in counts if k not in ("C", "H"))
        else:
            order = sorted(counts)
        return "".join(k + (str(counts[k]) if counts[k] > 1 else "") for k in order)

    def __str__(self):
        return self.hill


def molecular_formula(graph: MolecularGraph) -> Formula:
    """Element counts including implicit hydrogens, with the net charge."""
    counts = Counter()
    for a in graph.atoms:
        counts[a.element] += 1
        counts["H"] += a.implicit_h
    return Formula(dict(counts), graph.net_charge)


def _digest(*parts) -> int:
    h = hashlib.blake2b(repr(parts).encode(), digest_size=8)
    return int.from_bytes(h.digest(), "little")


def constitution_key(graph: MolecularGraph) -> str:
    """Hash that is identical for isomorphic graphs (stereo ignored).

    Weisfeiler-Lehman colour refinement run to a stable partition; the key is
    the digest of the sorted final colours and coloured edge multiset.
    """
    colours = [_digest(a.element, a.charge, a.is_aromatic, a.implicit_h) for a in graph.atoms]
    n_classes = len(set(colours))
    for _ in range(len(graph.atoms)):
        new = [_digest(colours[i], tuple(sorted((int(o), colours[j]) for j, o in nbrs)))
               for i, nbrs in enumerate(graph.adjacency)]
        new_classes = len(set(new))
        colours = new
        if new_classes == n_classes:
            break
        n_classes = new_classes
    edges = sorted(tuple(sorted((colours[b.begin], colours[b.end]))) + (int(b.order),)
                   for b in graph.bonds)
    return hashlib.sha256(repr((sorted(colours), edges)).encode()).hexdigest()
