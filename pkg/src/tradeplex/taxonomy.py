"""Layer taxonomy by complete-linkage agglomeration of inter-layer distances.

Clusters are merged by smallest complete-linkage distance; equal heights go
to the pair whose smallest layer codes are lexicographically smallest. The
resulting dendrogram can be cut, turned into cophenetic distances, and
exported as Newick.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .correlation import LayerDistanceMatrix
from .errors import DataError


@dataclass(frozen=True)
class Merge:
    a: int
    b: int
    height: float
    size: int


@dataclass(frozen=True)
class Dendrogram:
    """C leaves and C - 1 merges.

    Leaves are clusters 0..C-1 (in ``leaves`` order); merge ``s`` creates
    cluster C + s.
    """

    leaves: tuple
    merges: tuple

    @property
    def n_leaves(self) -> int:
        return len(self.leaves)

    def members(self) -> dict:
        """Cluster id -> tuple of leaf indices."""
        out = {i: (i,) for i in range(self.n_leaves)}
        for s, m in enumerate(self.merges):
            out[self.n_leaves + s] = out[m.a] + out[m.b]
        return out

    def height(self, cluster: int) -> float:
        return 0.0 if cluster < self.n_leaves else self.merges[cluster - self.n_leaves].height

    def cluster_name(self, cluster: int) -> str:
        return self.leaves[cluster] if cluster < self.n_leaves else f"node{cluster - self.n_leaves + 1}"

    def merge_table(self) -> list[tuple]:
        """(step, cluster_a, cluster_b, height, new_size) rows, step from 1."""
        return [
            (s + 1, self.cluster_name(m.a), self.cluster_name(m.b), m.height, m.size)
            for s, m in enumerate(self.merges)
        ]


def complete_linkage(dist: LayerDistanceMatrix) -> Dendrogram:
    D = np.asarray(dist.entries, dtype=np.float64)
    codes = tuple(dist.codes)
    C = D.shape[0]
    if D.shape != (C, C) or len(codes) != C:
        raise DataError("distance matrix must be square with one code per row")
    bad = [(codes[i], codes[j]) for i, j in zip(*np.nonzero(np.isnan(D))) if i < j]
    if bad:
        raise DataError(f"undefined distances for layer pairs: {bad}")
    if np.any(np.diagonal(D) != 0) or not np.array_equal(D, D.T):
        raise DataError("distance matrix must be symmetric with zero diagonal")
    order = sorted(range(C), key=lambda i: codes[i])
    rank = np.empty(C, dtype=np.int64)
    rank[order] = np.arange(C)
    a, b, h, s = _kernels.complete_linkage_merges(np.ascontiguousarray(D), rank)
    merges = tuple(Merge(int(x), int(y), float(z), int(w)) for x, y, z, w in zip(a, b, h, s))
    return Dendrogram(codes, merges)


def cophenetic(dendro: Dendrogram) -> LayerDistanceMatrix:
    """Height of the lowest common merge for every pair of leaves."""
    C = dendro.n_leaves
    out = np.zeros((C, C))
    mem = dendro.members()
    for s, m in enumerate(dendro.merges):
        ia, ib = np.array(mem[m.a]), np.array(mem[m.b])
        out[np.ix_(ia, ib)] = m.height
        out[np.ix_(ib, ia)] = m.height
    return LayerDistanceMatrix(out, "cophenetic", 0, dendro.leaves)


def cut_tree(dendro: Dendrogram, height: float) -> list[tuple]:
    """Clusters joined by merges at height <= ``height``.

    Each cluster is a tuple of sorted layer codes; clusters are ordered by
    their smallest code.
    """
    if height < 0:
        raise ValueError("cut height must be nonnegative")
    C = dendro.n_leaves
    parent = list(range(C))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    mem = dendro.members()
    for m in dendro.merges:
        if m.height <= height:
            ra, rb = find(mem[m.a][0]), find(mem[m.b][0])
            parent[max(ra, rb)] = min(ra, rb)
    groups = {}
    for i in range(C):
        groups.setdefault(find(i), []).append(dendro.leaves[i])
    return sorted((tuple(sorted(g)) for g in groups.values()), key=lambda g: g[0])


_SPECIAL = re.compile(r"[\s(),:;'\[\]]")


def _label(s: str) -> str:
    return "'" + s.replace("'", "''") + "'" if _SPECIAL.search(s) else s


def _branch(parent_h: float, child_h: float) -> float:
    """Branch length b with fl(b + child_h) == parent_h, so heights rebuilt
    bottom-up from the Newick string reproduce the merge heights exactly."""
    b = parent_h - child_h
    for _ in range(64):
        got = b + child_h
        if got == parent_h:
            return b
        b = math.nextafter(b, math.inf if got < parent_h else -math.inf)
    return parent_h - child_h


def to_newick(dendro: Dendrogram, labels=None) -> str:
    """Newick string with merge heights as node depths.

    Every leaf-to-root path length equals the root height; children appear in
    order of their smallest label.
    """
    labels = tuple(dendro.leaves if labels is None else labels)
    if len(labels) != dendro.n_leaves:
        raise ValueError("one label per leaf required")
    C = dendro.n_leaves
    if C == 0:
        return ";"
    if C == 1:
        return _label(labels[0]) + ";"
    mem = dendro.members()
    smallest = {k: min(labels[i] for i in v) for k, v in mem.items()}
    kids = {C + s: (m.a, m.b) for s, m in enumerate(dendro.merges)}

    def render(k, parent_h):
        h = dendro.height(k)
        bl = repr(_branch(parent_h, h))
        if k < C:
            return f"{_label(labels[k])}:{bl}"
        parts = sorted(kids[k], key=lambda c: smallest[c])
        inner = ",".join(render(c, h) for c in parts)
        return f"({inner}):{bl}"

    root = C + len(dendro.merges) - 1
    rh = dendro.height(root)
    parts = sorted(kids[root], key=lambda c: smallest[c])
    return "(" + ",".join(render(c, rh) for c in parts) + ");"


_TOKEN = re.compile(r"\s*('(?:[^']|'')*'|[(),:;]|[^\s(),:;]+)")


def parse_newick(text: str):
    """Parse a Newick string into nested ``(label, length, children)`` tuples."""
    toks = [m for m in _TOKEN.findall(text)]
    pos = 0

    def peek():
        return toks[pos] if pos < len(toks) else None

    def take():
        nonlocal pos
        t = toks[pos]
        pos += 1
        return t

    def node():
        children = []
        if peek() == "(":
            take()
            children.append(node())
            while peek() == ",":
                take()
                children.append(node())
            if take() != ")":
                raise ValueError("unbalanced parentheses in Newick string")
        label = ""
        if peek() not in (None, ":", ",", ")", ";", "("):
            label = take()
            if label.startswith("'"):
                label = label[1:-1].replace("''", "'")
        length = None
        if peek() == ":":
            take()
            length = float(take())
        return (label, length, tuple(children))

    tree = node()
    if peek() != ";":
        raise ValueError("Newick string must end with ';'")
    return tree


def newick_cophenetic(text: str, codes) -> np.ndarray:
    """Cophenetic matrix (rows in ``codes`` order) read back from Newick.

    Node heights are rebuilt bottom-up as branch length plus child height.
    """
    tree = parse_newick(text)
    index = {c: i for i, c in enumerate(codes)}
    out = np.zeros((len(codes), len(codes)))

    def walk(t):
        label, _, children = t
        if not children:
            return 0.0, [index[label]]
        hs, leaves = [], []
        for ch in children:
            h, lv = walk(ch)
            hs.append(ch[1] + h)
            leaves.append(lv)
        height = hs[0]
        for x in range(len(leaves)):
            for y in range(x + 1, len(leaves)):
                ia, ib = np.array(leaves[x]), np.array(leaves[y])
                out[np.ix_(ia, ib)] = height
                out[np.ix_(ib, ia)] = height
        return height, [i for lv in leaves for i in lv]

    walk(tree)
    return out
