"""Distance-based tree estimation and hierarchical clustering.

Neighbor joining and UPGMA take a DistanceMatrix and return a rooted
Tree; single linkage returns a Dendrogram (the tree-of-trees view of a
matrix of tree distances).  All tie-breaks are lexicographic in the
smallest contained leaf label, so reruns and bootstrap replicates are
reproducible.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .dmatrix import DistanceMatrix
from .errors import DomainError, ValidationError
from .newick import Alignment, Node, Tree, _min_leaf

__all__ = [
    "hamming_matrix",
    "jc69_matrix",
    "neighbor_joining",
    "upgma",
    "single_linkage",
    "cut_dendrogram",
    "Dendrogram",
]


def _pairwise_mismatch(a: Alignment) -> np.ndarray:
    """Weighted mismatch proportion for every taxon pair."""
    if a.n_taxa < 2:
        raise ValidationError("need at least 2 taxa")
    w = a.column_weights.astype(float)
    total = w.sum()
    if total <= 0:
        raise DomainError("all column weights are zero")
    n = a.n_taxa
    p = np.zeros((n, n))
    for i in range(n):
        neq = a.data[i] != a.data[i + 1:]
        if neq.size:
            p[i, i + 1:] = neq @ w / total
    return p + p.T


def hamming_matrix(a: Alignment) -> DistanceMatrix:
    """Proportion of (weighted) columns at which two rows differ."""
    return DistanceMatrix(a.taxa, _pairwise_mismatch(a))


def jc69_matrix(a: Alignment) -> DistanceMatrix:
    """Jukes-Cantor distance -3/4 log(1 - 4p/3) from mismatch p."""
    if a.alphabet != "acgt":
        raise DomainError("JC69 requires the DNA alphabet")
    p = _pairwise_mismatch(a)
    sat = p >= 0.75
    np.fill_diagonal(sat, False)
    if sat.any():
        i, j = np.argwhere(sat)[0]
        raise DomainError(f"JC69 saturated: mismatch {p[i, j]:.3f} >= 3/4 "
                          f"between {a.taxa[i]!r} and {a.taxa[j]!r}")
    d = -0.75 * np.log1p(-4.0 * p / 3.0)
    np.fill_diagonal(d, 0.0)
    return DistanceMatrix(a.taxa, 0.5 * (d + d.T))


def _ordered(nodes: list[Node]) -> list[Node]:
    return sorted(nodes, key=_min_leaf)


def neighbor_joining(dm: DistanceMatrix) -> Tree:
    """Saitou-Nei agglomeration with the usual Q criterion.

    The unrooted result is hung by placing the root at the midpoint of
    the final join; negative branch-length estimates clamp to zero with
    a warning.  Ties in Q pick the lexicographically first pair.
    """
    if len(dm) < 3:
        raise ValidationError("neighbor joining needs at least 3 items")
    nodes = _ordered([Node(lab) for lab in dm.labels])
    index = {lab: i for i, lab in enumerate(dm.labels)}
    d = dm.values[np.ix_([index[_min_leaf(n)] for n in nodes],
                         [index[_min_leaf(n)] for n in nodes])].astype(float)
    clamped = False
    while len(nodes) > 2:
        m = len(nodes)
        r = d.sum(axis=0) / (m - 2)
        q = d - np.add.outer(r, r)
        np.fill_diagonal(q, np.inf)
        i, j = divmod(int(np.argmin(q)), m)
        if i > j:
            i, j = j, i
        li = 0.5 * d[i, j] + 0.5 * (r[i] - r[j])
        lj = d[i, j] - li
        if li < 0 or lj < 0:
            clamped = True
            li, lj = max(li, 0.0), max(lj, 0.0)
        merged = Node(None, None, _ordered([nodes[i], nodes[j]]))
        nodes[i].length, nodes[j].length = li, lj
        dnew = 0.5 * (d[i] + d[j] - d[i, j])
        keep = [k for k in range(m) if k not in (i, j)]
        d = np.vstack([d[keep][:, keep],
                       dnew[keep][None, :]])
        d = np.hstack([d, np.append(dnew[keep], 0.0)[:, None]])
        nodes = [nodes[k] for k in keep] + [merged]
        order = sorted(range(len(nodes)), key=lambda k: _min_leaf(nodes[k]))
        nodes = [nodes[k] for k in order]
        d = d[np.ix_(order, order)]
    # root at the midpoint of the last edge
    half = 0.5 * max(d[0, 1], 0.0)
    if d[0, 1] < 0:
        clamped = True
    nodes[0].length = nodes[1].length = half
    if clamped:
        warnings.warn("negative branch-length estimates clamped to 0",
                      stacklevel=2)
    return Tree(Node(None, None, _ordered(nodes)))


def upgma(dm: DistanceMatrix) -> Tree:
    """Average-linkage agglomeration; rooted, ultrametric, with merge
    heights of half the mean inter-cluster distance."""
    if len(dm) < 2:
        raise ValidationError("need at least 2 items")
    nodes = _ordered([Node(lab) for lab in dm.labels])
    index = {lab: i for i, lab in enumerate(dm.labels)}
    d = dm.values[np.ix_([index[_min_leaf(n)] for n in nodes],
                         [index[_min_leaf(n)] for n in nodes])].astype(float)
    sizes = [1] * len(nodes)
    heights = [0.0] * len(nodes)
    while len(nodes) > 1:
        m = len(nodes)
        dd = d.copy()
        np.fill_diagonal(dd, np.inf)
        i, j = divmod(int(np.argmin(dd)), m)
        if i > j:
            i, j = j, i
        h = 0.5 * d[i, j]
        for k in (i, j):
            nodes[k].length = h - heights[k]
        merged = Node(None, None, _ordered([nodes[i], nodes[j]]))
        si, sj = sizes[i], sizes[j]
        dnew = (si * d[i] + sj * d[j]) / (si + sj)
        keep = [k for k in range(m) if k not in (i, j)]
        d = np.vstack([d[keep][:, keep], dnew[keep][None, :]])
        d = np.hstack([d, np.append(dnew[keep], 0.0)[:, None]])
        nodes = [nodes[k] for k in keep] + [merged]
        sizes = [sizes[k] for k in keep] + [si + sj]
        heights = [heights[k] for k in keep] + [h]
        order = sorted(range(len(nodes)), key=lambda k: _min_leaf(nodes[k]))
        nodes = [nodes[k] for k in order]
        sizes = [sizes[k] for k in order]
        heights = [heights[k] for k in order]
        d = d[np.ix_(order, order)]
    root = nodes[0]
    root.length = None
    return Tree(root)


@dataclass
class Dendrogram:
    """Merge list (cluster_a, cluster_b, height) over n leaves.

    Clusters 0..n-1 are the leaves in label order; merge k creates
    cluster n+k.  Heights are nondecreasing for single linkage.
    """

    labels: list[str]
    merges: list[tuple[int, int, float]]

    def n_leaves(self) -> int:
        return len(self.labels)

    def to_newick(self) -> str:
        from .newick import write_newick

        n = len(self.labels)
        nodes = {i: (Node(lab), 0.0) for i, lab in enumerate(self.labels)}
        for k, (ca, cb, h) in enumerate(self.merges):
            (na, ha), (nb, hb) = nodes.pop(ca), nodes.pop(cb)
            na.length = h - ha
            nb.length = h - hb
            nodes[n + k] = (Node(None, None, [na, nb]), h)
        (root, _), = nodes.values()
        return write_newick(Tree(root))


def single_linkage(dm: DistanceMatrix) -> Dendrogram:
    """Minimum-distance agglomeration; heights are the joined distance
    itself (the minimum-spanning-tree edge weights)."""
    if len(dm) < 2:
        raise ValidationError("need at least 2 items")
    n = len(dm)
    d = dm.values.astype(float).copy()
    ids = list(range(n))  # cluster id at each matrix position
    merges = []
    for step in range(n - 1):
        m = len(ids)
        dd = d.copy()
        np.fill_diagonal(dd, np.inf)
        i, j = divmod(int(np.argmin(dd)), m)
        if i > j:
            i, j = j, i
        merges.append((ids[i], ids[j], float(d[i, j])))
        dnew = np.minimum(d[i], d[j])
        keep = [k for k in range(m) if k not in (i, j)]
        d = np.vstack([d[keep][:, keep], dnew[keep][None, :]])
        d = np.hstack([d, np.append(dnew[keep], 0.0)[:, None]])
        ids = [ids[k] for k in keep] + [n + step]
    return Dendrogram(list(dm.labels), merges)


def cut_dendrogram(dendro: Dendrogram, k: int) -> list[int]:
    """Cluster assignment (0..k-1, ordered by first member) obtained by
    undoing the k-1 highest merges.

    Merge heights are nondecreasing in creation order for single
    linkage, so the k-1 highest are the last k-1 created.
    """
    n = dendro.n_leaves()
    if not 1 <= k <= n:
        raise DomainError(f"k must be in [1, {n}]")
    parent = list(range(n + len(dendro.merges)))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for t in range(len(dendro.merges) - (k - 1)):
        ca, cb, _ = dendro.merges[t]
        parent[find(ca)] = parent[find(cb)] = n + t
    roots: dict[int, int] = {}
    out = []
    for i in range(n):
        r = find(i)
        out.append(roots.setdefault(r, len(roots)))
    return out
