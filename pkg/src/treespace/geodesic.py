"""Geodesic distance between trees in the orthant complex of tree space.

Every tree topology owns a Euclidean orthant whose coordinates are its
split weights; orthants glue along shared faces, the whole complex is
CAT(0), and any two trees are joined by a unique geodesic.  We find it
with the Owen-Provan iterative scheme:

* shared splits (same mask in both trees) never enter a transition, so
  they contribute a plain Euclidean difference per coordinate;
* the remaining splits decompose into independent bins under their
  tightest shared edge;
* a unique split that conflicts with nothing on the other side of its
  bin shrinks (or grows) linearly over the whole path, i.e. behaves as a
  shared coordinate whose weight on the other side is zero;
* for the rest, each bin starts from the cone path (drop everything,
  then add everything) and support pairs are repeatedly split while a
  min-weight vertex cover of the pair's incompatibility graph weighs
  less than 1.  The cover is found with Edmonds-Karp max-flow on the
  bipartite graph whose vertex weights are the normalized squared split
  weights.

With support pairs (A_i, B_i), ratios ||A_i||/||B_i|| nondecreasing, the
squared distance is

    sum_i (||A_i|| + ||B_i||)**2  +  sum_shared (w - w')**2.

When a cover of weight < 1 exists, the residual-graph reachability after
the max-flow yields it: with R the set of vertices reachable from the
source, the cover is (A \\ R) | (B & R), and the pair splits into
(A \\ R, B \\ R) followed by (A & R, B & R), which keeps both path
validity conditions intact.
"""

from __future__ import annotations

import math
import os
from collections import deque
from dataclasses import dataclass

import numpy as np

from .dmatrix import DistanceMatrix
from .errors import DomainError, ValidationError
from .newick import Tree
from .splits import (Split, SplitSet, masks_compatible, partition_into_bins,
                     splits_to_tree, tree_to_splits)

__all__ = [
    "SupportPair",
    "GeodesicPath",
    "IncompatibilityGraph",
    "min_weight_cover",
    "cone_path",
    "geodesic",
    "geodesic_distance",
    "distance_matrix",
    "point_on_path",
    "boundary_trees",
]

# A support pair whose max-flow reaches this value cannot be improved.
# The slack keeps floating-point flows that are exactly 1 in exact
# arithmetic from triggering spurious splits.
FLOW_DONE = 1.0 - 1e-10
_EPS = 1e-14  # residual capacities at or below this count as absent


@dataclass
class SupportPair:
    """Splits dropped (a) and added (b) at one orthant transition."""

    a: list[Split]
    b: list[Split]

    @property
    def norm_a(self) -> float:
        return math.sqrt(sum(s.weight * s.weight for s in self.a))

    @property
    def norm_b(self) -> float:
        return math.sqrt(sum(s.weight * s.weight for s in self.b))

    @property
    def ratio(self) -> float:
        return self.norm_a / self.norm_b

    @property
    def transition(self) -> float:
        """Fraction of the whole path at which this pair's swap happens."""
        na, nb = self.norm_a, self.norm_b
        return na / (na + nb)


@dataclass
class GeodesicPath:
    """A geodesic, as per-bin support-pair sequences plus shared deltas.

    ``shared_deltas`` rows are (mask, weight in T, weight in T'); rows
    with a zero on one side are unique splits that conflict with nothing
    and therefore change linearly along the entire path.  ``bins`` maps
    the anchor mask of each subproblem to its ordered support pairs.
    """

    labels: tuple[str, ...]
    bins: list[tuple[int, list[SupportPair]]]
    shared_deltas: list[tuple[int, float, float]]
    distance: float
    splits_performed: int = 0

    def support_pairs(self) -> list[SupportPair]:
        return [p for _, pairs in self.bins for p in pairs]

    def n_transitions(self) -> int:
        return len(self.support_pairs())


# ---------------------------------------------------------------------------
# Edmonds-Karp max-flow on the source/sink augmentation of a bipartite
# incompatibility graph.  Two interchangeable implementations: a plain
# Python one (the reference) and a numba-compiled one used when
# available, selected at import time.  Both follow the identical
# augmenting order, so they produce bit-identical flows.
# ---------------------------------------------------------------------------


def _maxflow_py(wa, wb, adj, early_stop):
    """Max-flow; returns (flow, reach_a, reach_b).

    ``adj[i][j]`` is True where left i conflicts with right j (infinite
    capacity, represented as 2.0 since each side's weights sum to 1).
    Reachability lists are meaningful only when flow < FLOW_DONE; with
    ``early_stop`` the search quits as soon as the pair is certified.
    """
    na, nb = len(wa), len(wb)
    ra = [float(w) for w in wa]
    rb = [float(w) for w in wb]
    rab = [[2.0 if adj[i][j] else 0.0 for j in range(nb)] for i in range(na)]
    rba = [[0.0] * na for _ in range(nb)]
    flow = 0.0
    while True:
        if early_stop and flow >= FLOW_DONE:
            return flow, None, None
        parent = [-2] * (na + nb)
        queue = deque()
        for i in range(na):
            if ra[i] > _EPS:
                parent[i] = -1
                queue.append(i)
        hit = -1
        while queue:
            v = queue.popleft()
            if v < na:
                row = rab[v]
                for j in range(nb):
                    if parent[na + j] == -2 and row[j] > _EPS:
                        parent[na + j] = v
                        if rb[j] > _EPS:
                            hit = j
                            break
                        queue.append(na + j)
                if hit >= 0:
                    break
            else:
                row = rba[v - na]
                for i in range(na):
                    if parent[i] == -2 and row[i] > _EPS:
                        parent[i] = v
                        queue.append(i)
        if hit < 0:
            reach_a = [parent[i] != -2 for i in range(na)]
            reach_b = [parent[na + j] != -2 for j in range(nb)]
            return flow, reach_a, reach_b
        # bottleneck along s -> ... -> b_hit -> t
        bott = rb[hit]
        v = na + hit
        while parent[v] != -1:
            p = parent[v]
            if v >= na:
                bott = min(bott, rab[p][v - na])
            else:
                bott = min(bott, rba[p - na][v])
            v = p
        bott = min(bott, ra[v])
        rb[hit] -= bott
        v = na + hit
        while parent[v] != -1:
            p = parent[v]
            if v >= na:
                rab[p][v - na] -= bott
                rba[v - na][p] += bott
            else:
                rba[p - na][v] -= bott
                rab[v][p - na] += bott
            v = p
        ra[v] -= bott
        flow += bott


def _build_numba():
    from numba import njit

    @njit(cache=True)
    def _maxflow_nb(wa, wb, adj, early_stop):  # pragma: no cover - compiled
        na = wa.shape[0]
        nb = wb.shape[0]
        ra = wa.copy()
        rb = wb.copy()
        rab = np.zeros((na, nb))
        for i in range(na):
            for j in range(nb):
                if adj[i, j]:
                    rab[i, j] = 2.0
        rba = np.zeros((nb, na))
        parent = np.empty(na + nb, dtype=np.int64)
        queue = np.empty(na + nb, dtype=np.int64)
        reach_a = np.zeros(na, dtype=np.bool_)
        reach_b = np.zeros(nb, dtype=np.bool_)
        flow = 0.0
        while True:
            if early_stop and flow >= FLOW_DONE:
                return flow, reach_a, reach_b, True
            for k in range(na + nb):
                parent[k] = -2
            head = 0
            tail = 0
            for i in range(na):
                if ra[i] > _EPS:
                    parent[i] = -1
                    queue[tail] = i
                    tail += 1
            hit = -1
            while head < tail and hit < 0:
                v = queue[head]
                head += 1
                if v < na:
                    for j in range(nb):
                        if parent[na + j] == -2 and rab[v, j] > _EPS:
                            parent[na + j] = v
                            if rb[j] > _EPS:
                                hit = j
                                break
                            queue[tail] = na + j
                            tail += 1
                else:
                    for i in range(na):
                        if parent[i] == -2 and rba[v - na, i] > _EPS:
                            parent[i] = v
                            queue[tail] = i
                            tail += 1
            if hit < 0:
                for i in range(na):
                    reach_a[i] = parent[i] != -2
                for j in range(nb):
                    reach_b[j] = parent[na + j] != -2
                return flow, reach_a, reach_b, False
            bott = rb[hit]
            v = na + hit
            while parent[v] != -1:
                p = parent[v]
                if v >= na:
                    if rab[p, v - na] < bott:
                        bott = rab[p, v - na]
                else:
                    if rba[p - na, v] < bott:
                        bott = rba[p - na, v]
                v = p
            if ra[v] < bott:
                bott = ra[v]
            rb[hit] -= bott
            v = na + hit
            while parent[v] != -1:
                p = parent[v]
                if v >= na:
                    rab[p, v - na] -= bott
                    rba[v - na, p] += bott
                else:
                    rba[p - na, v] -= bott
                    rab[v, p - na] += bott
                v = p
            ra[v] -= bott
            flow += bott

    return _maxflow_nb


_NUMBA_FLOW = None
if not os.environ.get("TREESPACE_NO_NUMBA"):
    try:
        _NUMBA_FLOW = _build_numba()
    except ImportError:  # numba not installed: pure-python fallback
        _NUMBA_FLOW = None


def _maxflow(wa, wb, adj, early_stop):
    """Dispatch to the compiled kernel when present."""
    if _NUMBA_FLOW is not None:
        wa_arr = np.asarray(wa, dtype=np.float64)
        wb_arr = np.asarray(wb, dtype=np.float64)
        adj_arr = np.asarray(adj, dtype=np.bool_)
        flow, reach_a, reach_b, certified = _NUMBA_FLOW(
            wa_arr, wb_arr, adj_arr, early_stop)
        if certified:
            return flow, None, None
        return flow, list(reach_a), list(reach_b)
    return _maxflow_py(wa, wb, adj, early_stop)


@dataclass
class IncompatibilityGraph:
    """Bipartite conflict graph of one support pair.

    Vertex weights are |v|^2 / ||side||^2, so each side sums to 1 and
    the flow threshold is scale-free.
    """

    left: list[Split]
    right: list[Split]
    left_weights: list[float]
    right_weights: list[float]
    edges: list[tuple[int, int]]

    @classmethod
    def from_splits(cls, a: list[Split], b: list[Split]) -> "IncompatibilityGraph":
        a = sorted(a, key=lambda s: s.mask)
        b = sorted(b, key=lambda s: s.mask)
        sa = sum(s.weight ** 2 for s in a)
        sb = sum(s.weight ** 2 for s in b)
        if sa <= 0 or sb <= 0:
            raise ValidationError("support pair sides must have positive norm")
        wa = [s.weight ** 2 / sa for s in a]
        wb = [s.weight ** 2 / sb for s in b]
        edges = [(i, j) for i, s in enumerate(a) for j, t in enumerate(b)
                 if not masks_compatible(s.mask, t.mask)]
        return cls(a, b, wa, wb, edges)

    def adjacency(self):
        adj = [[False] * len(self.right) for _ in self.left]
        for i, j in self.edges:
            adj[i][j] = True
        return adj


def min_weight_cover(g: IncompatibilityGraph):
    """Max-flow value plus the residual-reachable vertex sets.

    Returns (flow, C1, D1) with C1 the left and D1 the right vertices
    reachable from the source once the flow is maximal; the min-weight
    vertex cover is then (left - C1) | D1 and weighs exactly ``flow``.
    """
    flow, reach_a, reach_b = _maxflow(g.left_weights, g.right_weights,
                                      g.adjacency(), early_stop=False)
    c1 = {s for s, r in zip(g.left, reach_a) if r}
    d1 = {s for s, r in zip(g.right, reach_b) if r}
    return flow, c1, d1


# ---------------------------------------------------------------------------
# Core distance computation on split sets.
# ---------------------------------------------------------------------------


def _refine(a_items, b_items, incompat):
    """Recursively split one support pair until certified.

    ``a_items``/``b_items`` are (mask, weight) lists, every vertex owning
    at least one conflict inside the pair.  Returns (ordered pair list,
    number of splits performed).
    """
    sa = sum(w * w for _, w in a_items)
    sb = sum(w * w for _, w in b_items)
    wa = [w * w / sa for _, w in a_items]
    wb = [w * w / sb for _, w in b_items]
    adj = [[(ma, mb) in incompat for mb, _ in b_items] for ma, _ in a_items]
    flow, reach_a, reach_b = _maxflow(wa, wb, adj, early_stop=True)
    if reach_a is None or flow >= FLOW_DONE:
        return [(a_items, b_items)], 0
    a_stay = [it for it, r in zip(a_items, reach_a) if not r]
    b_stay = [it for it, r in zip(b_items, reach_b) if not r]
    a_move = [it for it, r in zip(a_items, reach_a) if r]
    b_move = [it for it, r in zip(b_items, reach_b) if r]
    # a cover lighter than one whole side leaves all four parts nonempty
    assert a_stay and b_stay and a_move and b_move
    first, n1 = _refine(a_stay, b_stay, incompat)
    second, n2 = _refine(a_move, b_move, incompat)
    return first + second, 1 + n1 + n2


def _prepare(s1: SplitSet, s2: SplitSet):
    """Shared deltas (incl. conflict-free uniques at zero) and the
    per-bin conflict subproblems."""
    if s1.labels != s2.labels:
        raise ValidationError("trees share no common universe")
    w1 = {m: w for m, w in s1.weights.items() if w > 0 or m.bit_count() == 1}
    w2 = {m: w for m, w in s2.weights.items() if w > 0 or m.bit_count() == 1}
    fs1 = SplitSet(s1.labels, w1)
    fs2 = SplitSet(s2.labels, w2)
    deltas: list[tuple[int, float, float]] = []
    for m in sorted(w1):
        if m in w2:
            deltas.append((m, w1[m], w2[m]))
    bins = partition_into_bins(fs1, fs2)

    problems = []  # (anchor, a_items, b_items, incompat set)
    for bn in bins:
        a_items = sorted(bn.unique_a)
        b_items = sorted(bn.unique_b)
        incompat = {(ma, mb) for ma, _ in a_items for mb, _ in b_items
                    if not masks_compatible(ma, mb)}
        a_conf = [it for it in a_items if any((it[0], mb) in incompat for mb, _ in b_items)]
        b_conf = [it for it in b_items if any((ma, it[0]) in incompat for ma, _ in a_items)]
        for m, w in a_items:
            if (m, w) not in a_conf:
                deltas.append((m, w, 0.0))
        for m, w in b_items:
            if (m, w) not in b_conf:
                deltas.append((m, 0.0, w))
        if a_conf and b_conf:
            problems.append((bn.anchor, a_conf, b_conf, incompat))
    deltas.sort()
    return deltas, problems


def _assemble(labels, deltas, bin_pairs, nsplits):
    dist_sq = sum((x - y) ** 2 for _, x, y in deltas)
    bins_out = []
    for anchor, pairs in bin_pairs:
        sps = []
        for a_items, b_items in pairs:
            sp = SupportPair(
                [Split(m, w, labels) for m, w in a_items],
                [Split(m, w, labels) for m, w in b_items])
            dist_sq += (sp.norm_a + sp.norm_b) ** 2
            sps.append(sp)
        bins_out.append((anchor, sps))
    path = GeodesicPath(labels, bins_out, deltas, math.sqrt(dist_sq), nsplits)
    assert _valid_path(path)
    return path


def _valid_path(path: GeodesicPath) -> bool:
    """Support-sequence validity: nondecreasing ratios per bin, and
    later drops compatible with earlier additions."""
    for _, pairs in path.bins:
        for k in range(len(pairs) - 1):
            r0, r1 = pairs[k].ratio, pairs[k + 1].ratio
            if r0 > r1 * (1.0 + 1e-9) + 1e-12:
                return False
        for i in range(1, len(pairs)):
            for j in range(i):
                for s in pairs[i].a:
                    for t in pairs[j].b:
                        if not masks_compatible(s.mask, t.mask):
                            return False
    return True


def geodesic_splits(s1: SplitSet, s2: SplitSet) -> GeodesicPath:
    deltas, problems = _prepare(s1, s2)
    bin_pairs = []
    nsplits = 0
    for anchor, a_conf, b_conf, incompat in problems:
        pairs, n = _refine(a_conf, b_conf, incompat)
        nsplits += n
        bin_pairs.append((anchor, pairs))
    return _assemble(s1.labels, deltas, bin_pairs, nsplits)


def cone_path_splits(s1: SplitSet, s2: SplitSet) -> GeodesicPath:
    deltas, problems = _prepare(s1, s2)
    bin_pairs = [(anchor, [(a_conf, b_conf)])
                 for anchor, a_conf, b_conf, _ in problems]
    return _assemble(s1.labels, deltas, bin_pairs, 0)


def _check_same_leaves(t1: Tree, t2: Tree):
    if sorted(t1.labels) != sorted(t2.labels):
        raise ValidationError("trees are over different leaf sets")


def geodesic(t1: Tree, t2: Tree) -> GeodesicPath:
    """The unique geodesic between two trees on one leaf set.

    Returns the full path structure; its ``distance`` attribute is the
    tree distance.  Worst case O(n^4) in the leaf count.
    """
    _check_same_leaves(t1, t2)
    labels = tuple(sorted(t1.labels))
    return geodesic_splits(tree_to_splits(t1, labels), tree_to_splits(t2, labels))


def cone_path(t1: Tree, t2: Tree) -> GeodesicPath:
    """The two-segment path through each bin's origin; always valid,
    an upper bound for the geodesic."""
    _check_same_leaves(t1, t2)
    labels = tuple(sorted(t1.labels))
    return cone_path_splits(tree_to_splits(t1, labels), tree_to_splits(t2, labels))


def geodesic_distance(t1: Tree, t2: Tree) -> float:
    return geodesic(t1, t2).distance


# ---------------------------------------------------------------------------
# All-pairs distances, optionally across a process pool.
# ---------------------------------------------------------------------------

_WORKER_SETS: list[SplitSet] = []


def _pool_init(splitsets):
    global _WORKER_SETS
    _WORKER_SETS = splitsets


def _pool_task(chunk):
    out = []
    for i, j in chunk:
        deltas, problems = _prepare(_WORKER_SETS[i], _WORKER_SETS[j])
        d_sq = sum((x - y) ** 2 for _, x, y in deltas)
        for _, a_conf, b_conf, incompat in problems:
            pairs, _ = _refine(a_conf, b_conf, incompat)
            for a_items, b_items in pairs:
                na = math.sqrt(sum(w * w for _, w in a_items))
                nb = math.sqrt(sum(w * w for _, w in b_items))
                d_sq += (na + nb) ** 2
        out.append((i, j, math.sqrt(d_sq)))
    return out


def distance_matrix(trees, names=None, jobs: int = 1) -> DistanceMatrix:
    """Symmetric matrix of pairwise geodesic distances.

    Pairs are independent; with jobs > 1 they are distributed over a
    process pool.  The result does not depend on the worker count.
    """
    trees = list(trees)
    if names is None:
        names = [f"tree{i + 1}" for i in range(len(trees))]
    if len(names) != len(trees):
        raise ValidationError("one name per tree required")
    if not trees:
        raise ValidationError("no trees given")
    base = sorted(trees[0].labels)
    for t in trees[1:]:
        if sorted(t.labels) != base:
            raise ValidationError("all trees must share one leaf set")
    labels = tuple(base)
    ssets = [tree_to_splits(t, labels) for t in trees]
    n = len(trees)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    d = np.zeros((n, n))
    if jobs > 1 and len(pairs) > 1:
        from concurrent.futures import ProcessPoolExecutor

        chunk_size = max(1, len(pairs) // (jobs * 8))
        chunks = [pairs[k:k + chunk_size] for k in range(0, len(pairs), chunk_size)]
        with ProcessPoolExecutor(max_workers=jobs, initializer=_pool_init,
                                 initargs=(ssets,)) as pool:
            for res in pool.map(_pool_task, chunks):
                for i, j, dist in res:
                    d[i, j] = d[j, i] = dist
    else:
        _pool_init(ssets)
        for i, j, dist in _pool_task(pairs):
            d[i, j] = d[j, i] = dist
    return DistanceMatrix(list(names), d)


# ---------------------------------------------------------------------------
# Points along a geodesic and the orthant-boundary trees it crosses.
# ---------------------------------------------------------------------------


def _weights_at(path: GeodesicPath, t: float) -> dict[int, float]:
    weights: dict[int, float] = {}
    for mask, w1, w2 in path.shared_deltas:
        w = (1.0 - t) * w1 + t * w2
        if w > 0 or mask.bit_count() == 1:
            weights[mask] = w
    for _, pairs in path.bins:
        for pair in pairs:
            tau = pair.transition
            if t < tau:
                scale = (tau - t) / tau
                for s in pair.a:
                    weights[s.mask] = s.weight * scale
            elif t > tau:
                scale = (t - tau) / (1.0 - tau)
                for s in pair.b:
                    weights[s.mask] = s.weight * scale
    return weights


def point_on_path(path: GeodesicPath, t: float) -> Tree:
    """The tree at fraction ``t`` of the geodesic's length.

    Satisfies d(T, P(t)) = t * d(T, T') and the complement on the other
    side; P(0) and P(1) are the endpoints themselves.
    """
    if not 0.0 <= t <= 1.0:
        raise DomainError(f"path parameter {t} outside [0, 1]")
    return splits_to_tree(SplitSet(path.labels, _weights_at(path, t)))


def boundary_trees(path: GeodesicPath) -> list[Tree]:
    """One tree per orthant transition, in path order.

    At a transition the exchanged splits are exactly the coordinates
    that vanish, so the returned trees carry a multifurcation there.
    Pairs transitioning at the same fraction collapse into one tree.
    """
    taus = sorted({round(p.transition, 12) for p in path.support_pairs()})
    return [point_on_path(path, t) for t in taus]
