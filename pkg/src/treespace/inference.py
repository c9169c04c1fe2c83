"""Resampling harnesses, topology bookkeeping, and the annealing search
for boundary-sitting column weights.

Bootstrap resampling never materializes resampled matrices: a replicate
is a multinomial weight vector over columns, which the weighted distance
estimators consume directly.  That keeps replicates cheap and makes the
identity replicate (all weights 1) a degenerate case of the same code
path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dmatrix import DistanceMatrix
from .errors import DomainError, ValidationError
from .newick import Alignment, Tree
from .splits import SplitSet, splits_to_tree, tree_to_splits
from .geodesic import geodesic_splits
from .treebuild import hamming_matrix, jc69_matrix, neighbor_joining, upgma

__all__ = [
    "estimate_tree",
    "bootstrap_weights",
    "bootstrap_trees",
    "TopologyBins",
    "bin_topologies",
    "shannon_diversity",
    "star_tree",
    "neighborhood_count",
    "loo_trees",
    "nearest_boundary_neighbors",
    "AnnealResult",
    "anneal_to_boundary",
]

_ESTIMATORS = {"nj": neighbor_joining, "upgma": upgma}
_DISTANCES = {"hamming": hamming_matrix, "jc69": jc69_matrix}


def estimate_tree(a: Alignment, estimator: str = "nj",
                  dist: str = "hamming") -> Tree:
    """Distance-based tree estimate honoring the alignment's column weights."""
    try:
        build = _ESTIMATORS[estimator]
        metric = _DISTANCES[dist]
    except KeyError as exc:
        raise DomainError(f"unknown estimator/distance {exc.args[0]!r}") from exc
    return build(metric(a))


def bootstrap_weights(n_sites: int, n_replicates: int, seed: int) -> np.ndarray:
    """Multinomial column-weight vectors, one row per replicate; each row
    sums to n_sites.  Equal in distribution to resampling columns with
    replacement."""
    rng = np.random.default_rng(np.random.SeedSequence((0xB0075, seed)))
    return rng.multinomial(n_sites, np.full(n_sites, 1.0 / n_sites),
                           size=n_replicates)


def bootstrap_trees(a: Alignment, n_replicates: int, estimator: str = "nj",
                    dist: str = "hamming", seed: int = 0) -> list[Tree]:
    """Trees estimated from ``n_replicates`` column resamples."""
    if n_replicates < 1:
        raise DomainError("need at least one replicate")
    weights = bootstrap_weights(a.n_sites, n_replicates, seed)
    out = []
    for b in range(n_replicates):
        try:
            out.append(estimate_tree(a.with_weights(weights[b] * a.column_weights),
                                     estimator, dist))
        except (DomainError, ValidationError) as exc:
            raise DomainError(f"replicate {b}: {exc}") from exc
    return out


@dataclass
class TopologyBins:
    """Branching-order tallies: canonical key = the sorted internal split
    masks, so branch lengths never matter.  Ordered by falling count."""

    labels: tuple[str, ...]
    bins: list[tuple[tuple[int, ...], int]]
    total: int

    def counts(self) -> list[int]:
        return [c for _, c in self.bins]

    def key_string(self, key: tuple[int, ...]) -> str:
        return "|".join(format(m, "x") for m in key)


def bin_topologies(trees: list[Tree]) -> TopologyBins:
    if not trees:
        raise ValidationError("no trees")
    labels = tuple(sorted(trees[0].labels))
    tally: dict[tuple[int, ...], int] = {}
    for t in trees:
        if tuple(sorted(t.labels)) != labels:
            raise ValidationError("trees are over different leaf sets")
        key = tuple(tree_to_splits(t, labels).internal_masks())
        tally[key] = tally.get(key, 0) + 1
    ordered = sorted(tally.items(), key=lambda kv: (-kv[1], kv[0]))
    return TopologyBins(labels, ordered, len(trees))


def shannon_diversity(bins: TopologyBins) -> float:
    """Bias-adjusted Shannon index over topology frequencies:
    -sum p log p - (S-1)/(2N)."""
    n = bins.total
    if n < 1:
        raise ValidationError("empty bins")
    h = -sum((c / n) * math.log(c / n) for c in bins.counts() if c)
    s = len(bins.bins)
    return h - (s - 1) / (2 * n)


def star_tree(t: Tree) -> Tree:
    """Same pendants, no internal structure: the orthant origin at this
    tree's pendant coordinates."""
    labels = tuple(sorted(t.labels))
    s = tree_to_splits(t, labels)
    pend = {m: w for m, w in s.weights.items() if m.bit_count() == 1}
    return splits_to_tree(SplitSet(labels, pend))


def neighborhood_count(r: int) -> int:
    """(2r-3)!!: the number of topologies adjacent to a tree whose r
    contiguous edges shrink to zero."""
    if r < 2:
        raise DomainError("r must be >= 2")
    out = 1
    for f in range(2 * r - 3, 1, -2):
        out *= f
    return out


def loo_trees(a: Alignment, estimator: str = "nj", dist: str = "hamming",
              groups: list[tuple[str, list[int]]] | None = None):
    """Leave-one-out estimates: the full-data tree labeled 'Original',
    then one tree per excluded column group (default: each column is its
    own group).  Exclusion zeroes the group's column weights.

    Data whose variables live on rows should be loaded transposed; the
    estimators treat alignment rows as the leaves.
    """
    if groups is None:
        groups = [(f"col{i}", [i]) for i in range(a.n_sites)]
    if len(groups) < 3:
        raise ValidationError("need at least 3 groups to cross-validate")
    out = [("Original", estimate_tree(a, estimator, dist))]
    for label, cols in groups:
        w = a.column_weights.copy()
        w[list(cols)] = 0
        try:
            out.append((label, estimate_tree(a.with_weights(w), estimator, dist)))
        except (DomainError, ValidationError) as exc:
            raise DomainError(f"excluding {label!r}: {exc}") from exc
    return out


def nearest_boundary_neighbors(t: Tree, candidates: list[Tree]):
    """Candidates one orthant wall away from ``t``.

    Kept when the geodesic makes exactly one transition exchanging one
    split for one split and the trees differ in no other split, i.e.
    the two orthants share a codimension-1 boundary.  Returns
    (tree, distance) pairs, nearest first.
    """
    labels = tuple(sorted(t.labels))
    s_t = tree_to_splits(t, labels)
    out = []
    for cand in candidates:
        if sorted(cand.labels) != list(labels):
            raise ValidationError("candidate over a different leaf set")
        path = geodesic_splits(s_t, tree_to_splits(cand, labels))
        pairs = path.support_pairs()
        solo_free = all(w1 > 0 and w2 > 0 for _, w1, w2 in path.shared_deltas)
        if len(pairs) == 1 and len(pairs[0].a) == 1 and len(pairs[0].b) == 1 \
                and solo_free:
            out.append((cand, path.distance))
    out.sort(key=lambda pair: pair[1])
    return out


@dataclass
class AnnealResult:
    weights: np.ndarray
    tree: Tree
    distance: float
    initial_distance: float
    trace: list[tuple[int, float, float, bool]] = field(repr=False)


def anneal_to_boundary(a: Alignment, target: Tree, estimator: str = "nj",
                       dist: str = "hamming",
                       schedule: tuple[float, float, int] = (1.0, 0.95, 1000),
                       seed: int = 0) -> AnnealResult:
    """Search column weights whose estimate sits as close to ``target``
    as possible.

    Proposals move one unit of weight from a donor column to another
    column, conserving the total.  Downhill moves are always taken;
    uphill moves pass with probability exp(-increment / (T_k * d0))
    where d0 is the starting distance and T_k = T0 * c^k.  The best
    weights seen are returned with the full (iteration, temperature,
    distance, accepted) trace.
    """
    t0, cooling, iters = schedule
    if t0 <= 0 or not 0 < cooling < 1 or iters < 0:
        raise DomainError("schedule must satisfy T0 > 0, 0 < c < 1, iters >= 0")
    if sorted(target.labels) != sorted(a.taxa):
        raise ValidationError("target tree and alignment disagree on taxa")
    rng = np.random.default_rng(np.random.SeedSequence((0xA22EA1, seed)))
    labels = tuple(sorted(a.taxa))
    s_target = tree_to_splits(target, labels)

    def dist_to_target(aln: Alignment) -> tuple[float, Tree]:
        est = estimate_tree(aln, estimator, dist)
        return geodesic_splits(tree_to_splits(est, labels), s_target).distance, est

    weights = a.column_weights.copy()
    d_cur, est_cur = dist_to_target(a)
    best_w, best_d, best_tree = weights.copy(), d_cur, est_cur
    trace: list[tuple[int, float, float, bool]] = [(0, t0, d_cur, True)]
    d0 = d_cur
    if d_cur == 0.0:
        return AnnealResult(best_w, best_tree, best_d, d0, trace)

    p = a.n_sites
    for k in range(1, iters + 1):
        temp = t0 * cooling ** k
        donors = np.flatnonzero(weights > 0)
        donor = int(donors[rng.integers(len(donors))])
        receiver = int(rng.integers(p - 1))
        if receiver >= donor:
            receiver += 1
        weights[donor] -= 1
        weights[receiver] += 1
        d_new, est_new = dist_to_target(a.with_weights(weights))
        delta = d_new - d_cur
        accept = delta < 0 or rng.random() < math.exp(-delta / (temp * d0))
        if accept:
            d_cur, est_cur = d_new, est_new
            if d_new < best_d:
                best_w, best_d, best_tree = weights.copy(), d_new, est_new
        else:
            weights[donor] += 1
            weights[receiver] -= 1
        trace.append((k, temp, d_cur, accept))
        if d_cur == 0.0:
            break
    return AnnealResult(best_w, best_tree, best_d, d0, trace)
