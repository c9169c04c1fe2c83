"""Shared helpers: tree fixtures, additive matrices, handcrafted pairs."""

from __future__ import annotations

import numpy as np
import pytest

from treespace.dmatrix import DistanceMatrix
from treespace.newick import Tree, parse_newick
from treespace.simulate import random_tree
from treespace.splits import SplitSet, tree_to_splits


def additive_matrix(tree: Tree) -> DistanceMatrix:
    """Patristic distances of a tree as a DistanceMatrix."""
    labs = sorted(tree.labels)
    pl = tree.leaf_path_lengths()
    n = len(labs)
    d = np.zeros((n, n))
    for i, a in enumerate(labs):
        for j in range(i + 1, n):
            d[i, j] = d[j, i] = pl[(a, labs[j]) if a < labs[j] else (labs[j], a)]
    return DistanceMatrix(labs, d)


def unrooted_bipartitions(tree: Tree) -> set[frozenset[frozenset[str]]]:
    """Internal splits as unordered leaf bipartitions (root-insensitive)."""
    labs = tuple(sorted(tree.labels))
    s = tree_to_splits(tree, labs)
    out = set()
    for m in s.internal_masks():
        below = frozenset(lab for i, lab in enumerate(labs) if m >> i & 1)
        above = frozenset(set(labs) - below)
        if len(below) > 1 and len(above) > 1:
            out.add(frozenset((below, above)))
    return out


def random_pair(n: int, seed: int) -> tuple[SplitSet, SplitSet]:
    t1 = random_tree(n, seed)
    t2 = random_tree(n, seed + 10_000_019)
    labels = tuple(sorted(t1.labels))
    return tree_to_splits(t1, labels), tree_to_splits(t2, labels)


def reweighted(s: SplitSet, seed: int) -> SplitSet:
    rng = np.random.default_rng(seed)
    return SplitSet(s.labels, {m: float(rng.exponential(1.0))
                               for m in s.weights})


def _nni_swap(s: SplitSet, seed: int) -> SplitSet:
    """Replace one internal split by an incompatible one compatible with
    everything else, if possible; else return a reweighted copy."""
    from treespace.splits import masks_compatible

    rng = np.random.default_rng(seed)
    internals = s.internal_masks()
    rng.shuffle(internals)
    n = s.n_leaves()
    for m in internals:
        others = [x for x in s.weights if x != m]
        # candidate: move one leaf of m out, one leaf outside in
        inside = [i for i in range(n) if m >> i & 1]
        outside = [i for i in range(n) if not m >> i & 1]
        rng.shuffle(inside)
        rng.shuffle(outside)
        for drop in inside:
            for add in outside:
                cand = (m & ~(1 << drop)) | (1 << add)
                if cand.bit_count() < 2 or cand in s.weights:
                    continue
                if masks_compatible(cand, m):
                    continue
                if all(masks_compatible(cand, x) for x in others):
                    w = dict(s.weights)
                    del w[m]
                    w[cand] = float(rng.exponential(1.0))
                    return SplitSet(s.labels, w)
    return reweighted(s, seed)


def handcrafted_pairs() -> list[tuple[SplitSet, SplitSet]]:
    """100 deterministic small pairs with <= 3 unique splits per side:
    identical trees, weight perturbations, single and double NNI moves,
    star-vs-resolved, multifurcations, two-bin grafts, scale extremes."""
    pairs: list[tuple[SplitSet, SplitSet]] = []
    rng = np.random.default_rng(20240817)

    def drop_internals(s: SplitSet, keep: int, seed: int) -> SplitSet:
        r = np.random.default_rng(seed)
        internals = s.internal_masks()
        r.shuffle(internals)
        w = {m: wt for m, wt in s.weights.items()
             if m.bit_count() == 1 or m in internals[:keep]}
        return SplitSet(s.labels, w)

    # identical and weight-perturbed (20)
    for k in range(10):
        t = random_tree(int(rng.integers(4, 7)), 300 + k)
        s = tree_to_splits(t, tuple(sorted(t.labels)))
        pairs.append((s, s))
        pairs.append((s, reweighted(s, 400 + k)))
    # single NNI neighbors (20)
    for k in range(20):
        t = random_tree(int(rng.integers(4, 7)), 500 + k)
        s = tree_to_splits(t, tuple(sorted(t.labels)))
        pairs.append((s, _nni_swap(s, 600 + k)))
    # star vs resolved, multifurcations (20)
    for k in range(10):
        t = random_tree(int(rng.integers(4, 8)), 700 + k)
        s = tree_to_splits(t, tuple(sorted(t.labels)))
        star = SplitSet(s.labels, {m: w for m, w in s.weights.items()
                                   if m.bit_count() == 1})
        resolved = drop_internals(s, 3, 800 + k)
        pairs.append((resolved, star))
        pairs.append((drop_internals(s, 2, 900 + k),
                      drop_internals(reweighted(s, 901 + k), 2, 902 + k)))
    # fully incompatible quartets and 5-leaf caterpillar flips (20)
    for k in range(10):
        w = rng.exponential(1.0, size=8) + 0.05
        q1 = parse_newick(f"((A:{w[0]},B:{w[1]}):{w[2]},(C:{w[3]},D:{w[4]}):{w[5]});")
        q2 = parse_newick(f"((A:{w[6]},C:{w[7]}):{w[0]},(B:{w[1]},D:{w[2]}):{w[3]});")
        labs = ("A", "B", "C", "D")
        pairs.append((tree_to_splits(q1, labs), tree_to_splits(q2, labs)))
        c1 = parse_newick(f"(((A:{w[0]},B:{w[1]}):{w[2]},C:{w[3]}):{w[4]},D:1,E:1);")
        c2 = parse_newick(f"(((A:{w[5]},C:{w[6]}):{w[7]},E:1):{w[1]},B:1,D:1);")
        labs5 = ("A", "B", "C", "D", "E")
        pairs.append((tree_to_splits(c1, labs5), tree_to_splits(c2, labs5)))
    # two-bin grafts: shared anchor, disagreements inside and out (10)
    for k in range(10):
        pairs.append(_graft_pair(1000 + k))
    # scale extremes (10)
    for k in range(5):
        t = random_tree(5, 1100 + k)
        s = tree_to_splits(t, tuple(sorted(t.labels)))
        big = SplitSet(s.labels, {m: w * 1e6 for m, w in s.weights.items()})
        tiny = SplitSet(s.labels, {m: w * 1e-6 for m, w in
                                   reweighted(s, 1200 + k).weights.items()})
        pairs.append((big, SplitSet(s.labels, {m: w * 1e6 for m, w in
                                               _nni_swap(s, 1300 + k).weights.items()})))
        pairs.append((tiny, SplitSet(s.labels, {m: w * 1e-6 for m, w in
                                                reweighted(s, 1400 + k).weights.items()})))
    assert len(pairs) == 100
    return pairs


def _graft_pair(seed: int) -> tuple[SplitSet, SplitSet]:
    """Two trees sharing the {A,B,C,D} edge, differing inside it and
    among the outer leaves: a guaranteed two-bin instance with <= 3
    unique splits per side."""
    rng = np.random.default_rng(seed)

    def build(flip_in: bool, flip_out: bool) -> SplitSet:
        w = rng.exponential(1.0, size=12) + 0.05
        inner = f"(A:{w[0]},B:{w[1]}):{w[2]},(C:{w[3]},D:{w[4]}):{w[5]}" \
            if not flip_in else \
            f"(A:{w[0]},C:{w[1]}):{w[2]},(B:{w[3]},D:{w[4]}):{w[5]}"
        outer = f"(E:{w[6]},F:{w[7]}):{w[8]},G:{w[9]}" if not flip_out \
            else f"(E:{w[6]},G:{w[7]}):{w[8]},F:{w[9]}"
        text = f"((({inner}):{w[10]},{outer}));"
        t = parse_newick(text)
        return tree_to_splits(t, tuple(sorted(t.labels)))

    return build(False, False), build(bool(rng.integers(2)), True)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
