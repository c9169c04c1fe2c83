"""Geodesic algorithm: flows, covers, oracle agreement, path geometry.

The hand cases below were worked out on paper; the randomized checks
compare against the exhaustive path-space oracle in bhv_oracle.py and
against a subset-enumeration vertex cover.
"""

import itertools
import math

import numpy as np
import pytest

from bhv_oracle import oracle_distance
from conftest import handcrafted_pairs, random_pair, reweighted
from treespace.errors import DomainError, ValidationError
from treespace.geodesic import (FLOW_DONE, GeodesicPath, IncompatibilityGraph,
                                _maxflow_py, boundary_trees, cone_path,
                                cone_path_splits, distance_matrix, geodesic,
                                geodesic_distance, geodesic_splits,
                                min_weight_cover, point_on_path)
from treespace.newick import parse_newick, write_newick
from treespace.simulate import random_tree
from treespace.splits import Split, SplitSet, tree_to_splits


def _brute_cover_weight(g: IncompatibilityGraph) -> float:
    """Minimum vertex-cover weight by subset enumeration (the oracle for
    flow values)."""
    nl, nr = len(g.left), len(g.right)
    best = math.inf
    for keep_l in itertools.product((0, 1), repeat=nl):
        for keep_r in itertools.product((0, 1), repeat=nr):
            if all(keep_l[i] or keep_r[j] for i, j in g.edges):
                w = (sum(w for w, k in zip(g.left_weights, keep_l) if k)
                     + sum(w for w, k in zip(g.right_weights, keep_r) if k))
                best = min(best, w)
    return best


def _graph(wa, wb, edges):
    universe = tuple(f"L{i}" for i in range(99))
    left = [Split(1 << i, math.sqrt(w), universe) for i, w in enumerate(wa)]
    right = [Split(1 << (40 + j), math.sqrt(w), universe) for j, w in enumerate(wb)]
    g = IncompatibilityGraph(left, right, list(wa), list(wb), edges)
    return g


def test_cover_single_edge_both_one():
    g = _graph([1.0], [1.0], [(0, 0)])
    flow, c1, d1 = min_weight_cover(g)
    assert flow == pytest.approx(1.0, abs=1e-12)


def test_cover_empty_edge_set():
    g = _graph([0.6, 0.4], [1.0], [])
    flow, c1, d1 = min_weight_cover(g)
    assert flow == 0.0
    assert c1 == set(g.left)
    assert d1 == set()


def test_cover_splittable_example():
    # weights (0.8, 0.2) vs (1.0), one conflict: flow 0.8 < 1
    g = _graph([0.8, 0.2], [1.0], [(0, 0)])
    flow, c1, d1 = min_weight_cover(g)
    assert flow == pytest.approx(0.8, abs=1e-12)
    assert flow < FLOW_DONE


@pytest.mark.parametrize("seed", range(40))
def test_cover_equals_bruteforce(seed):
    rng = np.random.default_rng(seed)
    na, nb = int(rng.integers(1, 5)), int(rng.integers(1, 5))
    wa = rng.dirichlet(np.ones(na))
    wb = rng.dirichlet(np.ones(nb))
    edges = [(i, j) for i in range(na) for j in range(nb)
             if rng.random() < 0.5]
    g = _graph(list(wa), list(wb), edges)
    flow, c1, d1 = min_weight_cover(g)
    assert flow == pytest.approx(_brute_cover_weight(g), abs=1e-10)
    # the reachability sets define a cover of exactly that weight
    cover_w = (sum(s.weight ** 2 for s in set(g.left) - c1)
               + sum(s.weight ** 2 for s in d1))
    assert cover_w == pytest.approx(flow, abs=1e-10)
    covered = all((a in (set(g.left) - c1)) or (b in d1)
                  for (i, j), (a, b) in
                  [((i, j), (g.left[i], g.right[j])) for i, j in edges])
    assert covered


def test_python_and_dispatch_flows_agree():
    rng = np.random.default_rng(99)
    from treespace.geodesic import _maxflow
    for _ in range(30):
        na, nb = int(rng.integers(1, 6)), int(rng.integers(1, 6))
        wa = list(rng.dirichlet(np.ones(na)))
        wb = list(rng.dirichlet(np.ones(nb)))
        adj = [[bool(rng.random() < 0.5) for _ in range(nb)] for _ in range(na)]
        f1, ra1, rb1 = _maxflow_py(wa, wb, adj, False)
        f2, ra2, rb2 = _maxflow(wa, wb, adj, False)
        assert f1 == f2
        assert list(ra1) == list(ra2) and list(rb1) == list(rb2)


# --- distances ----------------------------------------------------------


def test_identity_distance_zero_exact():
    t = random_tree(9, 1)
    assert geodesic_distance(t, t) == 0.0


def test_same_topology_euclidean():
    t1 = parse_newick("((A:1,B:1):1,C:1,D:1);")
    t3 = parse_newick("((A:2,B:1):3,C:1,D:5);")
    d = geodesic_distance(t1, t3)
    assert d == pytest.approx(math.sqrt(1 + 4 + 16), abs=1e-12)


def test_four_leaf_derived_pair():
    t1 = parse_newick("((A:1,B:1):1,C:1,D:1);")
    t2 = parse_newick("((A:1,C:1):1,B:1,D:1);")
    g = geodesic(t1, t2)
    assert g.distance == pytest.approx(2.0, abs=1e-12)
    assert g.n_transitions() == 1


def test_cone_examples():
    t1 = parse_newick("((A:1,B:1):1,C:1,D:1);")
    t2 = parse_newick("((A:1,C:1):1,B:1,D:1);")
    c = cone_path(t1, t2)
    assert c.distance == pytest.approx(2.0, abs=1e-12)
    # one bin with norms 3 vs 4 -> segment of length 7
    u = ("A", "B", "C", "D", "E", "F", "G", "H")
    pend = {1 << i: 1.0 for i in range(8)}
    s1 = SplitSet(u, {**pend, 0b00000011: 3.0})
    s2 = SplitSet(u, {**pend, 0b00000101: 4.0})
    c2 = cone_path_splits(s1, s2)
    assert c2.distance == pytest.approx(7.0, abs=1e-12)


def test_leaf_set_mismatch_rejected():
    with pytest.raises(ValidationError):
        geodesic(parse_newick("(A:1,B:1);"), parse_newick("(A:1,C:1);"))


def test_oracle_agreement_handcrafted():
    for s1, s2 in handcrafted_pairs():
        d = geodesic_splits(s1, s2).distance
        assert d == pytest.approx(oracle_distance(s1, s2), abs=1e-9)


@pytest.mark.parametrize("seed", range(60))
def test_oracle_agreement_random(seed):
    rng = np.random.default_rng(seed)
    s1, s2 = random_pair(int(rng.integers(3, 6)), seed)
    d = geodesic_splits(s1, s2).distance
    scale = max(d, 1.0)
    assert abs(d - oracle_distance(s1, s2)) <= 1e-9 * scale


def test_metric_properties_sample():
    trees = [random_tree(10, s) for s in range(12)]
    dm = distance_matrix(trees)
    v = dm.values
    assert np.allclose(v, v.T, atol=1e-12)
    assert (np.diag(v) == 0).all()
    n = len(trees)
    for i, j, k in itertools.combinations(range(n), 3):
        assert v[i, j] <= v[i, k] + v[k, j] + 1e-9


def test_sandwich_bounds():
    for seed in range(25):
        rng = np.random.default_rng(seed + 500)
        n = int(rng.integers(4, 15))
        s1, s2 = random_pair(n, seed + 900)
        g = geodesic_splits(s1, s2)
        c = cone_path_splits(s1, s2)
        shared_sq = uniq_sq = 0.0
        for m in set(s1.weights) | set(s2.weights):
            w1, w2 = s1.weights.get(m), s2.weights.get(m)
            if w1 is not None and w2 is not None:
                shared_sq += (w1 - w2) ** 2
            else:
                uniq_sq += (w1 if w1 is not None else w2) ** 2
        lower = math.sqrt(uniq_sq + shared_sq)
        assert lower <= g.distance + 1e-9
        assert g.distance <= c.distance + 1e-12
        if g.splits_performed:
            assert g.distance < c.distance


def test_scaling_equivariance():
    for seed in range(10):
        s1, s2 = random_pair(10, seed + 3000)
        d1 = geodesic_splits(s1, s2).distance
        c = 7.3
        s1c = SplitSet(s1.labels, {m: w * c for m, w in s1.weights.items()})
        s2c = SplitSet(s2.labels, {m: w * c for m, w in s2.weights.items()})
        assert geodesic_splits(s1c, s2c).distance == pytest.approx(
            c * d1, rel=1e-9)


def test_distance_matrix_small_cases():
    t = random_tree(6, 4)
    one = distance_matrix([t])
    assert one.values.shape == (1, 1) and one.values[0, 0] == 0.0
    two = distance_matrix([t, t])
    assert (two.values == 0).all()


def test_distance_matrix_jobs_equivalence():
    trees = [random_tree(8, s) for s in range(8)]
    a = distance_matrix(trees, jobs=1)
    b = distance_matrix(trees, jobs=2)
    assert np.array_equal(a.values, b.values)


# --- the path itself ----------------------------------------------------


def test_point_on_path_endpoints_and_midpoint():
    t1 = parse_newick("((A:1,B:1):1,C:1,D:1);")
    t3 = parse_newick("((A:2,B:1):3,C:1,D:5);")
    p = geodesic(t1, t3)
    labels = tuple(sorted(t1.labels))
    assert tree_to_splits(point_on_path(p, 0.0), labels) == tree_to_splits(t1, labels)
    assert tree_to_splits(point_on_path(p, 1.0), labels) == tree_to_splits(t3, labels)
    mid = tree_to_splits(point_on_path(p, 0.5), labels)
    for m, w in mid.weights.items():
        assert w == pytest.approx(
            0.5 * (tree_to_splits(t1, labels).weights[m]
                   + tree_to_splits(t3, labels).weights[m]), abs=1e-12)
    with pytest.raises(DomainError):
        point_on_path(p, 1.5)


def test_point_on_path_additivity():
    for seed in range(15):
        t1 = random_tree(9, seed + 50)
        t2 = random_tree(9, seed + 5050)
        p = geodesic(t1, t2)
        if p.distance == 0:
            continue
        for t in (0.25, 0.5, 0.8):
            mid = point_on_path(p, t)
            d1 = geodesic_distance(t1, mid)
            d2 = geodesic_distance(mid, t2)
            assert d1 == pytest.approx(t * p.distance, rel=1e-6)
            assert d2 == pytest.approx((1 - t) * p.distance, rel=1e-6)


def test_boundary_trees_same_topology_empty():
    t1 = parse_newick("((A:1,B:1):1,C:1,D:1);")
    assert boundary_trees(geodesic(t1, reweighted_tree(t1, 3))) == []


def reweighted_tree(t, seed):
    labels = tuple(sorted(t.labels))
    s = reweighted(tree_to_splits(t, labels), seed)
    from treespace.splits import splits_to_tree
    return splits_to_tree(s)


def test_boundary_tree_single_pair_is_orthant_origin():
    t1 = parse_newick("((A:1,B:1):1,C:1,D:1);")
    t2 = parse_newick("((A:1,C:1):1,B:1,D:1);")
    bts = boundary_trees(geodesic(t1, t2))
    assert len(bts) == 1
    s = tree_to_splits(bts[0])
    assert not s.internal_masks()  # both exchanged splits at zero


def test_boundary_additivity_two_transitions():
    for seed in range(30):
        t1 = random_tree(8, seed)
        t2 = random_tree(8, seed + 321)
        p = geodesic(t1, t2)
        bts = boundary_trees(p)
        if len(bts) < 2:
            continue
        for b in bts:
            total = geodesic_distance(t1, b) + geodesic_distance(b, t2)
            assert total == pytest.approx(p.distance, rel=1e-6)
        break
    else:
        pytest.skip("no multi-transition pair found")


def test_path_invariants_on_random_pairs():
    for seed in range(20):
        s1, s2 = random_pair(12, seed + 7777)
        p = geodesic_splits(s1, s2)
        for _, pairs in p.bins:
            ratios = [sp.ratio for sp in pairs]
            assert all(ratios[i] <= ratios[i + 1] * (1 + 1e-9)
                       for i in range(len(ratios) - 1))
            for i in range(1, len(pairs)):
                for j in range(i):
                    for a in pairs[i].a:
                        for b in pairs[j].b:
                            from treespace.splits import masks_compatible
                            assert masks_compatible(a.mask, b.mask)
