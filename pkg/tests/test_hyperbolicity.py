"""Four-point delta: hand cases, kernel agreement, invariances."""

import math

import numpy as np
import pytest

from conftest import additive_matrix
from treespace.dmatrix import DistanceMatrix
from treespace.errors import DomainError, ValidationError
from treespace.hyperbolicity import (_MODE_CODE, _NUMBA_DELTA, _delta_blocked,
                                     _delta_python, four_point_check,
                                     gromov_delta)
from treespace.simulate import random_tree


def unit_square() -> DistanceMatrix:
    pts = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float)
    d = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1))
    return DistanceMatrix(list("abcd"), 0.5 * (d + d.T))


def euclidean_matrix(x: np.ndarray, prefix="p") -> DistanceMatrix:
    d = np.sqrt(((x[:, None, :] - x[None, :, :]) ** 2).sum(-1))
    np.fill_diagonal(d, 0.0)
    return DistanceMatrix([f"{prefix}{i}" for i in range(len(x))],
                          0.5 * (d + d.T))


def test_tree_metric_delta_zero():
    dm = additive_matrix(random_tree(9, 3))
    rep = gromov_delta(dm, "max")
    assert rep.delta == pytest.approx(0.0, abs=1e-10)
    assert four_point_check(dm, 1e-9)


def test_unit_square_delta():
    rep = gromov_delta(unit_square(), "max")
    assert rep.delta == pytest.approx(math.sqrt(2) - 1, abs=1e-12)
    assert rep.ratio == pytest.approx(2 * (math.sqrt(2) - 1) / math.sqrt(2),
                                      abs=1e-12)
    assert not four_point_check(unit_square(), 0.1)


def test_identical_points_pass_four_point():
    dm = DistanceMatrix(list("abcd"), np.zeros((4, 4)))
    assert four_point_check(dm, 0.0)
    assert gromov_delta(dm).delta == 0.0


def test_too_few_points_rejected():
    dm = DistanceMatrix(list("abc"), np.array([[0, 1, 1], [1, 0, 1], [1, 1, 0.0]]))
    with pytest.raises(ValidationError):
        gromov_delta(dm)
    with pytest.raises(DomainError):
        gromov_delta(unit_square(), norm="bogus")


def test_kernels_agree_exactly(rng):
    x = rng.random((22, 5))
    d = euclidean_matrix(x).values
    for mode in ("none", "perimeter", "max_sum"):
        bp, ap = _delta_python(d, mode)
        bb, ab = _delta_blocked(d, mode)
        assert bp == bb and ap == ab
        if _NUMBA_DELTA is not None:
            bn, *an = _NUMBA_DELTA(d, _MODE_CODE[mode])
            assert bp == bn and ap == tuple(an)


def test_scaling_and_relabeling_invariance(rng):
    x = rng.random((15, 4))
    dm = euclidean_matrix(x)
    rep = gromov_delta(dm, "max")
    scaled = DistanceMatrix(dm.labels, dm.values * 3.5)
    rep2 = gromov_delta(scaled, "max")
    assert rep2.delta == pytest.approx(3.5 * rep.delta, rel=1e-12)
    assert rep2.ratio == pytest.approx(rep.ratio, rel=1e-12)
    perm = rng.permutation(15)
    relabeled = DistanceMatrix([dm.labels[i] for i in perm],
                               dm.values[np.ix_(perm, perm)])
    assert gromov_delta(relabeled, "max").delta == pytest.approx(
        rep.delta, rel=1e-12)


def test_subset_delta_never_larger(rng):
    x = rng.random((14, 3))
    dm = euclidean_matrix(x)
    full = gromov_delta(dm).delta
    sub = gromov_delta(dm.submatrix(dm.labels[:9])).delta
    assert sub <= full + 1e-12


def test_ratio_normalizations_bounded(rng):
    x = rng.random((12, 6))
    dm = euclidean_matrix(x)
    for norm in ("max", "perimeter", "max_sum"):
        rep = gromov_delta(dm, norm)
        assert 0.0 <= rep.ratio <= 1.0
        assert len(rep.argmax_quadruple) == 4


def test_argmax_quadruple_is_reported():
    rep = gromov_delta(unit_square(), "none")
    assert rep.argmax_quadruple == ("a", "b", "c", "d")
    assert rep.ratio == rep.delta
