"""Four-point hyperbolicity of a finite metric.

For each quadruple (i, j, k, l) form the three pairings

    A1 = d(i,j) + d(k,l),  A2 = d(i,k) + d(j,l),  A3 = d(i,l) + d(j,k)

and let the gap be the difference of the two largest.  delta is half the
maximum gap over all quadruples; it is zero exactly on additive (tree)
metrics, which is the Buneman four-point condition.  Ratios against the
metric's diameter (or per-quadruple perimeter / largest sum) make the
statistic scale-free, which is what makes it usable as a treeness score.

The definitional O(B^4) loop lives in ``_delta_python``; a blocked numpy
variant and a compiled kernel (used when numba imports) produce exactly
the same maxima and argmax quadruple.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .dmatrix import DistanceMatrix
from .errors import DomainError, ValidationError

__all__ = ["DeltaReport", "gromov_delta", "four_point_check"]

NORMALIZATIONS = ("none", "max", "perimeter", "max_sum")


@dataclass
class DeltaReport:
    """``delta`` is half the maximal gap.  ``ratio`` is the scale-free
    form: the full gap over the chosen denominator (max distance,
    per-quadruple perimeter, or per-quadruple largest sum), matching the
    doubled convention used in published calibration tables; for
    norm='none' it is just delta."""

    delta: float
    normalization: str
    ratio: float
    argmax_quadruple: tuple[str, str, str, str]


def _gap_of(d, i, j, k, l):
    a1 = d[i, j] + d[k, l]
    a2 = d[i, k] + d[j, l]
    a3 = d[i, l] + d[j, k]
    m = max(a1, a2, a3)
    s = a1 + a2 + a3
    return 2.0 * m + min(a1, a2, a3) - s, (a1, a2, a3)


def _delta_python(d: np.ndarray, mode: str):
    """Reference quadruple loop; the definition the fast paths must match."""
    n = d.shape[0]
    best = -1.0
    arg = (0, 1, 2, 3)
    for i in range(n - 3):
        for j in range(i + 1, n - 2):
            for k in range(j + 1, n - 1):
                for l in range(k + 1, n):
                    gap, sums = _gap_of(d, i, j, k, l)
                    if mode == "perimeter":
                        denom = sums[0] + sums[1] + sums[2]
                        obj = gap / denom if denom > 0 else 0.0
                    elif mode == "max_sum":
                        denom = max(sums)
                        obj = gap / denom if denom > 0 else 0.0
                    else:
                        obj = gap
                    if obj > best:
                        best = obj
                        arg = (i, j, k, l)
    return best, arg


def _delta_blocked(d: np.ndarray, mode: str):
    """Same maximum via numpy, vectorized over (k, l) for each (i, j)."""
    n = d.shape[0]
    best = -1.0
    arg = (0, 1, 2, 3)
    iu = np.triu_indices(n, 1)
    upper = np.zeros((n, n), dtype=bool)
    upper[iu] = True
    for i in range(n - 1):
        di = d[i]
        for j in range(i + 1, n):
            a1 = d[i, j] + d
            a2 = np.add.outer(di, d[j])
            a3 = a2.T
            m = np.maximum(a1, np.maximum(a2, a3))
            gap = 2.0 * m + np.minimum(a1, np.minimum(a2, a3)) - (a1 + a2 + a3)
            if mode == "perimeter":
                denom = a1 + a2 + a3
                obj = np.divide(gap, denom, out=np.zeros_like(gap),
                                where=denom > 0)
            elif mode == "max_sum":
                obj = np.divide(gap, m, out=np.zeros_like(gap), where=m > 0)
            else:
                obj = gap
            # valid quadruples: k < l, both beyond j keeps each set of four
            # distinct and canonically ordered
            valid = upper.copy()
            valid[: j + 1, :] = False
            valid[:, : j + 1] = False
            obj = np.where(valid, obj, -1.0)
            flat = int(np.argmax(obj))
            k, l = divmod(flat, n)
            if obj[k, l] > best:
                best = float(obj[k, l])
                arg = (i, j, k, l)
    return best, arg


def _build_numba():
    import warnings

    from numba import NumbaWarning, njit, prange

    # the TBB-version notice is environment noise; the omp/workqueue
    # fallback layers are fine for this kernel
    warnings.filterwarnings("ignore", category=NumbaWarning,
                            message=".*TBB.*")

    @njit(cache=True, parallel=True)
    def _kernel(d, mode):  # pragma: no cover - compiled
        n = d.shape[0]
        # one best slot per outer index; reduced serially afterwards so
        # ties stay deterministic under any thread count
        best_i = np.full(n, -1.0)
        arg_i = np.zeros((n, 4), dtype=np.int64)
        for i in prange(n - 3):
            b = -1.0
            bi = bj = bk = bl = 0
            for j in range(i + 1, n - 2):
                dij = d[i, j]
                for k in range(j + 1, n - 1):
                    dik = d[i, k]
                    djk = d[j, k]
                    for l in range(k + 1, n):
                        a1 = dij + d[k, l]
                        a2 = dik + d[j, l]
                        a3 = d[i, l] + djk
                        m = a1
                        if a2 > m:
                            m = a2
                        if a3 > m:
                            m = a3
                        mn = a1
                        if a2 < mn:
                            mn = a2
                        if a3 < mn:
                            mn = a3
                        gap = 2.0 * m + mn - (a1 + a2 + a3)
                        if mode == 1:
                            denom = a1 + a2 + a3
                            obj = gap / denom if denom > 0 else 0.0
                        elif mode == 2:
                            obj = gap / m if m > 0 else 0.0
                        else:
                            obj = gap
                        if obj > b:
                            b = obj
                            bi, bj, bk, bl = i, j, k, l
            best_i[i] = b
            arg_i[i, 0] = bi
            arg_i[i, 1] = bj
            arg_i[i, 2] = bk
            arg_i[i, 3] = bl
        best = -1.0
        w = 0
        for i in range(n):
            if best_i[i] > best:
                best = best_i[i]
                w = i
        return best, arg_i[w, 0], arg_i[w, 1], arg_i[w, 2], arg_i[w, 3]

    return _kernel


_NUMBA_DELTA = None
if not os.environ.get("TREESPACE_NO_NUMBA"):
    try:
        _NUMBA_DELTA = _build_numba()
    except ImportError:
        _NUMBA_DELTA = None

_MODE_CODE = {"none": 0, "max": 0, "perimeter": 1, "max_sum": 2}


def _max_objective(d: np.ndarray, mode: str):
    if _NUMBA_DELTA is not None and d.shape[0] >= 16:
        best, i, j, k, l = _NUMBA_DELTA(d, _MODE_CODE[mode])
        return float(best), (int(i), int(j), int(k), int(l))
    if d.shape[0] >= 16:
        return _delta_blocked(d, mode)
    return _delta_python(d, mode)


def gromov_delta(dm: DistanceMatrix, norm: str = "max") -> DeltaReport:
    """Exact maximum over all C(B,4) quadruples.

    norm='max' reports the full gap over the largest distance (i.e.
    2*delta/max, the convention of the calibration tables); 'perimeter'
    and 'max_sum' maximize the per-quadruple gap over the quadruple's
    six-distance perimeter or its largest sum.  Ties report the
    lexicographically smallest quadruple.  O(B^4); tens of seconds at
    B=500 with the compiled kernel.
    """
    if norm not in NORMALIZATIONS:
        raise DomainError(f"unknown normalization {norm!r}")
    if len(dm) < 4:
        raise ValidationError("need at least 4 points")
    d = dm.values
    gap, arg = _max_objective(d, "none")
    delta = 0.5 * gap
    if norm == "none":
        ratio = delta
    elif norm == "max":
        ratio = gap / dm.max() if dm.max() > 0 else 0.0
    else:
        obj, arg = _max_objective(d, norm)
        ratio = obj
    labels = tuple(dm.labels[x] for x in arg)
    return DeltaReport(delta, norm, ratio, labels)


def four_point_check(dm: DistanceMatrix, tol: float) -> bool:
    """True iff every quadruple's two largest sums differ by at most tol."""
    if len(dm) < 4:
        raise ValidationError("need at least 4 points")
    gap, _ = _max_objective(dm.values, "none")
    return gap <= tol
