"""Classical multidimensional scaling and friends.

Given an interpoint distance matrix D, coordinates approximating those
distances are recovered by:

1. double centering the squared distances: S = -1/2 H D^2 H,
2. diagonalizing S = U L U^T,
3. scaling eigenvectors: X = U L^(1/2), keeping the top k columns.

S is positive semi-definite exactly when D is Euclidean; negative
eigenvalues (the rule, not the exception, for tree distances) are
clamped for coordinates and reported through ``negative_mass``.

The symmetric eigensolver is a cyclic Jacobi sweep: at the few-hundred
point scale of these analyses it is fast enough, exhaustively accurate,
and keeps the numerical core of the package self-contained.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .dmatrix import DistanceMatrix
from .errors import DomainError, ValidationError

__all__ = ["EmbeddingResult", "classical_mds", "stress", "kernel_transform",
           "jacobi_eigh"]


def jacobi_eigh(s: np.ndarray, tol: float = 1e-12, max_sweeps: int = 100):
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps until the off-diagonal Frobenius norm drops below
    ``tol * ||S||_F``.  Returns (eigenvalues desc, eigenvectors as
    columns); each eigenvector's first nonzero entry is made positive so
    repeated runs plot identically.
    """
    a = np.array(s, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n) or not np.allclose(a, a.T, atol=0, rtol=0):
        raise ValidationError("jacobi_eigh needs an exactly symmetric matrix")
    v = np.eye(n)
    norm = np.linalg.norm(a)
    if norm == 0.0:
        return np.zeros(n), v

    def offdiag() -> float:
        return np.sqrt(max(np.linalg.norm(a) ** 2 - (np.diag(a) ** 2).sum(), 0.0))

    sweeps = 0
    while offdiag() > tol * norm and sweeps < max_sweeps:
        sweeps += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:  # theta**2 would overflow; t ~ 1/(2 theta)
                    t = 0.5 / theta
                else:
                    sign = 1.0 if theta >= 0 else -1.0
                    t = sign / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                sgn = t * c
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - sgn * col_q
                a[:, q] = sgn * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - sgn * row_q
                a[q, :] = sgn * row_p + c * row_q
                a[p, q] = 0.0
                a[q, p] = 0.0
                vp = v[:, p].copy()
                v[:, p] = c * vp - sgn * v[:, q]
                v[:, q] = sgn * vp + c * v[:, q]
    evals = np.diag(a).copy()
    order = np.argsort(-evals, kind="stable")
    evals = evals[order]
    v = v[:, order]
    for j in range(n):
        col = v[:, j]
        nz = np.nonzero(np.abs(col) > 1e-12 * max(np.abs(col).max(), 1e-300))[0]
        if nz.size and col[nz[0]] < 0:
            v[:, j] = -col
    return evals, v


@dataclass
class EmbeddingResult:
    """Coordinates (B x k, eigenvalue-descending columns), the full
    eigenvalue list, the residual stress of the returned coordinates,
    and the share of spectral mass on the negative side."""

    coordinates: np.ndarray
    eigenvalues: np.ndarray
    stress: float
    negative_mass: float
    padded: bool = False
    labels: list[str] = field(default_factory=list)

    @property
    def explained(self) -> np.ndarray:
        """Per-axis share of the positive spectral mass."""
        pos = np.clip(self.eigenvalues, 0.0, None)
        total = pos.sum()
        return pos / total if total > 0 else pos


def classical_mds(dm: DistanceMatrix, k: int) -> EmbeddingResult:
    """Embed a distance matrix into k Euclidean dimensions.

    If fewer than k eigenvalues are positive the remaining columns are
    zero-padded and the result is flagged (with a warning); negative
    eigenvalues never produce coordinates.
    """
    if k < 1:
        raise DomainError("k must be >= 1")
    n = len(dm)
    if n < 2:
        raise ValidationError("need at least 2 points")
    d2 = dm.values ** 2
    h = np.eye(n) - np.ones((n, n)) / n
    s = -0.5 * (h @ d2 @ h)
    s = 0.5 * (s + s.T)  # exact symmetry for the eigensolver
    evals, evecs = jacobi_eigh(s)
    pos = evals > 0
    npos = int(pos.sum())
    kk = min(k, npos)
    coords = np.zeros((n, k))
    if kk:
        coords[:, :kk] = evecs[:, :kk] * np.sqrt(evals[:kk])
    padded = kk < k
    if padded:
        warnings.warn(f"only {npos} positive eigenvalues; padding {k - kk} "
                      "zero columns", stacklevel=2)
    total_mass = np.abs(evals).sum()
    neg_mass = float(np.abs(evals[~pos]).sum() / total_mass) if total_mass > 0 else 0.0
    return EmbeddingResult(coords, evals, stress(dm, coords), neg_mass,
                           padded, list(dm.labels))


def stress(dm: DistanceMatrix, coords: np.ndarray) -> float:
    """Sum over pairs of squared (input distance - embedded distance)."""
    coords = np.asarray(coords, dtype=float)
    if coords.ndim == 1:
        coords = coords[:, None]
    if coords.shape[0] != len(dm):
        raise ValidationError("coordinate rows do not match the matrix")
    diff = coords[:, None, :] - coords[None, :, :]
    emb = np.sqrt((diff ** 2).sum(-1))
    iu = np.triu_indices(len(dm), 1)
    return float(((dm.values - emb)[iu] ** 2).sum())


def kernel_transform(dm: DistanceMatrix, lam: float) -> DistanceMatrix:
    """Exponential saturation 1 - exp(-lam * d): near-isometric for
    small distances, insensitive to the large ones.  A dissimilarity,
    not necessarily a metric."""
    if lam <= 0:
        raise DomainError("kernel rate must be positive")
    vals = -np.expm1(-lam * dm.values)
    np.fill_diagonal(vals, 0.0)
    return DistanceMatrix(list(dm.labels), vals)
