"""Dense Hermitian linear algebra helpers.

Ordered eigensystems, orthonormal bases, spectral projectors, and
canonical-angle distances between subspaces.  All routines accept real
symmetric or complex Hermitian input; validation raises ValueError.
"""

from typing import NamedTuple

import numpy as np

__all__ = [
    "ORTHONORMALITY_TOL",
    "Eigensystem",
    "canonical_angles",
    "check_orthonormal",
    "eigh_sorted",
    "orthonormalize",
    "projector",
    "random_orthonormal",
    "sin_theta_dist",
    "spectral_norm",
    "symmetrize",
]

# Frobenius tolerance on V^H V - I for a basis to count as orthonormal.
ORTHONORMALITY_TOL = 1e-12


def _as_square(a):
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def symmetrize(a):
    """Return the Hermitian part (A + A^H) / 2 of a square matrix."""
    a = _as_square(a)
    return (a + a.conj().T) / 2


def spectral_norm(m) -> float:
    """Largest singular value of a matrix (2-norm)."""
    m = np.asarray(m)
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    if m.size == 0:
        return 0.0
    return float(np.linalg.norm(m, 2))


class Eigensystem(NamedTuple):
    """Eigenvalues in nondecreasing order with matching eigenvector columns."""

    values: np.ndarray
    vectors: np.ndarray


def eigh_sorted(a) -> Eigensystem:
    """Full eigendecomposition of a Hermitian matrix, eigenvalues ascending.

    The input is symmetrized before factorization, so mildly non-Hermitian
    roundoff is absorbed.  Under degenerate eigenvalues only the invariant
    subspace is well defined; callers must compare subspaces, not columns.
    """
    w, v = np.linalg.eigh(symmetrize(a))
    return Eigensystem(w, v)


def check_orthonormal(v, tol: float = ORTHONORMALITY_TOL):
    """Validate that the columns of V are orthonormal; returns V as ndarray."""
    v = np.asarray(v)
    if v.ndim != 2:
        raise ValueError(f"expected a 2-d array of basis columns, got shape {v.shape}")
    n, k = v.shape
    if k > n:
        raise ValueError(f"basis has more columns ({k}) than rows ({n})")
    if not np.all(np.isfinite(v)):
        raise ValueError("basis has non-finite entries")
    gram = v.conj().T @ v
    err = np.linalg.norm(gram - np.eye(k), "fro")
    if err > tol:
        raise ValueError(f"columns are not orthonormal: ||V^H V - I||_F = {err:.3e}")
    return v


def orthonormalize(m):
    """Orthonormal basis of range(M) via QR with a sign-fixed R diagonal.

    Sign fixing makes the result deterministic across LAPACK builds.
    Numerically rank-deficient input is rejected: QR would silently pad
    the basis with directions outside range(M).
    """
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] < m.shape[1]:
        raise ValueError(f"expected a tall matrix, got shape {m.shape}")
    q, r = np.linalg.qr(m)
    d = np.diagonal(r)
    mags = np.abs(d)
    if np.min(mags) <= 1e-12 * np.max(mags):
        raise ValueError("columns are numerically rank deficient")
    return q * (mags / d)


def random_orthonormal(n: int, k: int, rng) -> np.ndarray:
    """Draw a random n-by-k orthonormal basis from a seeded generator."""
    return orthonormalize(rng.standard_normal((n, k)))


def projector(v) -> np.ndarray:
    """Dense orthogonal projector V V^H onto the span of the columns of V."""
    v = np.asarray(v)
    return v @ v.conj().T


def _check_pair(x, y):
    x = np.asarray(x)
    y = np.asarray(y)
    if x.ndim != 2 or y.ndim != 2 or x.shape != y.shape:
        raise ValueError(
            f"subspace bases must share their shape, got {x.shape} and {y.shape}"
        )
    return x, y


def canonical_angles(x, y) -> np.ndarray:
    """Canonical angles between two k-dimensional subspaces, largest first.

    Both arguments must be orthonormal bases with the same shape.  The
    angles are arccos of the singular values of X^H Y, clipped into [0, 1]
    before arccos, and returned nonincreasing so that entry 0 is the angle
    whose sine equals the spectral projector distance.
    """
    x, y = _check_pair(x, y)
    sigma = np.linalg.svd(x.conj().T @ y, compute_uv=False)
    sigma = np.clip(sigma, 0.0, 1.0)
    return np.arccos(sigma)[::-1]


def sin_theta_dist(x, y) -> float:
    """Sine of the largest canonical angle between span(X) and span(Y).

    Equals ||X X^H - Y Y^H||_2 for equal-dimensional subspaces.  Computed
    as the largest singular value of (I - X X^H) Y, which stays accurate
    for angles near zero where arccos of a singular value loses digits.
    """
    x, y = _check_pair(x, y)
    resid = y - x @ (x.conj().T @ y)
    return min(spectral_norm(resid), 1.0)
