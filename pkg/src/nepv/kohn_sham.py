"""Discretized Kohn-Sham model problem on a uniform 1-d grid.

The Hamiltonian at density rho = diag(V V^T) is

    H(rho) = L/2 + V_ion + Diag(L_pinv rho) - 2*gamma*Diag(rho^(1/3)),

where L is the three-point Laplacian with grid spacing h, L_pinv its
pseudoinverse, and gamma weighs the exchange term.  The ionic potential
is zero on this grid.  Ground states occupy the k smallest eigenvalues.
"""

from dataclasses import dataclass

import numpy as np

from .linalg import eigh_sorted, symmetrize
from .perturbation import AnalyticBounds
from .problem import NEPvProblem

__all__ = [
    "KsConfig",
    "build_ks_problem",
    "build_laplacian",
    "build_perturbed_ks",
    "hartree_lipschitz_bound",
    "ks_analytic_bounds",
    "random_sparse_symmetric",
]

# Relative eigenvalue cutoff below which pseudoinverse modes are dropped.
_PINV_CUTOFF = 1e-12


@dataclass(frozen=True)
class KsConfig:
    """Grid and model parameters of one Kohn-Sham instance.

    eps1 scales the relative Laplacian perturbation, eps2 the random
    sparse ionic potential; both are zero for the unperturbed problem.
    The seed drives only the random potential.
    """

    n: int
    k: int
    h_grid: float
    gamma: float = 1.0
    eps1: float = 0.0
    eps2: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 2 * self.k:
            raise ValueError(f"need n >= 2k, got n={self.n}, k={self.k}")
        if self.k < 1:
            raise ValueError(f"k must be positive, got {self.k}")
        if self.h_grid <= 0:
            raise ValueError(f"grid spacing must be positive, got {self.h_grid}")
        if self.eps1 < 0 or self.eps2 < 0:
            raise ValueError("perturbation scales must be nonnegative")


def build_laplacian(n: int, h: float) -> np.ndarray:
    """Three-point Laplacian: tridiagonal (-1, 2, -1) scaled by 1/h^2.

    Eigenvalues are 2*(1 - cos(j*pi/(n+1)))/h^2 for j = 1..n, so the
    matrix is positive definite.
    """
    m = np.eye(n) - np.diag(np.ones(n - 1), 1)
    return (m + m.T) / h**2


def _pinv_hermitian(a: np.ndarray) -> np.ndarray:
    """Pseudoinverse of a Hermitian matrix with a relative rank cutoff."""
    w, v = eigh_sorted(a)
    cutoff = _PINV_CUTOFF * np.max(np.abs(w))
    inv = np.where(np.abs(w) > cutoff, 1.0 / np.where(w == 0, 1.0, w), 0.0)
    return (v * inv) @ v.T


def random_sparse_symmetric(n: int, density: float, rng) -> np.ndarray:
    """Symmetric matrix with sparse standard-normal upper triangle.

    Each position on or above the diagonal is independently nonzero with
    the given probability; values are standard normal and mirrored below
    the diagonal.
    """
    if not 0 <= density <= 1:
        raise ValueError(f"density must lie in [0, 1], got {density}")
    mask = np.triu(rng.random((n, n)) < density)
    vals = rng.standard_normal((n, n))
    upper = np.triu(np.where(mask, vals, 0.0))
    return upper + np.triu(upper, 1).T


def _density(p: np.ndarray) -> np.ndarray:
    # Clamp before the cube root: roundoff can push tiny densities negative.
    return np.clip(np.real(np.diagonal(p)), 0.0, None)


def _make_maps(l_pinv: np.ndarray, gamma: float):
    def hartree(p):
        return np.diag(l_pinv @ _density(p))

    def exchange(p):
        return -2.0 * gamma * np.diag(np.cbrt(_density(p)))

    return hartree, exchange


def build_ks_problem(cfg: KsConfig) -> NEPvProblem:
    """Unperturbed Kohn-Sham instance for the k lowest states."""
    lap = build_laplacian(cfg.n, cfg.h_grid)
    v_ion = np.zeros((cfg.n, cfg.n))
    hartree, exchange = _make_maps(_pinv_hermitian(lap), cfg.gamma)
    return NEPvProblem(
        n=cfg.n, k=cfg.k, a0=lap / 2 + v_ion, a1=hartree, a2=exchange, end="smallest"
    )


def hartree_lipschitz_bound(kernel: np.ndarray) -> float:
    """Global Lipschitz constant of P -> Diag(kernel @ diag(P)).

    Every diagonal entry of a projector difference is bounded by its
    spectral norm, and the spectral norm of a diagonal matrix is the
    largest entry, so the max absolute row sum of the kernel is an exact
    closed-form bound.
    """
    return float(np.abs(kernel).sum(axis=1).max())


def ks_analytic_bounds(cfg: KsConfig) -> AnalyticBounds:
    """Closed-form components for the perturbation estimates.

    The Hartree map gets the row-sum Lipschitz bound; the map difference
    between perturbed and unperturbed Hartree kernels is bounded the same
    way since densities lie in [0, 1].  The exchange map keeps its cube
    root, whose slope is unbounded at vanishing density, so no global
    constant exists and that component stays with the sampler.  The
    perturbed problem reuses the exchange map, hence a zero difference.
    """
    lap = build_laplacian(cfg.n, cfg.h_grid)
    l_pinv = _pinv_hermitian(lap)
    lt_pinv = _pinv_hermitian(lap + cfg.eps1 * lap)
    return AnalyticBounds(
        delta1=hartree_lipschitz_bound(lt_pinv - l_pinv),
        delta2=0.0,
        d1=hartree_lipschitz_bound(l_pinv),
        d2=None,
    )


def build_perturbed_ks(cfg: KsConfig) -> NEPvProblem:
    """Kohn-Sham instance with perturbed Laplacian and ionic potential.

    The Laplacian perturbation is the relative scaling eps1*L; the ionic
    perturbation is eps2 times a seeded random sparse symmetric matrix
    with density one half.  The Hartree term uses the pseudoinverse of
    the perturbed Laplacian; the exchange term is unchanged.
    """
    lap = build_laplacian(cfg.n, cfg.h_grid)
    v_ion = np.zeros((cfg.n, cfg.n))
    d_lap = cfg.eps1 * lap
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    d_ion = cfg.eps2 * random_sparse_symmetric(cfg.n, 0.5, rng)
    a0 = symmetrize(lap / 2 + v_ion + d_lap + d_ion)
    hartree, exchange = _make_maps(_pinv_hermitian(lap + d_lap), cfg.gamma)
    return NEPvProblem(n=cfg.n, k=cfg.k, a0=a0, a1=hartree, a2=exchange, end="smallest")
