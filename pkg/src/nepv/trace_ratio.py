"""Trace-ratio optimization as a nonlinear eigenvector problem.

Maximizing tr(V^T A V) / tr(V^T B V) + tr(V^T C V) over orthonormal V is
the first-order condition E(V) V = V Lambda for the k largest eigenvalues
of

    E(V) = A / phi_B - B * phi_A / phi_B^2 + C,

with phi_S(V) = tr(V^T S V) = tr(S P).  In the operator-family form the
constant term is C and the nonlinear term is the remaining pair, so a
positive definite B keeps phi_B bounded away from zero.

Closed-form bounds on the perturbation magnitude and Lipschitz constant
of the nonlinear term use sums of extreme absolute eigenvalues: with
Omega_S the sum of the k largest and omega_S the sum of the k smallest
absolute eigenvalues of S, phi_S ranges over [omega_S, Omega_S] for
positive semidefinite S and |phi_S| <= Omega_S in general.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .linalg import orthonormalize, spectral_norm, symmetrize
from .problem import NEPvProblem

__all__ = [
    "EigSumBounds",
    "TraceRatioConfig",
    "analytic_d_bound",
    "analytic_delta2_bound",
    "build_perturbed_trace_ratio",
    "build_trace_ratio_problem",
    "eig_sum_bounds",
    "generate_matrices",
    "trace_ratio_objective",
]


@dataclass(frozen=True)
class TraceRatioConfig:
    """Size, subspace dimension, spread beta of B, perturbation scale, seed.

    B is drawn with eigenvalues 50 + beta*uniform(-1, 1), so beta < 50
    keeps it positive definite.
    """

    n: int
    k: int
    beta: float
    eps: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not (1 <= self.k < self.n):
            raise ValueError(f"need 1 <= k < n, got k={self.k}, n={self.n}")
        if not 0 <= self.beta < 50:
            raise ValueError(f"beta must lie in [0, 50), got {self.beta}")
        if self.eps < 0:
            raise ValueError(f"eps must be nonnegative, got {self.eps}")


class TraceRatioMatrices(NamedTuple):
    """Base matrices and perturbation directions of one seeded instance."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    da: np.ndarray
    db: np.ndarray
    dc: np.ndarray


def generate_matrices(cfg: TraceRatioConfig, delta_seed=None) -> TraceRatioMatrices:
    """Draw the seeded instance (A, B, C) and perturbations scaled by eps.

    Draw order from one PCG64 stream: A uniform(0,1) symmetrized, the
    eigenbasis Q of B from a Gaussian matrix, the spectrum of B as
    50 + beta*uniform(-1,1), C standard normal symmetrized, then the
    three perturbation directions as symmetrized uniform(-1,1).  Changing
    eps rescales the perturbations without redrawing anything.  A
    delta_seed redirects the three direction draws to their own stream,
    so perturbations can vary while the base instance stays pinned.
    """
    n = cfg.n
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    a = symmetrize(rng.random((n, n)))
    q = orthonormalize(rng.standard_normal((n, n)))
    spectrum = 50.0 + cfg.beta * rng.uniform(-1.0, 1.0, size=n)
    b = symmetrize((q * spectrum) @ q.T)
    c = symmetrize(rng.standard_normal((n, n)))
    if delta_seed is not None:
        rng = np.random.Generator(np.random.PCG64(delta_seed))
    directions = [symmetrize(rng.uniform(-1.0, 1.0, size=(n, n))) for _ in range(3)]
    da, db, dc = (cfg.eps * m for m in directions)
    return TraceRatioMatrices(a=a, b=b, c=c, da=da, db=db, dc=dc)


def trace_ratio_objective(a, b, c, v) -> float:
    """Objective tr(V^T A V)/tr(V^T B V) + tr(V^T C V)."""
    va, vb, vc = (float(np.trace(v.conj().T @ m @ v).real) for m in (a, b, c))
    return va / vb + vc


def _check_positive_definite(b, name: str):
    w = np.linalg.eigvalsh(symmetrize(b))
    if w[0] <= 0:
        raise ValueError(f"{name} must be positive definite, smallest eig {w[0]:.3e}")


def _ratio_map(a, b):
    def nonlinear(p):
        phi_b = float(np.trace(b @ p).real)
        phi_a = float(np.trace(a @ p).real)
        return a / phi_b - b * (phi_a / phi_b**2)

    return nonlinear


def build_trace_ratio_problem(cfg: TraceRatioConfig) -> NEPvProblem:
    """Unperturbed trace-ratio instance targeting the k largest eigenvalues."""
    mats = generate_matrices(cfg)
    _check_positive_definite(mats.b, "B")
    return NEPvProblem(
        n=cfg.n, k=cfg.k, a0=mats.c, a1=None, a2=_ratio_map(mats.a, mats.b),
        end="largest",
    )


def build_perturbed_trace_ratio(cfg: TraceRatioConfig, delta_seed=None) -> NEPvProblem:
    """Trace-ratio instance with A, B, C shifted by the eps-scaled directions."""
    mats = generate_matrices(cfg, delta_seed)
    b_tilde = mats.b + mats.db
    _check_positive_definite(b_tilde, "B + dB")
    return NEPvProblem(
        n=cfg.n, k=cfg.k, a0=mats.c + mats.dc, a1=None,
        a2=_ratio_map(mats.a + mats.da, b_tilde), end="largest",
    )


class EigSumBounds(NamedTuple):
    """Sums of the k largest and k smallest absolute eigenvalues."""

    omega_large: float
    omega_small: float


def eig_sum_bounds(m, k: int) -> EigSumBounds:
    """Omega and omega of a Hermitian matrix: extreme absolute-eigenvalue sums.

    Eigenvalues are ranked by absolute value; omega_large sums the k
    largest, omega_small the k smallest.  For positive semidefinite M
    these bracket tr(V^T M V) over all orthonormal n-by-k V.
    """
    m = symmetrize(m)
    if not 1 <= k <= m.shape[0]:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={m.shape[0]}")
    mags = np.sort(np.abs(np.linalg.eigvalsh(m)))
    return EigSumBounds(
        omega_large=float(np.sum(mags[-k:])),
        omega_small=float(np.sum(mags[:k])),
    )


def analytic_delta2_bound(a, b, da, db, k: int) -> float:
    """Closed-form upper bound on sup_P ||E~(P) - E(P)|| for the ratio term.

    Four terms bound the effect of dB through 1/phi_B, of dA and dB
    through the coupled phi_A phi_B / phi_B^2 factor, and of dA, dB
    entering the numerators directly.  Requires B and B + dB positive
    definite so the phi_B lower bounds omega are positive.
    """
    _check_positive_definite(b, "B")
    _check_positive_definite(np.asarray(b) + np.asarray(db), "B + dB")
    om_db, _ = eig_sum_bounds(db, k)
    om_b, w_b = eig_sum_bounds(b, k)
    om_bt, w_bt = eig_sum_bounds(np.asarray(b) + np.asarray(db), k)
    om_da, _ = eig_sum_bounds(da, k)
    om_a, _ = eig_sum_bounds(a, k)
    om_at, _ = eig_sum_bounds(np.asarray(a) + np.asarray(da), k)
    na = spectral_norm(a)
    nb = spectral_norm(b)
    nda = spectral_norm(da)
    ndb = spectral_norm(db)
    return (
        na * om_db / (w_bt * w_b)
        + nb * (om_da * om_b**2 + om_a * (om_b + om_bt) * om_db) / (w_bt**2 * w_b**2)
        + nda / w_bt
        + ndb * om_at / w_bt**2
    )


def analytic_d_bound(a, b, k: int) -> float:
    """Closed-form Lipschitz bound for the ratio term over all projectors.

    Bounds ||E(P) - E(P')|| / ||P - P'|| globally, so it is independent
    of the center and radius used by sampled estimates.
    """
    _check_positive_definite(b, "B")
    om_a, _ = eig_sum_bounds(a, k)
    om_b, w_b = eig_sum_bounds(b, k)
    na = spectral_norm(a)
    nb = spectral_norm(b)
    return 2.0 * na * nb / w_b**2 + 2.0 * nb**2 * om_a * om_b / w_b**4
