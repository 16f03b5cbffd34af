"""A posteriori error bounds for approximate SCF solutions.

An approximate solution V with residual R = A(P)V - V(V^H A(P) V) solves
a nearby problem exactly: adding the backward perturbation
Delta_A0 = -R V^H - V R^H to the constant term makes V an exact invariant
basis of A(P) + Delta_A0, and ||Delta_A0||_2 = ||R||_2 because V^H R = 0.
Feeding the a priori machinery with delta = ||R||_2 and gap quantities of
the corrected operator yields computable bounds on the distance from V to
the nearest exact solution.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .linalg import check_orthonormal, projector, spectral_norm
from .perturbation import (
    Bound,
    GapData,
    GapViolationError,
    SamplerConfig,
    estimate_d,
    solve_smallest_root,
)
from .problem import NEPvProblem, evaluate

__all__ = [
    "BackwardPerturbation",
    "ErrorReport",
    "backward_perturbation",
    "error_bound_cor1",
    "error_bound_cor2",
    "error_bound_gamma",
    "error_report",
    "estimate_d_hat",
    "hat_gap_data",
]


@dataclass(frozen=True)
class BackwardPerturbation:
    """Residual R, backward perturbation Delta_A0, and their common norm."""

    residual: np.ndarray
    delta_a0: np.ndarray
    norm: float


def backward_perturbation(problem: NEPvProblem, v_hat) -> BackwardPerturbation:
    """Backward perturbation -R V^H - V R^H that makes V an exact solution.

    Verifies the exactness identity (A(P) + Delta_A0) V = V Lambda before
    returning; a failure indicates a loss of orthonormality in V.
    """
    v = check_orthonormal(v_hat)
    p = projector(v)
    a = evaluate(problem, p)
    av = a @ v
    r = av - v @ (v.conj().T @ av)
    delta_a0 = -r @ v.conj().T - v @ r.conj().T
    corrected = a + delta_a0
    cv = corrected @ v
    defect = spectral_norm(cv - v @ (v.conj().T @ cv))
    anorm = spectral_norm(a)
    if defect > 1e-10 * max(anorm, 1.0):
        raise ValueError(
            f"backward perturbation failed to annihilate the residual: "
            f"defect {defect:.3e}"
        )
    return BackwardPerturbation(residual=r, delta_a0=delta_a0, norm=spectral_norm(r))


def hat_gap_data(problem: NEPvProblem, v_hat, bp: Optional[BackwardPerturbation] = None):
    """Gap quantities of the corrected operator A(P) + Delta_A0 at V.

    Returns (GapData, residual_norm).  The corrected operator has V as an
    exact invariant basis, so its spectrum splits cleanly around the
    approximated eigenvalues; a nonpositive gap raises GapViolationError.
    """
    if problem.n < 2 * problem.k:
        raise ValueError(
            f"gap quantities need n >= 2k, got n={problem.n}, k={problem.k}"
        )
    if bp is None:
        bp = backward_perturbation(problem, v_hat)
    a_hat = evaluate(problem, projector(v_hat)) + bp.delta_a0
    if problem.end == "largest":
        a_hat = -a_hat
    w = np.linalg.eigvalsh((a_hat + a_hat.conj().T) / 2)
    k = problem.k
    g = float(w[k] - w[k - 1])
    h = float(max(w[k + j] - w[j] for j in range(k)))
    if g <= 0:
        raise GapViolationError(
            f"corrected operator has nonpositive gap {g:.3e} at the iterate"
        )
    zeta = math.sqrt(g) / (math.sqrt(g) + math.sqrt(2.0 * h))
    return GapData(g=g, h=h, zeta=zeta), bp.norm


def error_bound_cor1(problem: NEPvProblem, v_hat, d_hat: float) -> Bound:
    """Closed-form distance bound to the nearest exact solution.

    Available when ||R||_2 < g_hat/2 - d_hat, mirroring the a priori
    closed-form bound with delta replaced by the residual norm.
    """
    gap, rnorm = hat_gap_data(problem, v_hat)
    g = gap.g
    if not rnorm < 0.5 * g - d_hat:
        return Bound.absent("hypothesis-failed")
    disc = (g - d_hat - rnorm) ** 2 - 4.0 * d_hat * rnorm
    return Bound.of(2.0 * rnorm / (g - d_hat - rnorm + math.sqrt(max(disc, 0.0))))


def error_bound_cor2(
    problem: NEPvProblem, v_hat, d_hat: float, root_tol: float = 1e-12
):
    """Root-based (eta_hat, tau_hat) error bounds at an approximate solution."""
    gap, rnorm = hat_gap_data(problem, v_hat)
    eta = solve_smallest_root(gap.g, d_hat, rnorm, gap.zeta, root_tol)
    if eta is None:
        reason = "no-root-below-zeta"
        return Bound.absent(reason), Bound.absent(reason)
    return Bound.of(eta), Bound.of(eta / math.sqrt(1.0 + eta * eta))


def error_bound_gamma(problem: NEPvProblem, v_hat, d_hat: float) -> Bound:
    """Rule-of-thumb error estimate ||R||_2 / (g_hat - d_hat)."""
    gap, rnorm = hat_gap_data(problem, v_hat)
    if gap.g <= d_hat:
        return Bound.absent("g-le-d")
    return Bound.of(rnorm / (gap.g - d_hat))


def estimate_d_hat(
    problem: NEPvProblem,
    v_hat,
    sampler: SamplerConfig,
    analytic_d1: Optional[float] = None,
    analytic_d2: Optional[float] = None,
    xi0: float = 0.5,
    refine_passes: int = 1,
):
    """Lipschitz estimate d_hat centred at the current iterate.

    Mirrors the a priori radius refinement: a coarse pass at xi0 fixes the
    scale via the rule-of-thumb error 2*||R||/(g_hat - d_hat), then the
    full sampler re-estimates inside the refined ball.  Returns
    (d_hat, xi, tags).
    """
    gap, rnorm = hat_gap_data(problem, v_hat)
    coarse = SamplerConfig(
        samples=max(100, sampler.samples // 5),
        seed=sampler.seed,
        max_shrink=sampler.max_shrink,
    )
    d1, d2, tags = estimate_d(
        problem, v_hat, xi0, coarse, analytic_d1=analytic_d1, analytic_d2=analytic_d2
    )
    xi = xi0
    for _ in range(max(refine_passes, 0)):
        d_hat = d1 + d2
        if rnorm > 0 and gap.g > d_hat:
            xi = min(max(2.0 * rnorm / (gap.g - d_hat), 1e-12), xi0)
        d1, d2, tags = estimate_d(
            problem, v_hat, xi, sampler, analytic_d1=analytic_d1, analytic_d2=analytic_d2
        )
    if refine_passes <= 0:
        d1, d2, tags = estimate_d(
            problem, v_hat, xi, sampler, analytic_d1=analytic_d1, analytic_d2=analytic_d2
        )
    return d1 + d2, xi, tags


@dataclass(frozen=True)
class ErrorReport:
    """All a posteriori quantities at one approximate solution."""

    gap: GapData
    rnorm: float
    d_hat: float
    xi_hat: Bound
    eta_hat: Bound
    tau_hat: Bound
    gamma_hat: Bound


def error_report(
    problem: NEPvProblem, v_hat, d_hat: float, root_tol: float = 1e-12
) -> ErrorReport:
    """Assemble the three error bounds sharing one corrected-operator pass."""
    gap, rnorm = hat_gap_data(problem, v_hat)
    g = gap.g

    if rnorm < 0.5 * g - d_hat:
        disc = (g - d_hat - rnorm) ** 2 - 4.0 * d_hat * rnorm
        xi_hat = Bound.of(
            2.0 * rnorm / (g - d_hat - rnorm + math.sqrt(max(disc, 0.0)))
        )
    else:
        xi_hat = Bound.absent("hypothesis-failed")

    eta = solve_smallest_root(g, d_hat, rnorm, gap.zeta, root_tol)
    if eta is None:
        eta_hat = Bound.absent("no-root-below-zeta")
        tau_hat = Bound.absent("no-root-below-zeta")
    else:
        eta_hat = Bound.of(eta)
        tau_hat = Bound.of(eta / math.sqrt(1.0 + eta * eta))

    if g > d_hat:
        gamma_hat = Bound.of(rnorm / (g - d_hat))
    else:
        gamma_hat = Bound.absent("g-le-d")

    return ErrorReport(
        gap=gap,
        rnorm=rnorm,
        d_hat=d_hat,
        xi_hat=xi_hat,
        eta_hat=eta_hat,
        tau_hat=tau_hat,
        gamma_hat=gamma_hat,
    )
