"""A priori perturbation analysis for nonlinear eigenvector problems.

Given a solved base problem and a perturbed companion, this module
quantifies the perturbation (delta0, delta1, delta2, their sum delta),
the Lipschitz behaviour of the operator family near the solution
(d1, d2, their sum d), the spectral gap quantities (g, h, zeta), and
turns them into computable bounds on the subspace rotation:

* xi_star:   2*delta / (g - d - delta + sqrt((g - d - delta)^2 - 4*d*delta)),
             valid when delta < g/2 - d;
* tau_star:  eta/sqrt(1 + eta^2) at the smallest positive root eta of
             f(eta) = g*eta - d*eta*sqrt(1 + eta^2) - (1 + eta^2)*delta
             on (0, zeta), with zeta = sqrt(g) / (sqrt(g) + sqrt(2 h));
* gamma_star: the first-order rule of thumb delta / (g - d);
* kappa:      the condition number 1 / (g - d).

delta0 is computed exactly; delta1, delta2, d1, d2 default to a seeded
Monte-Carlo supremum estimator over a ball of subspaces around the
solution and are therefore reported lower bounds of the true suprema.
Applications can substitute closed-form values where available.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .linalg import orthonormalize, projector, sin_theta_dist, spectral_norm
from .problem import NEPvProblem, oriented_operator, residual

__all__ = [
    "AnalyticBounds",
    "Bound",
    "BoundReport",
    "GapData",
    "GapViolationError",
    "PerturbationData",
    "SamplerConfig",
    "bound_report",
    "bound_thm1",
    "bound_thm2",
    "compute_gap",
    "condition_number",
    "estimate_d",
    "estimate_delta",
    "hermitian_special_case_bound",
    "perturbation_data",
    "rule_of_thumb_bound",
    "sample_basis_near",
    "solve_smallest_root",
]

# Upper limit of zeta = sqrt(g)/(sqrt(g) + sqrt(2h)) given 0 < g <= h.
ZETA_SUP = 1.0 / (1.0 + math.sqrt(2.0))

# Smallest sampling radius used by the refinement pass.
_XI_FLOOR = 1e-12


class GapViolationError(ValueError):
    """The required eigenvalue gap at the solution is not positive."""


@dataclass(frozen=True)
class GapData:
    """Spectral gap quantities of the oriented operator at the solution.

    g is the gap between the (k+1)-th and k-th eigenvalues, h the largest
    spread max_j lambda_{k+j} - lambda_j over j = 1..k, and zeta the root
    search ceiling sqrt(g) / (sqrt(g) + sqrt(2 h)).
    """

    g: float
    h: float
    zeta: float


def compute_gap(problem: NEPvProblem, v_star, resid_tol: float = 1e-12) -> GapData:
    """Gap quantities g, h, zeta of A(P*) at a solved basis V*.

    Requires n >= 2k so that lambda_{2k} exists, and a relative residual
    at V* of at most resid_tol; a positive gap g is mandatory.
    """
    if problem.n < 2 * problem.k:
        raise ValueError(
            f"gap quantities need n >= 2k, got n={problem.n}, k={problem.k}"
        )
    _, rnorm = residual(problem, v_star)
    a = oriented_operator(problem, projector(v_star))
    anorm = spectral_norm(a)
    if rnorm > resid_tol * max(anorm, 1e-300):
        raise ValueError(
            f"basis does not solve the problem: relative residual "
            f"{rnorm / anorm:.3e} exceeds {resid_tol:.3e}"
        )
    w = np.linalg.eigvalsh(a)
    k = problem.k
    g = float(w[k] - w[k - 1])
    h = float(max(w[k + j] - w[j] for j in range(k)))
    if g <= 0:
        raise GapViolationError(f"eigenvalue gap at the solution is {g:.3e}")
    zeta = math.sqrt(g) / (math.sqrt(g) + math.sqrt(2.0 * h))
    return GapData(g=g, h=h, zeta=zeta)


@dataclass(frozen=True)
class Bound:
    """A bound value that is either available or absent for a stated reason."""

    value: Optional[float] = None
    reason: Optional[str] = None

    def __post_init__(self):
        if (self.value is None) == (self.reason is None):
            raise ValueError("exactly one of value and reason must be set")

    @classmethod
    def of(cls, value: float) -> "Bound":
        return cls(value=float(value))

    @classmethod
    def absent(cls, reason: str) -> "Bound":
        return cls(reason=reason)

    @property
    def available(self) -> bool:
        return self.value is not None


@dataclass(frozen=True)
class SamplerConfig:
    """Settings of the Monte-Carlo supremum estimator.

    samples bases are drawn per estimate; the generator is seeded from
    seed through numpy's PCG64 stream, so estimates are reproducible by
    value.  max_shrink bounds the rejection loop that keeps samples
    inside the requested ball.
    """

    samples: int = 500
    seed: int = 0
    max_shrink: int = 60

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError(f"samples must be positive, got {self.samples}")


def sample_basis_near(v_star, xi: float, rng, max_shrink: int = 60) -> np.ndarray:
    """Draw an orthonormal basis within sin-theta distance xi of V*.

    The Gaussian direction is scaled so the sample lands near the ball
    boundary (where suprema of norm ratios are typically attained) and is
    shrunk geometrically on overshoot.
    """
    n, k = v_star.shape
    g = rng.standard_normal((n, k))
    ortho_part = g - v_star @ (v_star.conj().T @ g)
    scale = xi / max(spectral_norm(ortho_part), 1e-300)
    for _ in range(max_shrink):
        v = orthonormalize(v_star + scale * g)
        if sin_theta_dist(v_star, v) <= xi:
            return v
        scale *= 0.8
    raise RuntimeError(f"could not place a sample inside the ball of radius {xi:.3e}")


def _map_or_zero(problem: NEPvProblem, which: int):
    return problem.a1 if which == 1 else problem.a2


def estimate_delta(
    problem: NEPvProblem,
    perturbed: NEPvProblem,
    v_star,
    xi: float,
    sampler: SamplerConfig,
    analytic_delta1: Optional[float] = None,
    analytic_delta2: Optional[float] = None,
):
    """Perturbation magnitudes (delta0, delta1, delta2) with method tags.

    delta0 = ||a0~ - a0||_2 exactly.  delta1 and delta2 are suprema of
    ||ai~(P) - ai(P)||_2 over projectors P within sin-theta distance xi
    of the solution; sampled values are lower bounds of the suprema.
    Closed-form values supplied by the caller take precedence.
    """
    if not 0 < xi <= 1:
        raise ValueError(f"xi must lie in (0, 1], got {xi}")
    if (problem.n, problem.k) != (perturbed.n, perturbed.k):
        raise ValueError("base and perturbed problems must share n and k")
    delta0 = spectral_norm(perturbed.a0 - problem.a0)
    out = [delta0, 0.0, 0.0]
    tags = {"delta0": "analytic"}

    analytic = {1: analytic_delta1, 2: analytic_delta2}
    sampled = []
    for which in (1, 2):
        base_map = _map_or_zero(problem, which)
        pert_map = _map_or_zero(perturbed, which)
        if analytic[which] is not None:
            out[which] = float(analytic[which])
            tags[f"delta{which}"] = "analytic"
        elif base_map is None and pert_map is None:
            tags[f"delta{which}"] = "analytic"
        else:
            sampled.append(which)
            tags[f"delta{which}"] = f"sampled(m={sampler.samples},seed={sampler.seed})"

    if sampled:
        rng = np.random.Generator(np.random.PCG64(sampler.seed))
        sup = {which: 0.0 for which in sampled}
        zero = np.zeros((problem.n, problem.n))
        for _ in range(sampler.samples):
            v = sample_basis_near(v_star, xi, rng, sampler.max_shrink)
            p = projector(v)
            for which in sampled:
                base_map = _map_or_zero(problem, which)
                pert_map = _map_or_zero(perturbed, which)
                base_val = base_map(p) if base_map is not None else zero
                pert_val = pert_map(p) if pert_map is not None else zero
                sup[which] = max(sup[which], spectral_norm(pert_val - base_val))
        for which in sampled:
            out[which] = sup[which]

    return out[0], out[1], out[2], tags


def estimate_d(
    problem: NEPvProblem,
    center_v,
    xi: float,
    sampler: SamplerConfig,
    analytic_d1: Optional[float] = None,
    analytic_d2: Optional[float] = None,
):
    """Lipschitz estimates (d1, d2) of a1 and a2 around a center basis.

    di is the supremum of ||ai(P) - ai(P_c)||_2 / ||P - P_c||_2 over
    sampled projectors with 0 < ||P - P_c||_2 <= xi.  Sampled values are
    lower bounds of the suprema; caller-supplied closed forms win.
    """
    if not 0 < xi <= 1:
        raise ValueError(f"xi must lie in (0, 1], got {xi}")
    out = [0.0, 0.0]
    tags = {}
    analytic = {1: analytic_d1, 2: analytic_d2}
    sampled = []
    for which in (1, 2):
        if analytic[which] is not None:
            out[which - 1] = float(analytic[which])
            tags[f"d{which}"] = "analytic"
        elif _map_or_zero(problem, which) is None:
            tags[f"d{which}"] = "analytic"
        else:
            sampled.append(which)
            tags[f"d{which}"] = f"sampled(m={sampler.samples},seed={sampler.seed})"

    if sampled:
        rng = np.random.Generator(np.random.PCG64(sampler.seed))
        p_center = projector(center_v)
        at_center = {
            which: _map_or_zero(problem, which)(p_center) for which in sampled
        }
        sup = {which: 0.0 for which in sampled}
        for _ in range(sampler.samples):
            v = sample_basis_near(center_v, xi, rng, sampler.max_shrink)
            dist = sin_theta_dist(center_v, v)
            if dist == 0.0:
                continue
            p = projector(v)
            for which in sampled:
                diff = spectral_norm(_map_or_zero(problem, which)(p) - at_center[which])
                sup[which] = max(sup[which], diff / dist)
        for which in sampled:
            out[which - 1] = sup[which]

    return out[0], out[1], tags


@dataclass(frozen=True)
class AnalyticBounds:
    """Closed-form values that replace sampled estimates where registered."""

    delta1: Optional[float] = None
    delta2: Optional[float] = None
    d1: Optional[float] = None
    d2: Optional[float] = None


@dataclass(frozen=True)
class PerturbationData:
    """Perturbation magnitudes and Lipschitz estimates near a solution.

    delta and d are exact sums of their parts by construction.  xi_ball
    records the sampling radius actually used; method maps each component
    to 'analytic' or 'sampled(m=...,seed=...)'.
    """

    delta0: float
    delta1: float
    delta2: float
    d1: float
    d2: float
    xi_ball: float
    method: dict = field(default_factory=dict)

    @property
    def delta(self) -> float:
        return self.delta0 + self.delta1 + self.delta2

    @property
    def d(self) -> float:
        return self.d1 + self.d2


def refine_xi(delta: float, g: float, d: float, xi0: float) -> float:
    """Shrink the sampling radius toward the scale 2*delta/(g - d)."""
    if delta > 0 and g > d:
        return min(max(2.0 * delta / (g - d), _XI_FLOOR), xi0)
    return xi0


def perturbation_data(
    problem: NEPvProblem,
    perturbed: NEPvProblem,
    v_star,
    gap: GapData,
    sampler: SamplerConfig,
    analytic: Optional[AnalyticBounds] = None,
    xi0: float = 0.5,
    refine_passes: int = 1,
) -> PerturbationData:
    """Estimate delta and d with a coarse pass plus radius refinement.

    A first pass samples at radius xi0; each refinement pass recomputes
    the radius from the current delta and d via 2*delta/(g - d) and
    re-estimates, so the final ball matches the scale of the expected
    subspace rotation.  The coarse pass uses fewer samples since it only
    fixes the radius.
    """
    analytic = analytic or AnalyticBounds()
    coarse = SamplerConfig(
        samples=max(100, sampler.samples // 5),
        seed=sampler.seed,
        max_shrink=sampler.max_shrink,
    )

    def estimate(xi, cfg):
        d0, d1v, d2v, dtags = estimate_delta(
            problem, perturbed, v_star, xi, cfg,
            analytic_delta1=analytic.delta1, analytic_delta2=analytic.delta2,
        )
        l1, l2, ltags = estimate_d(
            problem, v_star, xi, cfg,
            analytic_d1=analytic.d1, analytic_d2=analytic.d2,
        )
        return d0, d1v, d2v, l1, l2, {**dtags, **ltags}

    xi = xi0
    d0, d1v, d2v, l1, l2, tags = estimate(xi, coarse)
    for _ in range(max(refine_passes, 0)):
        xi_new = refine_xi(d0 + d1v + d2v, gap.g, l1 + l2, xi0)
        xi = xi_new
        d0, d1v, d2v, l1, l2, tags = estimate(xi, sampler)
    if refine_passes <= 0:
        d0, d1v, d2v, l1, l2, tags = estimate(xi, sampler)

    return PerturbationData(
        delta0=d0, delta1=d1v, delta2=d2v, d1=l1, d2=l2, xi_ball=xi, method=tags
    )


def bound_thm1(gap: GapData, pert: PerturbationData) -> Bound:
    """Closed-form sin-theta bound xi_star, valid when delta < g/2 - d.

    Under the hypothesis the discriminant (g - d - delta)^2 - 4 d delta
    is positive and the returned value lies in [0, 1).
    """
    g, d, delta = gap.g, pert.d, pert.delta
    if not delta < 0.5 * g - d:
        return Bound.absent("hypothesis-failed")
    disc = (g - d - delta) ** 2 - 4.0 * d * delta
    xi = 2.0 * delta / (g - d - delta + math.sqrt(max(disc, 0.0)))
    return Bound.of(xi)


def _f(eta: float, g: float, d: float, delta: float) -> float:
    return g * eta - d * eta * math.sqrt(1.0 + eta * eta) - (1.0 + eta * eta) * delta


def _f_prime(eta: float, g: float, d: float, delta: float) -> float:
    s = math.sqrt(1.0 + eta * eta)
    return g - d * (s + eta * eta / s) - 2.0 * eta * delta


def solve_smallest_root(
    g: float,
    d: float,
    delta: float,
    zeta: float,
    root_tol: float = 1e-12,
    scan_points: int = 4096,
) -> Optional[float]:
    """Smallest positive root of f on (0, zeta), or None when f < 0 throughout.

    f(0) = -delta <= 0 anchors the left sign, so a uniform scan brackets
    the first sign change; bisection then shrinks the bracket and a
    safeguarded Newton polish restores full relative accuracy for roots
    far below the scan resolution.
    """
    if delta == 0.0:
        return 0.0
    lo, flo = 0.0, -delta
    hi = None
    for i in range(1, scan_points + 1):
        x = zeta * i / scan_points
        fx = _f(x, g, d, delta)
        if fx >= 0.0:
            hi, fhi = x, fx
            break
        lo, flo = x, fx
    if hi is None:
        return None

    while hi - lo > 1e-15 * zeta:
        mid = 0.5 * (lo + hi)
        fmid = _f(mid, g, d, delta)
        if fmid >= 0.0:
            hi, fhi = mid, fmid
        else:
            lo, flo = mid, fmid

    # Newton polish, kept inside the bracket; bisection alone leaves an
    # absolute error near 1e-15*zeta, too coarse for roots of order 1e-14.
    eta = 0.5 * (lo + hi)
    for _ in range(8):
        fval = _f(eta, g, d, delta)
        fder = _f_prime(eta, g, d, delta)
        if fder == 0.0:
            break
        step = fval / fder
        candidate = eta - step
        if not lo <= candidate <= hi:
            break
        if candidate == eta:
            break
        eta = candidate

    resid = abs(_f(eta, g, d, delta))
    if resid > root_tol * max(g, delta, 1.0):
        raise ArithmeticError(
            f"root residual {resid:.3e} exceeds tolerance for (g={g}, d={d}, "
            f"delta={delta})"
        )
    return eta


def bound_thm2(gap: GapData, pert: PerturbationData, root_tol: float = 1e-12):
    """Root-based bounds (eta_star, tau_star) on tan and sin of the rotation.

    eta_star is the smallest positive root of f on (0, zeta) and
    tau_star = eta_star / sqrt(1 + eta_star^2).  Both are absent with
    reason 'no-root-below-zeta' when f stays negative on the interval.
    """
    eta = solve_smallest_root(gap.g, pert.d, pert.delta, gap.zeta, root_tol)
    if eta is None:
        reason = "no-root-below-zeta"
        return Bound.absent(reason), Bound.absent(reason)
    tau = eta / math.sqrt(1.0 + eta * eta)
    return Bound.of(eta), Bound.of(tau)


def condition_number(gap: GapData, pert: PerturbationData) -> Bound:
    """Absolute condition number 1 / (g - d) of the solution subspace."""
    if gap.g <= pert.d:
        return Bound.absent("g-le-d")
    return Bound.of(1.0 / (gap.g - pert.d))


def rule_of_thumb_bound(gap: GapData, pert: PerturbationData) -> Bound:
    """First-order estimate gamma_star = delta / (g - d) = kappa * delta."""
    if gap.g <= pert.d:
        return Bound.absent("g-le-d")
    return Bound.of(pert.delta / (gap.g - pert.d))


def hermitian_special_case_bound(g: float, delta: float) -> Bound:
    """Tangent bound 2*delta / (g + sqrt(g^2 - 4*delta^2)) for fixed operators.

    This is the d = 0 specialization: the eta root of f collapses to a
    closed form, valid when delta <= g/2.
    """
    if g <= 0:
        raise ValueError(f"gap must be positive, got {g}")
    if delta < 0:
        raise ValueError(f"delta must be nonnegative, got {delta}")
    if delta > 0.5 * g:
        return Bound.absent("hypothesis-failed")
    return Bound.of(2.0 * delta / (g + math.sqrt(g * g - 4.0 * delta * delta)))


@dataclass(frozen=True)
class BoundReport:
    """All a priori bounds for one (problem, perturbation) pair."""

    gap: GapData
    pert: PerturbationData
    kappa: Bound
    xi_star: Bound
    eta_star: Bound
    tau_star: Bound
    gamma_star: Bound


def bound_report(
    gap: GapData, pert: PerturbationData, root_tol: float = 1e-12
) -> BoundReport:
    """Assemble kappa, xi_star, (eta, tau)_star and gamma_star in one record."""
    eta, tau = bound_thm2(gap, pert, root_tol)
    return BoundReport(
        gap=gap,
        pert=pert,
        kappa=condition_number(gap, pert),
        xi_star=bound_thm1(gap, pert),
        eta_star=eta,
        tau_star=tau,
        gamma_star=rule_of_thumb_bound(gap, pert),
    )
