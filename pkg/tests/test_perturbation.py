import math

import numpy as np
import pytest

from nepv import (
    AnalyticBounds,
    Bound,
    GapData,
    GapViolationError,
    NEPvProblem,
    PerturbationData,
    SamplerConfig,
    bound_report,
    bound_thm1,
    bound_thm2,
    compute_gap,
    condition_number,
    estimate_d,
    estimate_delta,
    hermitian_special_case_bound,
    orthonormalize,
    perturbation_data,
    rule_of_thumb_bound,
    sin_theta_dist,
    solve_reference,
    solve_smallest_root,
    symmetrize,
)
from nepv.perturbation import sample_basis_near

rng = np.random.Generator(np.random.PCG64(23))


def diag_problem(values, k):
    return NEPvProblem(n=len(values), k=k, a0=np.diag(np.asarray(values, float)))


def pert_data(delta, d):
    return PerturbationData(delta0=delta, delta1=0.0, delta2=0.0,
                            d1=d, d2=0.0, xi_ball=0.5)


def test_compute_gap_on_known_spectrum():
    # eigenvalues 0, 1, 2, 5, 6, 9: k=2 gives g = 2 - 1 = 1,
    # h = max(2-0, 5-1) = 4, zeta = 1/(1+sqrt(8))
    prob = diag_problem([0.0, 1.0, 2.0, 5.0, 6.0, 9.0], k=2)
    v = np.eye(6)[:, :2]
    gap = compute_gap(prob, v)
    assert gap.g == pytest.approx(1.0)
    assert gap.h == pytest.approx(4.0)
    assert gap.zeta == pytest.approx(1.0 / (1.0 + math.sqrt(8.0)))


def test_compute_gap_needs_two_k_levels():
    prob = diag_problem([0.0, 1.0, 2.0], k=2)
    with pytest.raises(ValueError):
        compute_gap(prob, np.eye(3)[:, :2])


def test_compute_gap_rejects_nonsolution():
    prob = diag_problem([0.0, 1.0, 2.0, 3.0], k=2)
    v = orthonormalize(rng.standard_normal((4, 2)))
    with pytest.raises(ValueError):
        compute_gap(prob, v)


def test_compute_gap_rejects_degenerate_gap():
    prob = diag_problem([0.0, 1.0, 1.0, 3.0], k=2)
    with pytest.raises(GapViolationError):
        compute_gap(prob, np.eye(4)[:, :2])


def test_bound_requires_value_xor_reason():
    with pytest.raises(ValueError):
        Bound()
    with pytest.raises(ValueError):
        Bound(value=1.0, reason="also")
    assert Bound.of(0.5).available
    assert not Bound.absent("why").available


def test_bound_thm1_closed_form():
    gap = GapData(g=1.0, h=1.0, zeta=0.4)
    delta, d = 1e-3, 0.1
    xi = bound_thm1(gap, pert_data(delta, d))
    disc = (1.0 - d - delta) ** 2 - 4 * d * delta
    assert xi.value == pytest.approx(2 * delta / (1.0 - d - delta + math.sqrt(disc)))


def test_bound_thm1_hypothesis_boundary():
    # hypothesis is the strict inequality delta < g/2 - d
    gap = GapData(g=1.0, h=1.0, zeta=0.4)
    assert bound_thm1(gap, pert_data(0.29, 0.2)).available
    assert not bound_thm1(gap, pert_data(0.3, 0.2)).available
    assert bound_thm1(gap, pert_data(0.3, 0.2)).reason == "hypothesis-failed"


def f_of(eta, g, d, delta):
    return g * eta - d * eta * math.sqrt(1 + eta * eta) - (1 + eta * eta) * delta


def test_root_is_a_root_and_smallest():
    g, d, delta, zeta = 1.0, 0.2, 0.05, 0.45
    eta = solve_smallest_root(g, d, delta, zeta)
    assert abs(f_of(eta, g, d, delta)) < 1e-12
    assert 0 < eta < zeta
    # f < 0 strictly before the root
    grid = np.linspace(1e-9, eta * (1 - 1e-9), 200)
    assert all(f_of(x, g, d, delta) < 0 for x in grid)


def test_root_none_when_f_stays_negative():
    # delta too large: no root below zeta
    assert solve_smallest_root(1.0, 0.2, 0.4, 0.45) is None


def test_root_zero_delta():
    assert solve_smallest_root(1.0, 0.2, 0.0, 0.45) == 0.0


@pytest.mark.parametrize("g,delta", [(1.0, 1e-12), (2.5, 1e-6), (0.3, 0.05)])
def test_root_matches_zero_d_closed_form(g, delta):
    zeta = 1.0 / (1.0 + math.sqrt(2.0))  # h = g
    closed = 2 * delta / (g + math.sqrt(g * g - 4 * delta * delta))
    eta = solve_smallest_root(g, 0.0, delta, zeta)
    assert eta == pytest.approx(closed, rel=1e-12)


def test_bound_thm2_reports_tau_and_eta():
    gap = GapData(g=1.0, h=1.0, zeta=0.45)
    eta, tau = bound_thm2(gap, pert_data(0.05, 0.2))
    assert tau.value == pytest.approx(eta.value / math.sqrt(1 + eta.value**2))
    eta2, tau2 = bound_thm2(gap, pert_data(0.4, 0.2))
    assert eta2.reason == tau2.reason == "no-root-below-zeta"


def test_condition_number_and_rule_of_thumb():
    gap = GapData(g=1.0, h=1.0, zeta=0.45)
    assert condition_number(gap, pert_data(0.0, 0.25)).value == pytest.approx(4 / 3)
    assert rule_of_thumb_bound(gap, pert_data(0.03, 0.25)).value == pytest.approx(0.04)
    assert condition_number(gap, pert_data(0.0, 1.0)).reason == "g-le-d"
    assert rule_of_thumb_bound(gap, pert_data(0.03, 1.5)).reason == "g-le-d"


def test_first_order_agreement_of_bounds():
    # at delta -> 0 all three bounds collapse onto kappa * delta
    gap = GapData(g=1.0, h=2.0, zeta=1.0 / (1.0 + 2.0))
    delta, d = 1e-10, 0.2
    pert = pert_data(delta, d)
    kappa = condition_number(gap, pert).value
    xi = bound_thm1(gap, pert).value
    _, tau = bound_thm2(gap, pert)
    gam = rule_of_thumb_bound(gap, pert).value
    for b in (xi, tau.value, gam):
        assert b == pytest.approx(kappa * delta, rel=1e-8)
    # second order: the root bound is the sharper one
    assert tau.value < xi


def test_hermitian_special_case_matches_sin_theta():
    # fixed-operator rotation: bound must contain the measured distance
    n, k = 8, 3
    a = np.diag(np.arange(n, dtype=float))
    e = symmetrize(rng.standard_normal((n, n)))
    e *= 0.1 / np.linalg.norm(e, 2)
    delta = np.linalg.norm(e, 2)
    w, q = np.linalg.eigh(a + e)
    chi = sin_theta_dist(np.eye(n)[:, :k], q[:, :k])
    bound = hermitian_special_case_bound(1.0, delta)
    tau = bound.value / math.sqrt(1 + bound.value**2)
    assert chi <= tau
    with pytest.raises(ValueError):
        hermitian_special_case_bound(-1.0, 0.1)
    assert not hermitian_special_case_bound(1.0, 0.6).available


def test_sample_basis_near_stays_in_ball():
    v = orthonormalize(rng.standard_normal((12, 4)))
    for xi in (1e-8, 1e-3, 0.3):
        for _ in range(20):
            w = sample_basis_near(v, xi, rng)
            assert sin_theta_dist(v, w) <= xi * (1 + 1e-9)


def solved_pair(weight=0.04, eps=1e-5):
    n, k = 10, 3
    a0 = np.diag(np.arange(n, dtype=float))

    def a1(p):
        return weight * np.diag(np.diag(p).real)

    base = NEPvProblem(n=n, k=k, a0=a0, a1=a1)
    shift = symmetrize(rng.standard_normal((n, n)))
    shift *= eps / np.linalg.norm(shift, 2)
    pert = NEPvProblem(n=n, k=k, a0=a0 + shift, a1=a1)
    v_star, _ = solve_reference(base)
    return base, pert, v_star


def test_estimate_delta_exact_and_sampled_parts():
    base, pert, v_star = solved_pair()
    cfg = SamplerConfig(samples=50, seed=3)
    d0, d1, d2, tags = estimate_delta(base, pert, v_star, 0.1, cfg)
    assert d0 == pytest.approx(np.linalg.norm(pert.a0 - base.a0, 2))
    assert d1 == 0.0  # identical a1 maps
    assert d2 == 0.0  # no a2 on either side
    assert tags["delta0"] == "analytic"
    assert "sampled" in tags["delta1"]


def test_estimate_delta_analytic_override_wins():
    base, pert, v_star = solved_pair()
    cfg = SamplerConfig(samples=10, seed=3)
    _, d1, _, tags = estimate_delta(base, pert, v_star, 0.1, cfg,
                                    analytic_delta1=0.125)
    assert d1 == 0.125
    assert tags["delta1"] == "analytic"


def test_estimate_d_is_deterministic_and_bounded():
    base, _, v_star = solved_pair()
    cfg = SamplerConfig(samples=80, seed=9)
    d1a, d2a, tags = estimate_d(base, v_star, 0.2, cfg)
    d1b, d2b, _ = estimate_d(base, v_star, 0.2, cfg)
    assert (d1a, d2a) == (d1b, d2b)
    assert d2a == 0.0
    # diagonal-projection map: |diag(P) - diag(P')| <= ||P - P'||, so the
    # sampled ratio never exceeds the weight
    assert d1a <= 0.04 + 1e-12
    assert "sampled" in tags["d1"]


def test_estimate_d_analytic_override():
    base, _, v_star = solved_pair()
    cfg = SamplerConfig(samples=10, seed=9)
    d1, d2, tags = estimate_d(base, v_star, 0.2, cfg, analytic_d1=0.04)
    assert d1 == 0.04
    assert tags["d1"] == "analytic"
    assert d2 == 0.0


def test_perturbation_data_sums_and_refined_ball():
    base, pert, v_star = solved_pair(eps=1e-6)
    gap = compute_gap(base, v_star)
    data = perturbation_data(base, pert, v_star, gap,
                             SamplerConfig(samples=60, seed=1))
    assert data.delta == pytest.approx(data.delta0 + data.delta1 + data.delta2)
    assert data.d == pytest.approx(data.d1 + data.d2)
    # ball refined to the scale of the expected rotation, far below 0.5
    assert data.xi_ball <= 2.1 * data.delta / (gap.g - data.d)


def test_perturbation_data_with_full_analytic_registration():
    base, pert, v_star = solved_pair()
    gap = compute_gap(base, v_star)
    analytic = AnalyticBounds(delta1=0.0, delta2=0.0, d1=0.04, d2=0.0)
    data = perturbation_data(base, pert, v_star, gap,
                             SamplerConfig(samples=5, seed=1), analytic=analytic)
    assert data.method["d1"] == "analytic"
    assert data.d == pytest.approx(0.04)


def test_bound_report_containment_on_solved_instance():
    base, pert, v_star = solved_pair(eps=1e-7)
    gap = compute_gap(base, v_star)
    data = perturbation_data(base, pert, v_star, gap,
                             SamplerConfig(samples=60, seed=5))
    report = bound_report(gap, data)
    v_tilde, _ = solve_reference(pert, v_star)
    chi = sin_theta_dist(v_star, v_tilde)
    for bound in (report.xi_star, report.tau_star, report.gamma_star):
        assert bound.available
        assert chi <= bound.value
    assert report.tau_star.value < report.xi_star.value
    assert report.kappa.value == pytest.approx(1.0 / (gap.g - data.d))
