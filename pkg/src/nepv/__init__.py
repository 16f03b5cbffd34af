"""Solvers and computable bounds for eigenvector-dependent nonlinear
eigenvalue problems A(P) V = V Lambda with P = V V^H."""

from .linalg import (
    Eigensystem,
    canonical_angles,
    check_orthonormal,
    eigh_sorted,
    orthonormalize,
    projector,
    random_orthonormal,
    sin_theta_dist,
    spectral_norm,
    symmetrize,
)
from .problem import (
    ContractViolationError,
    NEPvProblem,
    ScfDivergenceError,
    ScfTrace,
    default_initial_basis,
    evaluate,
    residual,
    scf_solve,
    solve_reference,
)
from .perturbation import (
    AnalyticBounds,
    Bound,
    BoundReport,
    GapData,
    GapViolationError,
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
    perturbation_data,
    rule_of_thumb_bound,
    solve_smallest_root,
)
from .errorbounds import (
    BackwardPerturbation,
    ErrorReport,
    backward_perturbation,
    error_bound_cor1,
    error_bound_cor2,
    error_bound_gamma,
    error_report,
    estimate_d_hat,
)
from .kohn_sham import (
    KsConfig,
    build_ks_problem,
    build_laplacian,
    build_perturbed_ks,
    hartree_lipschitz_bound,
    ks_analytic_bounds,
    random_sparse_symmetric,
)
from .trace_ratio import (
    EigSumBounds,
    TraceRatioConfig,
    analytic_d_bound,
    analytic_delta2_bound,
    build_perturbed_trace_ratio,
    build_trace_ratio_problem,
    eig_sum_bounds,
    generate_matrices,
    trace_ratio_objective,
)

__version__ = "0.1.0"

from .config import ConfigError, ExperimentSpec, parse_config, preset
from .experiments import ResultRow, derive_seed, run_experiment, rows_to_csv
