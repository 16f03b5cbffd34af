"""Experiment runner: sweeps, result rows, CSV output, and run metadata.

Each sweep point is pure given its derived seed, so points can run on a
thread pool; rows are emitted in sweep order regardless of completion
order.  Seeds derive from the master seed and the point's parameter
values (not its index), so subsetting a sweep reproduces the same rows.
"""

import csv
import io
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

from . import __version__
from .config import ExperimentSpec, emit_config
from .errorbounds import error_report, estimate_d_hat
from .kohn_sham import KsConfig, build_ks_problem, build_perturbed_ks, ks_analytic_bounds
from .linalg import (
    projector,
    random_orthonormal,
    sin_theta_dist,
    spectral_norm,
    symmetrize,
)
from .perturbation import (
    AnalyticBounds,
    Bound,
    SamplerConfig,
    bound_report,
    compute_gap,
    perturbation_data,
)
from .problem import (
    NEPvProblem,
    default_initial_basis,
    evaluate,
    residual,
    scf_solve,
    solve_reference,
)
from .trace_ratio import (
    TraceRatioConfig,
    analytic_d_bound,
    analytic_delta2_bound,
    build_perturbed_trace_ratio,
    build_trace_ratio_problem,
    generate_matrices,
)

__all__ = [
    "COLUMNS",
    "ResultRow",
    "derive_seed",
    "run_experiment",
    "rows_to_csv",
    "write_outputs",
]

# frozen CSV layout; golden-file tested
COLUMNS = (
    "kind", "h", "eps", "beta", "delta_target", "l", "seed", "n", "k",
    "init", "converged", "rel_residual", "g", "d", "g_over_d", "kappa",
    "delta", "chi", "xi_star", "xi_reason", "tau_star", "tau_reason",
    "gamma_star", "gamma_reason", "method_delta", "method_d",
)


@dataclass(frozen=True)
class ResultRow:
    """One CSV row; None fields serialize as '-'."""

    kind: str
    h: Optional[float] = None
    eps: Optional[float] = None
    beta: Optional[float] = None
    delta_target: Optional[float] = None
    l: Optional[int] = None
    seed: int = 0
    n: int = 0
    k: int = 0
    init: str = "default"
    converged: Optional[bool] = None
    rel_residual: Optional[float] = None
    g: Optional[float] = None
    d: Optional[float] = None
    g_over_d: Optional[float] = None
    kappa: Optional[float] = None
    delta: Optional[float] = None
    chi: Optional[float] = None
    xi_star: Optional[float] = None
    xi_reason: str = ""
    tau_star: Optional[float] = None
    tau_reason: str = ""
    gamma_star: Optional[float] = None
    gamma_reason: str = ""
    method_delta: str = ""
    method_d: str = ""


def derive_seed(master: int, stream: str, *values) -> int:
    """Derive a 64-bit child seed keyed by stream name and parameter values.

    Floats contribute their IEEE-754 bit patterns, so equal values give
    equal seeds on every platform and sweep subsets reproduce full-run
    rows.
    """
    tags = [int(master) & 0xFFFFFFFFFFFFFFFF, zlib.crc32(stream.encode())]
    for v in values:
        if isinstance(v, float):
            tags.append(int(np.float64(v).view(np.uint64)))
        else:
            tags.append(int(v) & 0xFFFFFFFFFFFFFFFF)
    ss = np.random.SeedSequence(tags)
    return int(ss.generate_state(1, np.uint64)[0])


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def _bound_cols(b: Bound):
    return (b.value, "") if b.available else (None, b.reason)


def _method_tag(tags: dict, keys) -> str:
    return ";".join(str(tags.get(key, "none")) for key in keys)


def _raw_kappa(g: float, d: float) -> Optional[float]:
    return 1.0 / (g - d) if g != d else None


class _Runner:
    """Per-spec state: base-problem caches shared across sweep points."""

    def __init__(self, spec: ExperimentSpec):
        self.spec = spec
        self._cache = {}

    def run(self, workers: int = 1):
        points = list(enumerate(self.spec.sweep))
        # warm the per-instance cache serially so threads only do point work
        for _, point in points:
            self._base(point)
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(lambda ip: self._point(ip[1]), points))
        else:
            results = [self._point(point) for _, point in points]
        rows = []
        for chunk in results:
            rows.extend(chunk)
        return rows

    # instance assembly -------------------------------------------------

    def _base(self, point: dict):
        kind = self.spec.kind
        if kind.startswith("ks"):
            return self._ks_base(point["h"])
        if kind.startswith("tr"):
            return self._tr_base(point["beta"])
        return self._single_base()

    def _ks_base(self, h: float):
        key = ("ks", h)
        if key not in self._cache:
            p = self.spec.params
            cfg = KsConfig(n=p["n"], k=p["k"], h_grid=h, gamma=p["gamma"])
            problem = build_ks_problem(cfg)
            v_star, _ = solve_reference(problem, default_initial_basis(problem))
            self._cache[key] = (cfg, problem, v_star, compute_gap(problem, v_star))
        return self._cache[key]

    def _tr_base(self, beta: float):
        key = ("tr", beta)
        if key not in self._cache:
            p = self.spec.params
            cfg = TraceRatioConfig(n=p["n"], k=p["k"], beta=beta, eps=0.0,
                                   seed=p["seed"])
            mats = generate_matrices(cfg)
            problem = build_trace_ratio_problem(cfg)
            v_star, _ = solve_reference(problem, default_initial_basis(problem))
            self._cache[key] = (cfg, mats, problem, v_star,
                                compute_gap(problem, v_star))
        return self._cache[key]

    def _single_base(self):
        key = ("single",)
        if key not in self._cache:
            p = self.spec.params
            if self.spec.section == "ks":
                cfg = KsConfig(n=p["n"], k=p["k"], h_grid=p["h"], gamma=p["gamma"])
                problem = build_ks_problem(cfg)
            elif self.spec.section == "tr":
                cfg = TraceRatioConfig(n=p["n"], k=p["k"], beta=p["beta"],
                                       eps=0.0, seed=p["seed"])
                problem = build_trace_ratio_problem(cfg)
            else:
                gen = _rng(p["seed"])
                a0 = symmetrize(gen.standard_normal((p["n"], p["n"])))
                problem = NEPvProblem(n=p["n"], k=p["k"], a0=a0, end=p["end"])
            self._cache[key] = problem
        return self._cache[key]

    def _continuation_solve(self, perturbed, v_star):
        """Solve the perturbed problem from the base solution, polished.

        The stopping tolerance alone can leave the perturbed basis several
        orders closer to the start than to the perturbed solution when the
        perturbation is tiny, which would floor the measured distance; the
        polish steps push to the roundoff floor instead.
        """
        v_tilde, trace = solve_reference(perturbed, v_star)
        _, rnorm = residual(perturbed, v_tilde)
        anorm = spectral_norm(evaluate(perturbed, projector(v_tilde)))
        return v_tilde, trace, rnorm / anorm if anorm > 0 else rnorm

    # point runners -----------------------------------------------------

    def _point(self, point: dict):
        kind = self.spec.kind
        if kind == "ks-perturb":
            return [self._ks_perturb(point)]
        if kind == "tr-perturb":
            return [self._tr_perturb(point)]
        if kind == "ks-scf-errbounds":
            return self._ks_errbounds(point)
        if kind == "tr-scf-errbounds":
            return self._tr_errbounds(point)
        return self._single_solve()

    def _ks_perturb(self, point: dict) -> ResultRow:
        spec = self.spec
        h, eps1, eps2 = point["h"], point["eps1"], point["eps2"]
        cfg, problem, v_star, gap = self._ks_base(h)
        # one random potential direction per grid, scaled by eps, so the
        # sweep's measured distance is exactly linear in eps
        pcfg = KsConfig(
            n=cfg.n, k=cfg.k, h_grid=h, gamma=cfg.gamma, eps1=eps1, eps2=eps2,
            seed=derive_seed(spec.seed, "ks-vion", h),
        )
        perturbed = build_perturbed_ks(pcfg)
        v_tilde, trace, rel = self._continuation_solve(perturbed, v_star)
        chi = sin_theta_dist(v_star, v_tilde)
        sampler = SamplerConfig(
            samples=spec.samples,
            seed=derive_seed(spec.seed, "ks-sampler", h, eps1, eps2),
        )
        pert = perturbation_data(
            problem, perturbed, v_star, gap, sampler,
            analytic=ks_analytic_bounds(pcfg),
            refine_passes=spec.refine_passes,
        )
        report = bound_report(gap, pert)
        xi, xi_r = _bound_cols(report.xi_star)
        tau, tau_r = _bound_cols(report.tau_star)
        gam, gam_r = _bound_cols(report.gamma_star)
        return ResultRow(
            kind=spec.kind, h=h, eps=eps1, seed=spec.seed, n=cfg.n, k=cfg.k,
            init=spec.init, converged=trace.converged, rel_residual=rel,
            g=gap.g, d=pert.d, g_over_d=gap.g / pert.d,
            kappa=_raw_kappa(gap.g, pert.d), delta=pert.delta, chi=chi,
            xi_star=xi, xi_reason=xi_r, tau_star=tau, tau_reason=tau_r,
            gamma_star=gam, gamma_reason=gam_r,
            method_delta=_method_tag(pert.method, ("delta1", "delta2")),
            method_d=_method_tag(pert.method, ("d1", "d2")),
        )

    def _tr_eps_for_target(self, cfg: TraceRatioConfig, mats, target: float,
                           delta_seed: int) -> float:
        """Rescale eps so the aggregate delta hits the target within 1%.

        delta(eps) = ||eps dC|| + delta2_bound(eps dA, eps dB) is nearly
        linear in eps, so one proportional step from a small probe followed
        by correction steps converges immediately.
        """
        unit = generate_matrices(
            TraceRatioConfig(n=cfg.n, k=cfg.k, beta=cfg.beta, eps=1.0,
                             seed=cfg.seed),
            delta_seed,
        )
        dc_norm = spectral_norm(unit.dc)

        def delta_of(eps: float) -> float:
            return eps * dc_norm + analytic_delta2_bound(
                mats.a, mats.b, eps * unit.da, eps * unit.db, cfg.k
            )

        probe = 1e-8
        eps = target * probe / delta_of(probe)
        for _ in range(8):
            value = delta_of(eps)
            if abs(value - target) <= 0.01 * target:
                break
            eps *= target / value
        return eps

    def _tr_perturb(self, point: dict) -> ResultRow:
        spec = self.spec
        beta = point["beta"]
        cfg, mats, problem, v_star, gap = self._tr_base(beta)
        target = point.get("delta_target")
        mag = target if target is not None else point["eps"]
        delta_seed = derive_seed(spec.seed, "tr-delta", beta, mag)
        if target is not None:
            eps = self._tr_eps_for_target(cfg, mats, target, delta_seed)
        else:
            eps = point["eps"]
        pcfg = TraceRatioConfig(n=cfg.n, k=cfg.k, beta=beta, eps=eps,
                                seed=cfg.seed)
        pmats = generate_matrices(pcfg, delta_seed)
        perturbed = build_perturbed_trace_ratio(pcfg, delta_seed)
        v_tilde, trace, rel = self._continuation_solve(perturbed, v_star)
        chi = sin_theta_dist(v_star, v_tilde)
        analytic = AnalyticBounds(
            delta1=0.0,
            delta2=analytic_delta2_bound(mats.a, mats.b, pmats.da, pmats.db, cfg.k),
            d1=0.0,
            d2=analytic_d_bound(mats.a, mats.b, cfg.k),
        )
        sampler = SamplerConfig(
            samples=spec.samples,
            seed=derive_seed(spec.seed, "tr-sampler", beta, eps),
        )
        pert = perturbation_data(
            problem, perturbed, v_star, gap, sampler, analytic=analytic,
            refine_passes=spec.refine_passes,
        )
        report = bound_report(gap, pert)
        xi, xi_r = _bound_cols(report.xi_star)
        tau, tau_r = _bound_cols(report.tau_star)
        gam, gam_r = _bound_cols(report.gamma_star)
        return ResultRow(
            kind=spec.kind, beta=beta, eps=eps, delta_target=target,
            seed=spec.seed, n=cfg.n, k=cfg.k, init=spec.init,
            converged=trace.converged, rel_residual=rel,
            g=gap.g, d=pert.d, g_over_d=gap.g / pert.d,
            kappa=_raw_kappa(gap.g, pert.d), delta=pert.delta, chi=chi,
            xi_star=xi, xi_reason=xi_r, tau_star=tau, tau_reason=tau_r,
            gamma_star=gam, gamma_reason=gam_r,
            method_delta=_method_tag(pert.method, ("delta1", "delta2")),
            method_d=_method_tag(pert.method, ("d1", "d2")),
        )

    def _errbound_rows(self, problem, v_ref, trace, d_hat, method_d,
                       h=None, beta=None):
        spec = self.spec
        rows = []
        for idx, v in enumerate(trace.iterates):
            rep = error_report(problem, v, d_hat)
            xi, xi_r = _bound_cols(rep.xi_hat)
            tau, tau_r = _bound_cols(rep.tau_hat)
            gam, gam_r = _bound_cols(rep.gamma_hat)
            rows.append(ResultRow(
                kind=spec.kind, h=h, beta=beta, l=idx + 1, seed=spec.seed,
                n=problem.n, k=problem.k, init=spec.init,
                converged=trace.converged,
                rel_residual=trace.relative_residuals[idx],
                g=rep.gap.g, d=d_hat, g_over_d=rep.gap.g / d_hat,
                kappa=_raw_kappa(rep.gap.g, d_hat), delta=rep.rnorm,
                chi=sin_theta_dist(v, v_ref),
                xi_star=xi, xi_reason=xi_r, tau_star=tau, tau_reason=tau_r,
                gamma_star=gam, gamma_reason=gam_r,
                method_delta="residual", method_d=method_d,
            ))
        return rows

    def _initial_basis(self, problem, *tags):
        if self.spec.init == "random":
            gen = _rng(derive_seed(self.spec.seed, "v0", *tags))
            return random_orthonormal(problem.n, problem.k, gen)
        return default_initial_basis(problem)

    def _ks_errbounds(self, point: dict):
        spec = self.spec
        h = point["h"]
        cfg, problem, v_ref, _ = self._ks_base(h)
        trace = scf_solve(problem, self._initial_basis(problem, h))
        sampler = SamplerConfig(
            samples=spec.samples, seed=derive_seed(spec.seed, "ks-dhat", h)
        )
        analytic = ks_analytic_bounds(cfg)
        d_hat, _, tags = estimate_d_hat(
            problem, trace.iterates[-1], sampler,
            analytic_d1=analytic.d1, analytic_d2=analytic.d2,
            refine_passes=spec.refine_passes,
        )
        return self._errbound_rows(
            problem, v_ref, trace, d_hat,
            _method_tag(tags, ("d1", "d2")), h=h,
        )

    def _tr_errbounds(self, point: dict):
        beta = point["beta"]
        cfg, mats, problem, v_ref, _ = self._tr_base(beta)
        trace = scf_solve(problem, self._initial_basis(problem, beta))
        d_hat = analytic_d_bound(mats.a, mats.b, cfg.k)
        return self._errbound_rows(
            problem, v_ref, trace, d_hat, "analytic;analytic", beta=beta,
        )

    def _single_solve(self):
        spec = self.spec
        problem = self._single_base()
        trace = scf_solve(problem, self._initial_basis(problem))
        v_ref, _ = solve_reference(problem, default_initial_basis(problem))
        rows = []
        for idx, v in enumerate(trace.iterates):
            rows.append(ResultRow(
                kind=spec.kind, l=idx + 1, seed=spec.seed, n=problem.n,
                k=problem.k, init=spec.init, converged=trace.converged,
                rel_residual=trace.relative_residuals[idx],
                chi=sin_theta_dist(v, v_ref),
            ))
        return rows


def run_experiment(spec: ExperimentSpec, workers: int = 1):
    """Run every sweep point and return the result rows in sweep order."""
    if workers < 1:
        raise ValueError(f"workers must be positive, got {workers}")
    return _Runner(spec).run(workers)


def _cell(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return "-" if not np.isfinite(value) else f"{value:.4e}"
    return str(value)


def rows_to_csv(rows) -> str:
    """Serialize rows with the frozen column order and '-' for absent."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    names = [f.name for f in fields(ResultRow)]
    assert tuple(names) == COLUMNS
    for row in rows:
        writer.writerow([_cell(getattr(row, name)) for name in names])
    return buf.getvalue()


def write_outputs(spec: ExperimentSpec, rows, out_path, wall_time: float) -> str:
    """Write the CSV and its .meta sidecar; returns the CSV text written.

    The sidecar echoes the resolved spec (it re-parses to an equal spec)
    with run metadata in comments, keeping the CSV itself byte-stable for
    a given spec and seed.
    """
    text = rows_to_csv(rows)
    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    meta = [
        f"# nepv {__version__}",
        "# prng = PCG64",
        f"# rows = {len(rows)}",
        f"# wall_time_s = {wall_time:.3f}",
        "",
        emit_config(spec),
    ]
    with open(f"{out_path}.meta", "w", encoding="utf-8") as fh:
        fh.write("\n".join(meta))
    return text
