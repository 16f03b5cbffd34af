"""Eigenvector-dependent nonlinear eigenvalue problems and the SCF solver.

A problem instance is the operator family A(P) = A0 + A1(P) + A2(P) acting
on n-by-n Hermitian matrices, where P = V V^H is the orthogonal projector
onto the current subspace, A1 is linear in P and A2 is a continuous
nonlinear term.  A solution is an orthonormal V whose columns span the
invariant subspace of A(P) belonging to its k smallest (or largest)
eigenvalues.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .linalg import (
    check_orthonormal,
    eigh_sorted,
    projector,
    spectral_norm,
    symmetrize,
)

__all__ = [
    "ContractViolationError",
    "NEPvProblem",
    "ScfDivergenceError",
    "ScfTrace",
    "default_initial_basis",
    "evaluate",
    "oriented_operator",
    "residual",
    "scf_solve",
    "solve_reference",
]

MatrixMap = Callable[[np.ndarray], np.ndarray]

# Relative Frobenius tolerance for a component map to count as Hermitian.
_HERMITICITY_TOL = 1e-10


class ContractViolationError(ValueError):
    """A component map returned a matrix that is not Hermitian within tolerance."""


class ScfDivergenceError(RuntimeError):
    """The operator family produced non-finite entries during iteration."""

    def __init__(self, iteration: int):
        super().__init__(f"operator evaluation diverged at SCF iteration {iteration}")
        self.iteration = iteration


@dataclass(frozen=True)
class NEPvProblem:
    """Operator family A(P) = a0 + a1(P) + a2(P) with a target spectrum end.

    a1 and a2 may be None, meaning identically zero.  a1 is expected to be
    linear in P and a2 continuous; both must return Hermitian matrices.
    end selects which k eigenvalues define the wanted invariant subspace.
    """

    n: int
    k: int
    a0: np.ndarray
    a1: Optional[MatrixMap] = None
    a2: Optional[MatrixMap] = None
    end: str = "smallest"

    def __post_init__(self):
        if self.end not in ("smallest", "largest"):
            raise ValueError(f"end must be 'smallest' or 'largest', got {self.end!r}")
        if not (1 <= self.k < self.n):
            raise ValueError(f"need 1 <= k < n, got k={self.k}, n={self.n}")
        a0 = symmetrize(self.a0)
        if a0.shape != (self.n, self.n):
            raise ValueError(f"a0 has shape {a0.shape}, expected ({self.n}, {self.n})")
        object.__setattr__(self, "a0", a0)


def _checked_component(problem: NEPvProblem, m, name: str) -> np.ndarray:
    m = np.asarray(m)
    if m.shape != (problem.n, problem.n):
        raise ContractViolationError(
            f"{name}(P) returned shape {m.shape}, expected ({problem.n}, {problem.n})"
        )
    if not np.all(np.isfinite(m)):
        raise ContractViolationError(f"{name}(P) returned non-finite entries")
    herm_err = np.linalg.norm(m - m.conj().T, "fro")
    if herm_err > _HERMITICITY_TOL * max(1.0, np.linalg.norm(m, "fro")):
        raise ContractViolationError(
            f"{name}(P) is not Hermitian within tolerance: defect {herm_err:.3e}"
        )
    return m


def evaluate(problem: NEPvProblem, p) -> np.ndarray:
    """Assemble A(P) = a0 + a1(P) + a2(P) and return its Hermitian part."""
    p = np.asarray(p)
    if p.shape != (problem.n, problem.n):
        raise ValueError(f"P has shape {p.shape}, expected ({problem.n}, {problem.n})")
    a = problem.a0
    if problem.a1 is not None:
        a = a + _checked_component(problem, problem.a1(p), "a1")
    if problem.a2 is not None:
        a = a + _checked_component(problem, problem.a2(p), "a2")
    return symmetrize(a)


def oriented_operator(problem: NEPvProblem, p) -> np.ndarray:
    """A(P) negated when the largest eigenvalues are wanted.

    The k largest eigenvalues of A are the k smallest of -A, so every gap
    and bound formula written for the smallest end applies verbatim to the
    oriented operator.
    """
    a = evaluate(problem, p)
    return -a if problem.end == "largest" else a


def residual(problem: NEPvProblem, v):
    """Residual R = A(P)V - V (V^H A(P) V) and its spectral norm.

    V^H R = 0 holds by construction, so R measures the defect of span(V)
    as an invariant subspace of A(V V^H).
    """
    v = check_orthonormal(v)
    a = evaluate(problem, projector(v))
    av = a @ v
    r = av - v @ (v.conj().T @ av)
    return r, spectral_norm(r)


def extremal_eigenbasis(a, k: int, end: str) -> np.ndarray:
    """Eigenvector columns of the k smallest or largest eigenvalues of A."""
    w, vecs = eigh_sorted(a)
    if end == "largest":
        return vecs[:, a.shape[0] - k :]
    return vecs[:, :k]


def default_initial_basis(problem: NEPvProblem) -> np.ndarray:
    """Default SCF starting point: the wanted eigenbasis of the linear part a0."""
    return extremal_eigenbasis(problem.a0, problem.k, problem.end)


@dataclass
class ScfTrace:
    """Iteration history of one SCF run.

    iterates[0] is the initial basis; iterates[l] is the l-th SCF update.
    residual_norms and relative_residuals align with iterates, so all three
    lists have length iterations + 1.
    """

    iterates: list = field(default_factory=list)
    residual_norms: list = field(default_factory=list)
    relative_residuals: list = field(default_factory=list)
    converged: bool = False
    iterations: int = 0


def _step_residual(problem: NEPvProblem, a, v):
    av = a @ v
    r = av - v @ (v.conj().T @ av)
    rnorm = spectral_norm(r)
    anorm = spectral_norm(a)
    rel = rnorm / anorm if anorm > 0 else rnorm
    return rnorm, rel


def scf_solve(
    problem: NEPvProblem,
    v0,
    tol: float = 1e-14,
    max_iter: int = 200,
) -> ScfTrace:
    """Plain SCF fixed-point iteration V_l = eigenbasis of A(P_{l-1}).

    No mixing or damping is applied.  Iteration stops once the relative
    residual ||R_l||_2 / ||A(P_l)||_2 drops to tol, or after max_iter
    updates, in which case the trace is returned with converged False
    rather than raising.
    """
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    if max_iter < 1:
        raise ValueError(f"max_iter must be at least 1, got {max_iter}")
    v = check_orthonormal(v0)
    if v.shape != (problem.n, problem.k):
        raise ValueError(
            f"initial basis has shape {v.shape}, expected ({problem.n}, {problem.k})"
        )

    trace = ScfTrace()
    a = evaluate(problem, projector(v))
    rnorm, rel = _step_residual(problem, a, v)
    trace.iterates.append(v)
    trace.residual_norms.append(rnorm)
    trace.relative_residuals.append(rel)
    if rel <= tol:
        trace.converged = True
        return trace

    for it in range(1, max_iter + 1):
        v = extremal_eigenbasis(a, problem.k, problem.end)
        try:
            a = evaluate(problem, projector(v))
        except ValueError as exc:
            if "non-finite" in str(exc):
                raise ScfDivergenceError(it) from exc
            raise
        rnorm, rel = _step_residual(problem, a, v)
        trace.iterates.append(v)
        trace.residual_norms.append(rnorm)
        trace.relative_residuals.append(rel)
        trace.iterations = it
        if rel <= tol:
            trace.converged = True
            break
    return trace


def solve_reference(
    problem: NEPvProblem,
    v0=None,
    tol: float = 1e-14,
    max_iter: int = 200,
    polish: int = 4,
):
    """SCF solve followed by a few extra fixed-point steps, keeping the best.

    The polish steps push the returned basis to the roundoff floor of the
    iteration, which matters when it serves as the reference solution for
    measured subspace errors; the stopping criterion alone can leave an
    error several times larger than the floor.  Returns (v_star, trace)
    where trace is the unpolished run.
    """
    if v0 is None:
        v0 = default_initial_basis(problem)
    trace = scf_solve(problem, v0, tol=tol, max_iter=max_iter)
    best_v = trace.iterates[-1]
    _, best_norm = residual(problem, best_v)
    v = best_v
    for _ in range(polish):
        a = evaluate(problem, projector(v))
        v = extremal_eigenbasis(a, problem.k, problem.end)
        _, rnorm = residual(problem, v)
        if rnorm < best_norm:
            best_v, best_norm = v, rnorm
    return best_v, trace
