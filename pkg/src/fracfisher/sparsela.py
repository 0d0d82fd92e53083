"""Minimal sparse linear algebra: CSR matvec, Jacobi-preconditioned CG,
and a damped Newton driver for the per-step implicit systems.

Matrices are scipy CSR throughout; the solvers are hand-rolled so that
iteration counts, residual histories, and indefiniteness detection stay
under our control.  Everything is deterministic in serial mode.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import minres

__all__ = [
    "SolveReport",
    "SolverError",
    "CgError",
    "NewtonError",
    "as_csr",
    "matvec",
    "cg_solve",
    "newton_solve",
]


class SolverError(RuntimeError):
    """Base class for linear/nonlinear solver failures."""


class CgError(SolverError):
    pass


class NewtonError(SolverError):
    """Newton failure; ``reason`` is one of 'max_iterations',
    'inner_solve', 'damping_floor'."""

    def __init__(self, reason: str, message: str):
        super().__init__(message)
        self.reason = reason


@dataclass
class SolveReport:
    iterations: int
    residual: float
    converged: bool
    indefinite: bool = False
    inner_iterations: int = 0
    residual_history: list = field(default_factory=list)

    def __post_init__(self):
        if self.residual < 0.0:
            raise ValueError("residual norm must be nonnegative")


def as_csr(A) -> sp.csr_matrix:
    """Coerce to canonical CSR (sorted, deduplicated column indices)."""
    A = sp.csr_matrix(A)
    A.sum_duplicates()
    A.sort_indices()
    return A


def matvec(A, x: np.ndarray) -> np.ndarray:
    """y = A @ x with an explicit dimension check."""
    x = np.asarray(x, dtype=float)
    if A.shape[1] != x.shape[0]:
        raise ValueError(f"dimension mismatch: {A.shape} @ {x.shape}")
    return A @ x


def cg_solve(A, b, tol: float = 1e-10, maxit: int | None = None,
             preconditioner: str | None = "jacobi", x0=None,
             collect_history: bool = False) -> tuple[np.ndarray, SolveReport]:
    """Conjugate gradients for SPD systems with optional Jacobi preconditioning.

    Converges when ||b - Ax||_2 <= tol * ||b||_2.  Non-convergence returns
    the best iterate with converged=False; it is the caller's decision what
    to do with it.  A nonpositive curvature p'Ap <= 0 (matrix not SPD)
    stops the iteration and sets ``indefinite`` in the report.
    """
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    if A.shape != (n, n):
        raise ValueError(f"system shape mismatch: {A.shape} vs rhs {n}")
    if maxit is None:
        maxit = max(100, 10 * n)

    if preconditioner == "jacobi":
        diag = A.diagonal()
        if np.any(diag <= 0.0):
            # caller promised SPD; fall back rather than divide by zero
            inv_diag = None
        else:
            inv_diag = 1.0 / diag
    elif preconditioner is None or preconditioner == "none":
        inv_diag = None
    else:
        raise ValueError(f"unknown preconditioner {preconditioner!r}")

    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).copy()
    r = b - A @ x
    b_norm = np.linalg.norm(b)
    if b_norm == 0.0:
        return np.zeros(n), SolveReport(iterations=0, residual=0.0, converged=True)

    history = []
    res = np.linalg.norm(r)
    if res <= tol * b_norm:
        return x, SolveReport(iterations=0, residual=float(res), converged=True)

    z = r * inv_diag if inv_diag is not None else r
    p = z.copy()
    rz = float(r @ z)
    indefinite = False
    k = 0
    while k < maxit:
        Ap = A @ p
        pAp = float(p @ Ap)
        if pAp <= 0.0:
            indefinite = True
            break
        a = rz / pAp
        x += a * p
        r -= a * Ap
        k += 1
        res = np.linalg.norm(r)
        z = r * inv_diag if inv_diag is not None else r
        rz_new = float(r @ z)
        if collect_history:
            # residual measured in the preconditioned inner product
            history.append(float(np.sqrt(max(rz_new, 0.0))))
        if res <= tol * b_norm:
            break
        p = z + (rz_new / rz) * p
        rz = rz_new

    true_res = float(np.linalg.norm(b - A @ x))
    report = SolveReport(iterations=k, residual=true_res,
                         converged=true_res <= tol * b_norm,
                         indefinite=indefinite, residual_history=history)
    return x, report


def _solve_newton_step(J, rhs, cg_tol):
    """Inner linear solve: CG first, MINRES when indefiniteness is detected."""
    d, rep = cg_solve(J, rhs, tol=cg_tol)
    if rep.converged and not rep.indefinite:
        return d, rep.iterations, None
    # J lost positive definiteness (reaction term dominating the mass term);
    # MINRES handles symmetric indefinite systems.
    d, info = minres(J, rhs, rtol=max(cg_tol, 1e-13), maxiter=20 * rhs.shape[0])
    if info != 0:
        return None, rep.iterations, "inner linear solve failed (CG indefinite, MINRES did not converge)"
    return d, rep.iterations, None


def newton_solve(residual, jacobian, x0, tol: float = 1e-10, maxit: int = 50,
                 damping: bool = True, cg_tol: float = 1e-12) -> tuple[np.ndarray, SolveReport]:
    """Damped Newton iteration for residual(x) = 0 with sparse symmetric Jacobians.

    Terminates when ||residual(x)||_2 <= tol (absolute).  Backtracking
    halves the step until the residual norm decreases; the damping factor
    floor is 2^-8.  Failure modes raise :class:`NewtonError` with distinct
    reasons: 'max_iterations', 'inner_solve', 'damping_floor'.
    """
    x = np.asarray(x0, dtype=float).copy()
    F = np.asarray(residual(x), dtype=float)
    norm = float(np.linalg.norm(F))
    trace = [norm]
    inner_total = 0

    for it in range(maxit):
        if norm <= tol:
            return x, SolveReport(iterations=it, residual=norm, converged=True,
                                  inner_iterations=inner_total, residual_history=trace)
        J = jacobian(x)
        d, inner_it, fail = _solve_newton_step(J, -F, cg_tol)
        inner_total += inner_it
        if fail is not None:
            # last resort inside the damping framework: steepest descent on
            # 1/2 ||F||^2 (gradient J'F; J is symmetric here)
            d = -(J @ F)
            if not np.any(d):
                raise NewtonError("inner_solve", fail)
        s = 1.0
        while True:
            x_trial = x + s * d
            F_trial = np.asarray(residual(x_trial), dtype=float)
            norm_trial = float(np.linalg.norm(F_trial))
            if norm_trial < norm or not damping:
                break
            s *= 0.5
            if s < 2.0 ** -8:
                raise NewtonError(
                    "damping_floor",
                    f"backtracking reached the 2^-8 floor at iteration {it} "
                    f"(residual {norm:.3e})")
        x, F, norm = x_trial, F_trial, norm_trial
        trace.append(norm)

    if norm <= tol:
        return x, SolveReport(iterations=maxit, residual=norm, converged=True,
                              inner_iterations=inner_total, residual_history=trace)
    raise NewtonError("max_iterations",
                      f"no convergence in {maxit} iterations (residual {norm:.3e})")
