"""Time steppers for the two fractional Fisher-KPP formulations.

Two discrete-in-time systems are implemented over the same graded L1 /
convolution-quadrature machinery:

* ``consistent`` -- the memory-consistent formulation in which the logistic
  source enters through a history convolution with the fractional kernel.
  With ``reaction_mode='explicit_history'`` the whole source is a weighted
  sum over past levels (one SPD linear solve per step, the default); with
  ``'implicit_last'`` the weight of the most recent interval is reassigned
  to the unknown level, giving a small Newton solve per step.  The two
  brackets of the final-interval quadrature agree to first order and both
  collapse to the same backward Euler step at alpha = 1.

* ``caputo`` -- the conventional variant with an instantaneous (non
  convolved) logistic source and a fractional derivative in time; the
  logistic term is treated implicitly (Newton).

Both models share history storage: all past fields, their mass-matrix
images, and (for the consistent model) past reaction vectors.  A single
trajectory is advanced strictly sequentially; independent trajectories
share nothing and may run concurrently.

The 0-D scalar mode mirrors the steppers with mass 1 and stiffness 0 and
is the verification harness against exact fractional relaxation profiles.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
import scipy.sparse as sp

from . import femspace, fractime
from .sparsela import NewtonError, SolveReport, SolverError, cg_solve, newton_solve

if TYPE_CHECKING:  # pragma: no cover
    from .scenarios import RunConfig

__all__ = [
    "ModelParams",
    "History",
    "StepState",
    "StepFailure",
    "RunResult",
    "step_consistent",
    "step_caputo",
    "advance",
    "run",
    "scalar_solve",
]

logger = logging.getLogger(__name__)

MODELS = ("consistent", "caputo")
REACTION_MODES = ("explicit_history", "implicit_last")
BOUNDARY_CONDITIONS = ("neumann", "dirichlet")

NEWTON_TOL = 1e-10       # absolute residual 2-norm of the per-step system
CG_TOL = 1e-12           # relative; keeps temporal error dominant


class StepFailure(SolverError):
    """A per-step solve failed; carries the step index and the cause."""

    def __init__(self, step: int, cause: Exception):
        super().__init__(f"step {step} failed: {cause}")
        self.step = step
        self.cause = cause


@dataclass(frozen=True)
class ModelParams:
    """Physics and formulation choices of one run.

    D and r are the diffusion coefficient and intrinsic growth rate of the
    logistic dynamics; alpha in (0, 1] is the fractional order (alpha = 1
    recovers the classical equation for either model).
    """

    D: float = 1e-3
    r: float = 5.0
    alpha: float = 0.5
    model: str = "consistent"
    bc: str = "neumann"
    bc_value: float = 0.0
    reaction_mode: str = "explicit_history"

    def __post_init__(self):
        # D = 0 is allowed so pure-reaction (identity-evolution) checks work
        if self.D < 0.0:
            raise ValueError(f"diffusion coefficient must be >= 0, got {self.D}")
        if self.r < 0.0:
            raise ValueError(f"growth rate must be >= 0, got {self.r}")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}, got {self.model!r}")
        if self.bc not in BOUNDARY_CONDITIONS:
            raise ValueError(f"bc must be one of {BOUNDARY_CONDITIONS}, got {self.bc!r}")
        if self.reaction_mode not in REACTION_MODES:
            raise ValueError(
                f"reaction_mode must be one of {REACTION_MODES}, got {self.reaction_mode!r}")


class History:
    """Preallocated store of past fields and the cached vectors both steppers reuse.

    Row k of ``fields`` is u^k; ``mass_images`` holds M u^k; ``reactions``
    (consistent model only) holds the logistic load of u^j for j < N.
    """

    def __init__(self, ndof: int, n_steps: int, track_reactions: bool):
        self.fields = np.empty((n_steps + 1, ndof))
        self.mass_images = np.empty((n_steps + 1, ndof))
        self.reactions = np.empty((n_steps, ndof)) if track_reactions else None
        self.mass_sq_norms = np.empty(n_steps + 1)   # u^k' M u^k, for diagnostics
        self.count = 0

    def append(self, u: np.ndarray, mass: sp.csr_matrix, mesh) -> None:
        k = self.count
        self.fields[k] = u
        mu = mass @ u
        self.mass_images[k] = mu
        self.mass_sq_norms[k] = float(u @ mu)
        if self.reactions is not None and k < self.reactions.shape[0]:
            self.reactions[k] = femspace.assemble_reaction(mesh, u)
        self.count = k + 1


@dataclass
class StepState:
    """Everything a stepper needs to produce the next level."""

    grid: fractime.TimeGrid
    mesh: femspace.TriMesh
    fem: femspace.FemMatrices
    params: ModelParams
    history: History
    weights: fractime.ConvWeightTable | None = None
    n: int = 1   # index of the level to compute next

    def conv_row(self, n: int) -> np.ndarray:
        if self.weights is not None:
            return self.weights.row(n)
        return fractime.conv_weights(self.grid, self.params.alpha, n)


def _l1_history_terms(state: StepState):
    """a_0^(n), the L1 history vector, and the weight row b^(n) for level n."""
    n = state.n
    b = state.conv_row(n)
    a = (b / state.grid.steps[:n])[::-1]      # a[i] = a_i^(n)
    a0 = a[0]
    mus = state.history.mass_images
    if n == 1:
        hist = np.zeros(mus.shape[1])
    else:
        # sum_{k=1}^{n-1} a_{n-k} (Mu^k - Mu^{k-1}) rearranged to a single
        # weighted combination of the stored images Mu^0..Mu^{n-1}
        w = np.empty(n)
        w[0] = -a[n - 1]
        if n > 2:
            w[1:n - 1] = a[n - 1:1:-1] - a[n - 2:0:-1]
        w[n - 1] = a[1]
        hist = w @ mus[:n]
    return a0, hist, b


def _dirichlet_newton_wrappers(state: StepState, residual, jacobian):
    """Project a full-space Newton system onto interior dofs, pinning the boundary."""
    mesh = state.mesh
    value = state.params.bc_value
    bidx = mesh.boundary_vertices
    interior = mesh.interior_mask().astype(float)
    keep = sp.diags(interior)
    pin = sp.diags(1.0 - interior)

    def res(u):
        F = residual(u)
        F = F * interior
        F[bidx] = u[bidx] - value
        return F

    def jac(u):
        J = keep @ jacobian(u) @ keep + pin
        return sp.csr_matrix(J)

    return res, jac


def _solve_linear_step(state: StepState, A: sp.csr_matrix, rhs: np.ndarray):
    if state.params.bc == "dirichlet":
        A, rhs = femspace.apply_dirichlet(A, rhs, state.mesh.boundary_vertices,
                                          state.params.bc_value)
    u, report = cg_solve(A, rhs, tol=CG_TOL)
    if not report.converged:
        raise SolverError(
            f"CG stalled: residual {report.residual:.3e} after {report.iterations} iterations")
    return u, report


def _solve_newton_step(state: StepState, residual, jacobian, u0: np.ndarray):
    if state.params.bc == "dirichlet":
        residual, jacobian = _dirichlet_newton_wrappers(state, residual, jacobian)
        u0 = u0.copy()
        u0[state.mesh.boundary_vertices] = state.params.bc_value
    return newton_solve(residual, jacobian, u0, tol=NEWTON_TOL, cg_tol=CG_TOL)


def _descend_step_energy(state: StepState, A: sp.csr_matrix, rhs: np.ndarray,
                         weight: float, u0: np.ndarray, tol: float,
                         maxit: int = 200):
    """Minimize the per-step energy whose gradient is the step residual.

    The implicit system A u - weight*reaction(u) = rhs is the critical-point
    equation of

        G(u) = 1/2 u'Au - rhs'u - weight * (1/2 u'Mu - 1/3 int u^3),

    and the wanted root is a local minimizer (its Jacobian is positive even
    when it is indefinite along the way).  Directions come from a
    Levenberg-damped Newton system (J + mu * lumped-mass) d = -F: mu = 0 is
    plain Newton; growing mu turns the direction into a well-scaled
    function-space gradient step.  Armijo backtracking acts on G, which
    cannot get trapped at local minima of the residual NORM where plain
    damped Newton stalls once the reaction outweighs the L1 mass term, and
    a nodal step ceiling keeps iterates out of the cubic's unbounded valley.
    """
    mesh = state.mesh
    M = state.fem.mass
    dirichlet = state.params.bc == "dirichlet"
    lumped = np.asarray(M.sum(axis=1)).ravel()
    if dirichlet:
        interior = state.mesh.interior_mask().astype(float)
        lumped = np.where(interior > 0.0, lumped, 0.0)

    def G(u):
        cubic = femspace.integrate_cubed(mesh, u)
        return (0.5 * float(u @ (A @ u)) - float(rhs @ u)
                - weight * (0.5 * float(u @ (M @ u)) - cubic / 3.0))

    def residual(u):
        return A @ u - weight * femspace.assemble_reaction(mesh, u) - rhs

    def jacobian(u):
        return sp.csr_matrix(A - weight * femspace.assemble_reaction_jacobian(mesh, u))

    if dirichlet:
        residual, jacobian = _dirichlet_newton_wrappers(state, residual, jacobian)
        u0 = u0.copy()
        u0[state.mesh.boundary_vertices] = state.params.bc_value

    u = u0.copy()
    F = residual(u)
    norm = float(np.linalg.norm(F))
    g_val = G(u)
    trace = [norm]
    inner = 0
    mu = 0.0
    mu_seed = max(1.0, weight)
    for it in range(maxit):
        if norm <= tol:
            return u, SolveReport(iterations=it, residual=norm, converged=True,
                                  inner_iterations=inner, residual_history=trace)
        J = jacobian(u)
        accepted = False
        while not accepted:
            J_mu = J if mu == 0.0 else sp.csr_matrix(J + sp.diags(mu * lumped))
            d, rep = cg_solve(J_mu, -F, tol=CG_TOL)
            inner += rep.iterations
            usable = rep.converged and not rep.indefinite
            if usable:
                if dirichlet:
                    d = d * interior
                slope = float(d @ F)
                # nodal ceiling: at most one carrying-capacity unit per move
                d_max = float(np.abs(d).max())
                scale = min(1.0, 1.0 / d_max) if d_max > 0.0 else 1.0
                d = scale * d
                slope *= scale
                if slope < 0.0:
                    s = 1.0
                    for _ in range(8):
                        u_trial = u + s * d
                        g_trial = G(u_trial)
                        if g_trial <= g_val + 1e-4 * s * slope:
                            accepted = True
                            break
                        s *= 0.5
            if not accepted:
                mu = mu_seed if mu == 0.0 else 10.0 * mu
                if mu > 1e12 * mu_seed:
                    raise NewtonError("damping_floor",
                                      f"energy descent stalled at |F| = {norm:.3e}")
        u = u_trial
        g_val = g_trial
        F = residual(u)
        norm = float(np.linalg.norm(F))
        trace.append(norm)
        mu = 0.0 if (mu <= mu_seed or s == 1.0) else mu / 10.0
    raise NewtonError("max_iterations",
                      f"energy descent: no convergence in {maxit} iterations "
                      f"(residual {norm:.3e})")


def _solve_implicit_reaction_step(state: StepState, A: sp.csr_matrix,
                                  rhs: np.ndarray, weight: float,
                                  u_prev: np.ndarray):
    """Newton solve of A u - weight*reaction(u) = rhs, made robust.

    The start is a semi-implicit predictor (reaction frozen at the previous
    level), which plain damped Newton polishes in a few iterations.  When
    the reaction outweighs the L1 mass term (large steps at small orders),
    the residual norm develops spurious local minima and Newton can stall;
    the energy-descent fallback then exploits the gradient structure of the
    step system, which line search on the residual norm cannot.
    """
    mesh = state.mesh

    def residual(u):
        return A @ u - weight * femspace.assemble_reaction(mesh, u) - rhs

    def jacobian(u):
        return sp.csr_matrix(A - weight * femspace.assemble_reaction_jacobian(mesh, u))

    guess, rep0 = _solve_linear_step(
        state, A, rhs + weight * femspace.assemble_reaction(mesh, u_prev))
    inner = rep0.iterations

    try:
        u, report = _solve_newton_step(state, residual, jacobian, guess)
        report.inner_iterations += inner
        return u, report
    except NewtonError:
        u, report = _descend_step_energy(state, A, rhs, weight, guess,
                                         tol=NEWTON_TOL)
        report.inner_iterations += inner
        return u, report


def step_consistent(state: StepState) -> tuple[np.ndarray, SolveReport]:
    """Advance the memory-consistent model by one step.

    explicit_history: (a_0 M + D K) u^n = a_0 M u^{n-1} - L1 history
                       + r sum_{j<n} b_j^(n) R^j
    implicit_last:    the j = n-1 term moves to the left as
                       r b_{n-1}^(n) * reaction(u^n)  (Newton solve).
    """
    p = state.params
    n = state.n
    M, K = state.fem.mass, state.fem.stiffness
    a0, hist, b = _l1_history_terms(state)
    u_prev = state.history.fields[n - 1]
    rhs = a0 * state.history.mass_images[n - 1] - hist
    A = sp.csr_matrix(a0 * M + p.D * K)

    reactions = state.history.reactions
    if p.reaction_mode == "explicit_history":
        if p.r != 0.0:
            rhs = rhs + p.r * (b @ reactions[:n])
        return _solve_linear_step(state, A, rhs)

    # implicit_last: history truncated at j = n-2, last weight on the unknown
    if p.r != 0.0 and n >= 2:
        rhs = rhs + p.r * (b[:n - 1] @ reactions[:n - 1])
    w_last = p.r * b[n - 1]
    return _solve_implicit_reaction_step(state, A, rhs, w_last, u_prev)


def step_caputo(state: StepState) -> tuple[np.ndarray, SolveReport]:
    """Advance the Caputo-in-time model by one step (implicit logistic term).

    Solves a_0 M u^n + D K u^n - r reaction(u^n) = a_0 M u^{n-1} - L1 history
    by Newton with the exact Jacobian a_0 M + D K - r reaction_jacobian(u).
    """
    p = state.params
    n = state.n
    M, K = state.fem.mass, state.fem.stiffness
    a0, hist, _ = _l1_history_terms(state)
    u_prev = state.history.fields[n - 1]
    rhs = a0 * state.history.mass_images[n - 1] - hist
    A = sp.csr_matrix(a0 * M + p.D * K)
    if p.r == 0.0:
        return _solve_linear_step(state, A, rhs)
    return _solve_implicit_reaction_step(state, A, rhs, p.r, u_prev)


_STEPPERS = {"consistent": step_consistent, "caputo": step_caputo}


def _alikhanov_diagnostic(state: StepState, u_new: np.ndarray) -> None:
    """Log violations of the discrete fractional chain inequality.

    Checks 1/2 * L1(||u||_M^2) <= (u^n, L1(u))_M at the new level.  The
    inequality is proven for the continuous operator; whether the discrete
    L1 operator on graded grids satisfies it is open, so violations are
    only reported, never fatal.
    """
    n = state.n
    h = state.history
    b = state.conv_row(n)
    coeff = b / state.grid.steps[:n]          # multiplies differences k=1..n
    norms = np.empty(n + 1)
    norms[:n] = h.mass_sq_norms[:n]
    mu_new = state.fem.mass @ u_new
    norms[n] = float(u_new @ mu_new)
    lhs = 0.5 * float(np.dot(coeff, np.diff(norms)))
    # rearrange sum_k c_k (m^k - m^{k-1}) into one weighted combination of
    # the stored images, avoiding an O(n * dofs) temporary
    w = np.empty(n)
    w[0] = -coeff[0]
    if n > 1:
        w[1:] = coeff[:n - 1] - coeff[1:]
    l1_vec = w @ h.mass_images[:n] + coeff[n - 1] * mu_new
    rhs = float(u_new @ l1_vec)
    if lhs > rhs + 1e-10 * max(1.0, abs(rhs)):
        logger.warning("discrete chain inequality violated at step %d: "
                       "%.6e > %.6e", n, lhs, rhs)


def advance(grid: fractime.TimeGrid, mesh: femspace.TriMesh,
            fem: femspace.FemMatrices, params: ModelParams, u0: np.ndarray,
            n_steps: int | None = None, use_weight_table: bool = True,
            on_step=None, check_chain_inequality: bool = False):
    """March ``n_steps`` levels of the selected model from the field u0.

    Returns (fields, reports): the (n_steps+1, ndof) trajectory including
    the initial level, and one :class:`SolveReport` per step.  ``on_step``
    is called as on_step(n, t_n, u_n, report) after each accepted level.
    Raises :class:`StepFailure` with the offending index on solver failure.
    """
    n_steps = grid.N if n_steps is None else int(n_steps)
    if not 1 <= n_steps <= grid.N:
        raise ValueError(f"n_steps must be in [1, {grid.N}]")
    u0 = femspace._check_field(mesh, u0)

    history = History(mesh.n_vertices, n_steps,
                      track_reactions=params.model == "consistent")
    history.append(u0, fem.mass, mesh)
    table = fractime.ConvWeightTable(grid, params.alpha) if use_weight_table else None
    state = StepState(grid=grid, mesh=mesh, fem=fem, params=params,
                      history=history, weights=table)
    stepper = _STEPPERS[params.model]

    reports = []
    for n in range(1, n_steps + 1):
        state.n = n
        try:
            u, report = stepper(state)
        except SolverError as exc:
            raise StepFailure(n, exc) from exc
        if check_chain_inequality:
            _alikhanov_diagnostic(state, u)
        history.append(u, fem.mass, mesh)
        reports.append(report)
        if on_step is not None:
            on_step(n, float(grid.points[n]), u, report)
    return history.fields, reports


@dataclass
class RunResult:
    """Trajectory handle: the grid, all computed levels, and observable rows."""

    grid: fractime.TimeGrid
    mesh: femspace.TriMesh
    fem: femspace.FemMatrices
    params: ModelParams
    fields: np.ndarray            # (N+1, ndof)
    rows: list                    # ObservableRow per time level, including t_0
    out_dir: str | None = None

    @property
    def times(self) -> np.ndarray:
        return self.grid.points

    def final(self) -> np.ndarray:
        return self.fields[-1]


def run(config: "RunConfig", out_dir: str | None = None,
        write_outputs: bool = True) -> RunResult:
    """Execute one configured trajectory, recording observables at every level.

    The initial field is the nodal interpolant of the configured initial
    condition.  When ``write_outputs`` is set, the time series, snapshots
    at the configured times (rounded to the nearest grid point), and the
    resolved configuration are written under ``<out>/<run-name>/``.
    Outputs accumulated before a solver failure are flushed before the
    failure is re-raised.
    """
    from . import observe_io, scenarios   # local import keeps module graph acyclic

    mesh = scenarios.build_run_mesh(config)
    fem = femspace.FemMatrices(mass=femspace.assemble_mass(mesh),
                               stiffness=femspace.assemble_stiffness(mesh))
    grid = fractime.graded_grid(config.time.N, config.time.gamma, config.time.T)
    u0 = scenarios.initial_field(config, mesh)
    params = config.physics

    rows = [observe_io.record(mesh, fem, params, 0.0, u0)]
    result = RunResult(grid=grid, mesh=mesh, fem=fem, params=params,
                       fields=np.empty((0, mesh.n_vertices)), rows=rows)

    writer = None
    if write_outputs:
        writer = observe_io.OutputWriter(config, mesh, out_dir=out_dir)
        result.out_dir = str(writer.run_dir)
        writer.snapshot_if_due(0, 0.0, u0)

    nonlinear = params.r != 0.0 and (params.model == "caputo"
                                     or params.reaction_mode == "implicit_last")

    def on_step(n, t, u, report):
        row = observe_io.record(mesh, fem, params, t, u,
                                newton_iters=report.iterations if nonlinear else 0,
                                cg_iters=report.inner_iterations if nonlinear
                                else report.iterations)
        rows.append(row)
        if writer is not None:
            writer.snapshot_if_due(n, t, u)

    try:
        fields, _ = advance(grid, mesh, fem, params, u0, on_step=on_step,
                            check_chain_inequality=True)
    except StepFailure:
        if writer is not None:
            writer.finalize(rows)   # flush partial outputs
        raise
    result.fields = fields
    if writer is not None:
        writer.finalize(rows)
    return result


# ---------------------------------------------------------------------------
# 0-D scalar mode
# ---------------------------------------------------------------------------

def _scalar_reaction(kind: str):
    if kind == "linear":
        return (lambda y: y), (lambda y: 1.0)
    if kind == "logistic":
        return (lambda y: y * (1.0 - y)), (lambda y: 1.0 - 2.0 * y)
    raise ValueError(f"reaction must be 'linear' or 'logistic', got {kind!r}")


def scalar_solve(alpha: float, lam: float, y0: float, grid: fractime.TimeGrid,
                 model: str = "caputo", reaction: str = "linear",
                 reaction_mode: str = "explicit_history") -> np.ndarray:
    """Solve the 0-D analogue of either model: mass 1, stiffness 0, rate lam.

    For the caputo model with a linear reaction this is the fractional
    relaxation problem whose exact solution is the Mittag-Leffler profile
    E_alpha(lam * t^alpha) * y0; it is the main accuracy oracle for the
    temporal machinery.  Returns the values y^0..y^N on the grid.
    """
    if model not in MODELS:
        raise ValueError(f"model must be one of {MODELS}, got {model!r}")
    if reaction_mode not in REACTION_MODES:
        raise ValueError(f"unknown reaction_mode {reaction_mode!r}")
    f, fprime = _scalar_reaction(reaction)

    N = grid.N
    y = np.empty(N + 1)
    y[0] = float(y0)
    freac = np.empty(N)   # f(y^j) history for the consistent model
    freac[:] = 0.0

    for n in range(1, N + 1):
        b = fractime.conv_weights(grid, alpha, n)
        a = (b / grid.steps[:n])[::-1]
        a0 = a[0]
        hist = float(np.dot(a[1:][::-1], np.diff(y[:n]))) if n > 1 else 0.0
        rhs = a0 * y[n - 1] - hist

        if model == "consistent":
            freac[n - 1] = f(y[n - 1])
            if reaction_mode == "explicit_history":
                y[n] = (rhs + lam * float(np.dot(b, freac[:n]))) / a0
                continue
            rhs = rhs + (lam * float(np.dot(b[:n - 1], freac[:n - 1])) if n > 1 else 0.0)
            w = lam * b[n - 1]
        else:
            w = lam

        # implicit scalar solve by Newton from the previous level
        x = y[n - 1]
        for _ in range(100):
            F = a0 * x - w * f(x) - rhs
            if abs(F) <= 1e-14 * max(1.0, abs(rhs)):
                break
            x -= F / (a0 - w * fprime(x))
        y[n] = x
    return y
