"""Structured P1 triangular finite elements on an axis-aligned rectangle.

The mesh splits every grid cell along the bottom-left to top-right
diagonal, which keeps the assembled interior stiffness stencil equal to
the classical 5-point Laplacian on square cells and makes runs exactly
reproducible.  Mass and stiffness use closed-form element matrices; all
integrals of cubic P1 expressions (logistic reaction, its Jacobian, the
cubic energy term) use a 4-point degree-3 rule so quadrature error never
contaminates convergence or consistency tests.

A field is simply an ndarray of nodal values over the mesh vertices.
Assembled operators are immutable CSR matrices and safe to share.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .sparsela import cg_solve

__all__ = [
    "TriMesh",
    "FemMatrices",
    "EigenSolveError",
    "build_mesh",
    "assemble_mass",
    "assemble_stiffness",
    "assemble_reaction",
    "assemble_reaction_jacobian",
    "apply_dirichlet",
    "integrate",
    "l2_norm",
    "integrate_cubed",
    "energy",
    "min_eigpair",
]

# degree-3 exact rule on the reference triangle (barycentric points, weights
# summing to 1); the centroid weight is negative but the rule is exact for
# all cubics, which the logistic terms need
_QUAD_PTS = np.array([
    [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
    [0.6, 0.2, 0.2],
    [0.2, 0.6, 0.2],
    [0.2, 0.2, 0.6],
])
_QUAD_WTS = np.array([-27.0 / 48.0, 25.0 / 48.0, 25.0 / 48.0, 25.0 / 48.0])


class EigenSolveError(RuntimeError):
    """Inverse power iteration failed to converge."""


@dataclass(frozen=True)
class TriMesh:
    """Structured triangulation of [x_min, x_max] x [y_min, y_max].

    Vertices are ordered row-major in y: vertex (ix, iy) has index
    iy*(nx+1) + ix.  Each cell contributes two positively oriented
    triangles split along its bottom-left to top-right diagonal.
    """

    nx: int
    ny: int
    bounds: tuple[float, float, float, float]
    vertices: np.ndarray        # (n_vertices, 2)
    triangles: np.ndarray       # (n_triangles, 3) int
    boundary_vertices: np.ndarray  # sorted indices

    def __post_init__(self):
        for arr in (self.vertices, self.triangles, self.boundary_vertices):
            arr.setflags(write=False)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def hx(self) -> float:
        return (self.bounds[1] - self.bounds[0]) / self.nx

    @property
    def hy(self) -> float:
        return (self.bounds[3] - self.bounds[2]) / self.ny

    @property
    def area(self) -> float:
        x0, x1, y0, y1 = self.bounds
        return (x1 - x0) * (y1 - y0)

    def interior_mask(self) -> np.ndarray:
        mask = np.ones(self.n_vertices, dtype=bool)
        mask[self.boundary_vertices] = False
        return mask


@dataclass(frozen=True)
class FemMatrices:
    """Assembled mass and stiffness operators of a mesh."""

    mass: sp.csr_matrix
    stiffness: sp.csr_matrix


def build_mesh(nx: int, ny: int, bounds=(-1.0, 1.0, -1.0, 1.0)) -> TriMesh:
    """Triangulate the rectangle with nx*ny cells, two triangles each.

    Raises on degenerate bounds or nonpositive cell counts.  Vertex and
    triangle ordering is deterministic.
    """
    if nx < 1 or ny < 1:
        raise ValueError(f"cell counts must be >= 1, got nx={nx}, ny={ny}")
    x0, x1, y0, y1 = (float(v) for v in bounds)
    if not (x1 > x0 and y1 > y0):
        raise ValueError(f"degenerate bounds {bounds}")

    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys)            # row-major in y
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    ix, iy = np.meshgrid(np.arange(nx), np.arange(ny))
    ix, iy = ix.ravel(), iy.ravel()
    v00 = iy * (nx + 1) + ix
    v10 = v00 + 1
    v01 = v00 + (nx + 1)
    v11 = v01 + 1
    # diagonal v00 -> v11; both triangles counterclockwise
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    triangles = np.empty((2 * nx * ny, 3), dtype=np.int64)
    triangles[0::2] = lower
    triangles[1::2] = upper

    on_boundary = np.zeros((ny + 1, nx + 1), dtype=bool)
    on_boundary[0, :] = on_boundary[-1, :] = True
    on_boundary[:, 0] = on_boundary[:, -1] = True
    boundary = np.flatnonzero(on_boundary.ravel())

    return TriMesh(nx=int(nx), ny=int(ny), bounds=(x0, x1, y0, y1),
                   vertices=vertices, triangles=triangles,
                   boundary_vertices=boundary)


def _element_geometry(mesh: TriMesh):
    """Per-element signed areas and the (b, c) gradient coefficient arrays."""
    p = mesh.vertices[mesh.triangles]        # (nt, 3, 2)
    x, y = p[:, :, 0], p[:, :, 1]
    # b_i = y_j - y_k, c_i = x_k - x_j with (i, j, k) cyclic
    b = y[:, [1, 2, 0]] - y[:, [2, 0, 1]]
    c = x[:, [2, 0, 1]] - x[:, [1, 2, 0]]
    # signed area; positive for our counterclockwise orientation
    area = 0.5 * ((x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0])
                  - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0]))
    return area, b, c


def _scatter(mesh: TriMesh, local: np.ndarray) -> sp.csr_matrix:
    """Assemble per-element 3x3 blocks into a CSR operator."""
    tri = mesh.triangles
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    A = sp.coo_matrix((local.ravel(), (rows, cols)),
                      shape=(mesh.n_vertices, mesh.n_vertices))
    A = A.tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


def assemble_mass(mesh: TriMesh) -> sp.csr_matrix:
    """Consistent P1 mass operator; element block is area/12 * [[2,1,1],[1,2,1],[1,1,2]]."""
    area, _, _ = _element_geometry(mesh)
    base = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0
    local = area[:, None, None] * base[None, :, :]
    return _scatter(mesh, local)


def assemble_stiffness(mesh: TriMesh) -> sp.csr_matrix:
    """P1 stiffness operator; rows sum to zero (constants lie in the Neumann kernel)."""
    area, b, c = _element_geometry(mesh)
    local = (b[:, :, None] * b[:, None, :] + c[:, :, None] * c[:, None, :]) \
        / (4.0 * area)[:, None, None]
    return _scatter(mesh, local)


def _quad_values(mesh: TriMesh, u: np.ndarray):
    """Nodal field values at the degree-3 quadrature points, per element."""
    u_loc = np.asarray(u, dtype=float)[mesh.triangles]   # (nt, 3)
    return u_loc @ _QUAD_PTS.T                           # (nt, nq)


def _check_field(mesh: TriMesh, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape != (mesh.n_vertices,):
        raise ValueError(f"field length {u.shape} does not match mesh "
                         f"with {mesh.n_vertices} vertices")
    return u


def assemble_reaction(mesh: TriMesh, u) -> np.ndarray:
    """Logistic load vector with entries int u(1-u) phi_i dx, integrated exactly.

    Vanishes identically at the equilibria u = 0 and u = 1.
    """
    u = _check_field(mesh, u)
    area, _, _ = _element_geometry(mesh)
    uq = _quad_values(mesh, u)                    # (nt, nq)
    g = uq * (1.0 - uq)                            # integrand factor at points
    # contribution of element e to local node i: area * sum_q w_q g_q lambda_i(q)
    local = area[:, None] * (g * _QUAD_WTS) @ _QUAD_PTS   # (nt, 3)
    out = np.zeros(mesh.n_vertices)
    np.add.at(out, mesh.triangles.ravel(), local.ravel())
    return out


def assemble_reaction_jacobian(mesh: TriMesh, u) -> sp.csr_matrix:
    """Derivative of the logistic load: entries int (1-2u) phi_i phi_j dx, exact.

    Equals the mass operator at u = 0, vanishes at u = 1/2, equals -mass
    at u = 1.
    """
    u = _check_field(mesh, u)
    area, _, _ = _element_geometry(mesh)
    uq = _quad_values(mesh, u)
    gq = (1.0 - 2.0 * uq) * _QUAD_WTS             # (nt, nq)
    # local[e, i, j] = area_e * sum_q gq[e, q] lambda_i(q) lambda_j(q)
    pairs = _QUAD_PTS[:, :, None] * _QUAD_PTS[:, None, :]    # (nq, 3, 3)
    local = area[:, None, None] * np.einsum("eq,qij->eij", gq, pairs)
    return _scatter(mesh, local)


def apply_dirichlet(A, rhs, boundary, value: float = 0.0):
    """Impose u = value on the given vertex set by row/column elimination.

    Boundary rows become identity rows with rhs set to ``value``; boundary
    columns are folded into the rhs so the modified operator stays
    symmetric (and SPD when A was).
    Returns the modified (A, rhs) pair; inputs are not mutated.
    """
    n = A.shape[0]
    rhs = np.asarray(rhs, dtype=float).copy()
    bmask = np.zeros(n, dtype=bool)
    bmask[np.asarray(boundary, dtype=int)] = True
    rhs -= A @ (value * bmask.astype(float))
    rhs[bmask] = value
    keep = sp.diags((~bmask).astype(float))
    A_mod = keep @ A @ keep + sp.diags(bmask.astype(float))
    A_mod = sp.csr_matrix(A_mod)
    A_mod.sum_duplicates()
    A_mod.sort_indices()
    return A_mod, rhs


def integrate(mesh: TriMesh, u) -> float:
    """Exact integral of the P1 interpolant: sum of area/3 * nodal means."""
    u = _check_field(mesh, u)
    area, _, _ = _element_geometry(mesh)
    return float(np.dot(area / 3.0, u[mesh.triangles].sum(axis=1)))


def l2_norm(mesh: TriMesh, u, mass: sp.csr_matrix | None = None) -> float:
    """sqrt(u' M u); assembles the mass operator if one is not supplied."""
    u = _check_field(mesh, u)
    M = assemble_mass(mesh) if mass is None else mass
    return float(math.sqrt(max(0.0, u @ (M @ u))))


def integrate_cubed(mesh: TriMesh, u) -> float:
    """Exact integral of u^3 for P1 u (degree-3 quadrature)."""
    u = _check_field(mesh, u)
    area, _, _ = _element_geometry(mesh)
    uq = _quad_values(mesh, u)
    return float(np.dot(area, (uq ** 3) @ _QUAD_WTS))


def energy(mesh: TriMesh, u, D: float, r: float,
           mass: sp.csr_matrix | None = None,
           stiffness: sp.csr_matrix | None = None) -> float:
    """Free energy D/2 |grad u|^2 - r/2 u^2 + r/3 u^3 integrated over the domain.

    The classical dynamics is the gradient flow of this functional; the
    cubic term uses the exact degree-3 rule.
    """
    u = _check_field(mesh, u)
    M = assemble_mass(mesh) if mass is None else mass
    K = assemble_stiffness(mesh) if stiffness is None else stiffness
    return float(0.5 * D * (u @ (K @ u)) - 0.5 * r * (u @ (M @ u))
                 + (r / 3.0) * integrate_cubed(mesh, u))


def min_eigpair(mesh: TriMesh, bc: str = "dirichlet", D: float = 1.0,
                tol: float = 1e-8, maxit: int = 200):
    """Smallest eigenpair of D*K v = lambda M v under the given boundary condition.

    Neumann returns (0, constant mode) exactly.  The Dirichlet problem is
    restricted to interior vertices and solved by inverse power iteration
    with M-normalization; each inverse application is a CG solve.  The
    returned mode is zero on the boundary, M-normalized, and sign-fixed so
    its largest entry is positive.

    Raises :class:`EigenSolveError` when the eigenvalue has not stabilized
    to relative tolerance ``tol`` within ``maxit`` iterations.
    """
    bc = bc.lower()
    M = assemble_mass(mesh)
    if bc == "neumann":
        mode = np.ones(mesh.n_vertices)
        mode /= l2_norm(mesh, mode, mass=M)
        return 0.0, mode
    if bc != "dirichlet":
        raise ValueError(f"unknown boundary condition {bc!r}")

    K = assemble_stiffness(mesh)
    interior = np.flatnonzero(mesh.interior_mask())
    if interior.size == 0:
        raise ValueError("mesh has no interior vertices")
    K_ii = sp.csr_matrix(K[np.ix_(interior, interior)]) * D
    M_ii = sp.csr_matrix(M[np.ix_(interior, interior)])

    v = np.ones(interior.size)
    v /= math.sqrt(v @ (M_ii @ v))
    lam_prev = math.inf
    for _ in range(maxit):
        rhs = M_ii @ v
        w, rep = cg_solve(K_ii, rhs, tol=1e-10)
        if not rep.converged:
            raise EigenSolveError(f"inner CG stalled at residual {rep.residual:.3e}")
        w /= math.sqrt(w @ (M_ii @ w))
        Kw = K_ii @ w
        lam = float(w @ Kw)           # Rayleigh quotient of the M-normalized vector
        # the eigenvalue stabilizes before the mode; require both
        resid = np.linalg.norm(Kw - lam * (M_ii @ w))
        if abs(lam - lam_prev) <= tol * abs(lam) and resid <= 1e-7 * np.linalg.norm(Kw):
            mode = np.zeros(mesh.n_vertices)
            mode[interior] = w
            if mode[np.argmax(np.abs(mode))] < 0.0:
                mode = -mode
            return lam, mode
        lam_prev, v = lam, w
    raise EigenSolveError(f"eigenvalue did not stabilize in {maxit} iterations")
