"""Observables, output writers, and the model-comparison report.

CSV time series carry full double precision (17 significant digits) so a
decimal round-trip reproduces the in-memory values bitwise.  Spatial
snapshots are written either as legacy ASCII VTK unstructured grids
(triangle cells, one point scalar named "u") or as flat x,y,u tables in
row-major vertex order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import femspace, fractime

__all__ = [
    "ObservableRow",
    "TIMESERIES_HEADER",
    "record",
    "write_timeseries",
    "read_timeseries",
    "write_snapshot",
    "read_vtk_snapshot",
    "OutputWriter",
    "ComparisonReport",
    "compare_models",
    "run_verification",
]

TIMESERIES_HEADER = "t,mass,l2,energy,min_u,max_u,newton_iters,cg_iters"


@dataclass(frozen=True)
class ObservableRow:
    t: float
    mass: float
    l2: float
    energy: float
    min_u: float
    max_u: float
    newton_iters: int = 0
    cg_iters: int = 0


def record(mesh, fem, params, t: float, u: np.ndarray,
           newton_iters: int = 0, cg_iters: int = 0) -> ObservableRow:
    """Observables of one time level: mass, L2 norm, energy, extrema, counters."""
    return ObservableRow(
        t=float(t),
        mass=femspace.integrate(mesh, u),
        l2=femspace.l2_norm(mesh, u, mass=fem.mass),
        energy=femspace.energy(mesh, u, params.D, params.r,
                               mass=fem.mass, stiffness=fem.stiffness),
        min_u=float(u.min()),
        max_u=float(u.max()),
        newton_iters=int(newton_iters),
        cg_iters=int(cg_iters),
    )


def _g17(x: float) -> str:
    return format(float(x), ".17g")


def write_timeseries(rows, path) -> None:
    """Write observable rows as CSV; refuses to create a file from no rows."""
    rows = list(rows)
    if not rows:
        raise ValueError("no rows to write; file not created")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(TIMESERIES_HEADER + "\n")
        for r in rows:
            fh.write(",".join([_g17(r.t), _g17(r.mass), _g17(r.l2), _g17(r.energy),
                               _g17(r.min_u), _g17(r.max_u),
                               str(r.newton_iters), str(r.cg_iters)]) + "\n")


def read_timeseries(path) -> list[ObservableRow]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != TIMESERIES_HEADER:
            raise ValueError(f"unexpected header {header!r} in {path}")
        for line in fh:
            parts = line.strip().split(",")
            rows.append(ObservableRow(
                t=float(parts[0]), mass=float(parts[1]), l2=float(parts[2]),
                energy=float(parts[3]), min_u=float(parts[4]), max_u=float(parts[5]),
                newton_iters=int(parts[6]), cg_iters=int(parts[7])))
    return rows


def write_snapshot(mesh, u, t: float, path, format: str = "vtk") -> None:
    """Write one nodal field, either as legacy VTK or as an x,y,u table."""
    u = np.asarray(u, dtype=float)
    if u.shape != (mesh.n_vertices,):
        raise ValueError("field does not match mesh")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if format == "vtk":
        _write_vtk(mesh, u, t, path)
    elif format == "csv_grid":
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("x,y,u\n")
            for (x, y), v in zip(mesh.vertices, u):
                fh.write(f"{_g17(x)},{_g17(y)},{_g17(v)}\n")
    else:
        raise ValueError(f"unknown snapshot format {format!r}")


def _write_vtk(mesh, u, t, path) -> None:
    nv = mesh.n_vertices
    nt = mesh.triangles.shape[0]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(f"population density at t = {_g17(t)}\n")
        fh.write("ASCII\n")
        fh.write("DATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {nv} double\n")
        for x, y in mesh.vertices:
            fh.write(f"{_g17(x)} {_g17(y)} 0\n")
        fh.write(f"CELLS {nt} {4 * nt}\n")
        for i, j, k in mesh.triangles:
            fh.write(f"3 {i} {j} {k}\n")
        fh.write(f"CELL_TYPES {nt}\n")
        for _ in range(nt):
            fh.write("5\n")
        fh.write(f"POINT_DATA {nv}\n")
        fh.write("SCALARS u double 1\n")
        fh.write("LOOKUP_TABLE default\n")
        for v in u:
            fh.write(_g17(v) + "\n")


def read_vtk_snapshot(path):
    """Minimal legacy-VTK reader used to validate written snapshots.

    Returns (points, cells, values).  Raises ValueError on structural
    problems (wrong counts, non-triangle cells, missing sections).
    """
    with open(path, encoding="utf-8") as fh:
        tokens = fh.read().split()

    def expect(idx, word):
        if tokens[idx].upper() != word:
            raise ValueError(f"expected {word} at token {idx}, got {tokens[idx]!r}")

    i = tokens.index("DATASET")
    expect(i + 1, "UNSTRUCTURED_GRID")
    i = tokens.index("POINTS")
    n_pts = int(tokens[i + 1])
    base = i + 3
    pts = np.array(tokens[base:base + 3 * n_pts], dtype=float).reshape(n_pts, 3)
    i = tokens.index("CELLS")
    n_cells = int(tokens[i + 1])
    size = int(tokens[i + 2])
    if size != 4 * n_cells:
        raise ValueError("cell list size does not match triangle cells")
    base = i + 3
    raw = np.array(tokens[base:base + size], dtype=int).reshape(n_cells, 4)
    if np.any(raw[:, 0] != 3):
        raise ValueError("non-triangle cell found")
    cells = raw[:, 1:]
    if cells.min() < 0 or cells.max() >= n_pts:
        raise ValueError("cell vertex index out of range")
    i = tokens.index("CELL_TYPES")
    base = i + 2
    types = np.array(tokens[base:base + n_cells], dtype=int)
    if np.any(types != 5):
        raise ValueError("unexpected VTK cell type")
    i = tokens.index("POINT_DATA")
    if int(tokens[i + 1]) != n_pts:
        raise ValueError("POINT_DATA count mismatch")
    j = tokens.index("LOOKUP_TABLE")
    base = j + 2
    values = np.array(tokens[base:base + n_pts], dtype=float)
    return pts, cells, values


class OutputWriter:
    """Owns the on-disk layout of one run:
    <out>/<run-name>/timeseries.csv, snapshots/u_<t>.<ext>, config.resolved."""

    def __init__(self, config, mesh, out_dir=None, run_name: str | None = None):
        from .scenarios import dumps_config
        self.config = config
        self.mesh = mesh
        base = Path(out_dir if out_dir is not None else config.output.directory)
        p = config.physics
        if run_name is None:
            run_name = f"{p.model}_alpha{p.alpha:g}"
        self.run_dir = base / run_name
        self.run_dir.mkdir(parents=True, exist_ok=True)
        (self.run_dir / "config.resolved").write_text(dumps_config(config),
                                                      encoding="utf-8")
        grid_pts = (np.arange(config.time.N + 1) / config.time.N) ** config.time.gamma \
            * config.time.T
        # snapshots land on the nearest grid level; no interpolation between
        # levels under fractional memory
        self._due = {int(np.argmin(np.abs(grid_pts - t))) for t in config.snapshot_times()}

    def snapshot_if_due(self, n: int, t: float, u) -> None:
        if n not in self._due:
            return
        for fmt in self.config.output.formats:
            ext = "vtk" if fmt == "vtk" else "csv"
            path = self.run_dir / "snapshots" / f"u_{t:.6g}.{ext}"
            write_snapshot(self.mesh, u, t, path, format=fmt)

    def finalize(self, rows) -> None:
        if rows:
            write_timeseries(rows, self.run_dir / "timeseries.csv")


# ---------------------------------------------------------------------------
# Model comparison
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ComparisonReport:
    """Side-by-side mass evolution of the two formulations on identical grids."""

    times: np.ndarray
    mass: dict                    # model name -> mass array over levels
    t_half: dict                  # model name -> first time mass >= |Omega|/2, or None
    csv_path: str | None = None


def half_capacity_time(times, mass, domain_area: float):
    """First time the total mass reaches half the carrying-capacity mass.

    Linear interpolation between levels; None when the threshold is never
    attained.  The normalizer is the domain area (mass at u = 1), not the
    final attained mass, so the two models are measured against the same
    reference.
    """
    threshold = 0.5 * domain_area
    times = np.asarray(times, dtype=float)
    mass = np.asarray(mass, dtype=float)
    if mass[0] >= threshold:
        return float(times[0])
    above = np.flatnonzero(mass >= threshold)
    if above.size == 0:
        return None
    n = int(above[0])
    m0, m1 = mass[n - 1], mass[n]
    w = (threshold - m0) / (m1 - m0)
    return float(times[n - 1] + w * (times[n] - times[n - 1]))


def compare_models(config, out_dir=None, write_outputs: bool = True) -> ComparisonReport:
    """Run both formulations on identical grids and initial data.

    Emits a side-by-side mass CSV and reports the half-capacity time of
    each model.  Failure of either run aborts with the model name attached.
    """
    from dataclasses import replace as dc_replace

    from . import models

    results = {}
    for model in models.MODELS:
        cfg = dc_replace(config, physics=dc_replace(config.physics, model=model))
        try:
            results[model] = models.run(cfg, out_dir=out_dir, write_outputs=write_outputs)
        except Exception as exc:
            raise RuntimeError(f"{model} model run failed: {exc}") from exc

    times = results["consistent"].times
    mass = {m: np.array([row.mass for row in res.rows]) for m, res in results.items()}
    x0, x1, y0, y1 = config.mesh.bounds
    area = (x1 - x0) * (y1 - y0)
    t_half = {m: half_capacity_time(times, mass[m], area) for m in mass}

    csv_path = None
    if write_outputs:
        base = Path(out_dir if out_dir is not None else config.output.directory)
        csv_path = base / "mass_comparison.csv"
        with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("t,mass_consistent,mass_caputo\n")
            for i, t in enumerate(times):
                fh.write(f"{_g17(t)},{_g17(mass['consistent'][i])},"
                         f"{_g17(mass['caputo'][i])}\n")
        csv_path = str(csv_path)
    return ComparisonReport(times=times, mass=mass, t_half=t_half, csv_path=csv_path)


# ---------------------------------------------------------------------------
# Self-verification (oracle suite behind the `verify` CLI subcommand)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


def run_verification() -> list[CheckResult]:
    """Fast oracle checks of the temporal and spatial kernels.

    Each check compares an implemented operation against an independent
    value: exact kernel identities, closed-form integrals, or analytic
    eigenvalues.  Runs in a few seconds at desk scale.
    """
    checks = []

    def add(name, passed, detail):
        checks.append(CheckResult(name=name, passed=bool(passed), detail=detail))

    grid = fractime.graded_grid(N=200, gamma=2.0, T=5.0)
    alpha = 0.6

    b = fractime.conv_weights(grid, alpha, grid.N)
    target = grid.T ** (1.0 - alpha) / math.gamma(2.0 - alpha)
    err = _rel(b.sum(), target)
    add("weights telescoping sum", err <= 1e-12, f"rel err {err:.2e}")
    add("weights positive", bool(np.all(b > 0.0)), f"min {b.min():.3e}")

    samples = 3.0 - 2.0 * grid.points
    got = fractime.caputo_l1_apply(grid, alpha, samples)
    want = -2.0 * grid.T ** (1.0 - alpha) / math.gamma(2.0 - alpha)
    err = _rel(got, want)
    add("L1 exact on affine", err <= 1e-12, f"rel err {err:.2e}")

    try:
        ok = fractime.check_sonine(0.5, 0.5, 1.0, tol=1e-8)
        add("kernel semigroup (0.5, 0.5)", ok, "quadrature vs identity")
        ok = fractime.check_sonine(0.3, 0.4, 2.0, tol=1e-8)
        add("kernel semigroup (0.3, 0.4)", ok, "quadrature vs identity")
    except fractime.QuadratureError as exc:
        add("kernel semigroup", False, f"quadrature failed: {exc}")

    ml = fractime.mittag_leffler
    err = _rel(ml(1.0, -1.0), math.exp(-1.0))
    add("Mittag-Leffler order 1 = exp", err <= 1e-12, f"rel err {err:.2e}")
    from scipy.special import erfcx
    err = max(_rel(ml(0.5, -x), float(erfcx(x))) for x in (0.3, 1.0, 3.0, 9.0, 50.0))
    add("Mittag-Leffler order 1/2 vs erfcx", err <= 1e-10, f"max rel err {err:.2e}")

    mesh = femspace.build_mesh(24, 24, (-1.0, 1.0, -1.0, 1.0))
    M = femspace.assemble_mass(mesh)
    K = femspace.assemble_stiffness(mesh)
    err = _rel(M.sum(), mesh.area)
    add("mass entries sum to area", err <= 1e-12, f"rel err {err:.2e}")
    row_max = np.abs(np.asarray(K.sum(axis=1)).ravel()).max()
    add("stiffness rows sum to zero", row_max <= 1e-12, f"max {row_max:.2e}")
    u = mesh.vertices[:, 0]
    err = abs(float(u @ (K @ u)) - mesh.area)
    add("stiffness exact on linear field", err <= 1e-10, f"abs err {err:.2e}")

    mesh_e = femspace.build_mesh(48, 48, (0.0, 1.0, 0.0, 1.0))
    lam, _ = femspace.min_eigpair(mesh_e, bc="dirichlet")
    err = _rel(lam, 2.0 * math.pi ** 2)
    add("smallest Dirichlet eigenvalue", err <= 0.01, f"rel err {err:.2e}")

    return checks
