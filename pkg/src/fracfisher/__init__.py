"""fracfisher: time-fractional Fisher-KPP solvers at desk scale.

Subpackages by responsibility:

  fractime    graded grids, convolution-quadrature weights, L1 coefficients,
              Mittag-Leffler function, kernel identity checks
  femspace    structured P1 elements: mesh, mass/stiffness/reaction assembly,
              boundary conditions, integrals, smallest eigenpair
  sparsela    CSR matvec, Jacobi-preconditioned CG, damped Newton
  models      the memory-consistent and Caputo-in-time steppers, the run
              driver, and the 0-D scalar verification mode
  scenarios   initial conditions and the run configuration format
  observe_io  observables, CSV/VTK writers, model comparison, verification
"""

from . import femspace, fractime, models, observe_io, scenarios, sparsela
from .fractime import (TimeGrid, conv_weights, caputo_l1_apply, graded_grid,
                       l1_coeffs, mittag_leffler)
from .femspace import build_mesh
from .models import ModelParams, run, scalar_solve
from .scenarios import RunConfig, load_config

__all__ = [
    "femspace", "fractime", "models", "observe_io", "scenarios", "sparsela",
    "TimeGrid", "conv_weights", "caputo_l1_apply", "graded_grid", "l1_coeffs",
    "mittag_leffler", "build_mesh", "ModelParams", "run", "scalar_solve",
    "RunConfig", "load_config",
]

__version__ = "0.1.0"
