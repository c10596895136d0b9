"""Cell-marching spectral solver for nonlinear Goursat problems.

Solves u_xy + N(u) u = f on a rectangle with data on the coordinate axes by a
rank-m series of corrections: the rank-0 field freezes the multiplier N(u) at
each mesh cell's lower-left corner (making every cell a closed-form
constant-coefficient problem via the Riemann kernel), and each further rank
solves a linear correction problem whose source is assembled from Adomian
polynomials of the multiplier.  The error decays geometrically in the rank
with a ratio that shrinks as the mesh is refined.
"""

from .field import (
    EdgeTrace,
    Grid,
    PiecewiseField,
    cheb_nodes,
    corner_table,
    edge_derivative,
    edge_trace,
    eval_field,
    integrate_1d,
    integrate_2d,
    max_edge_jump,
)
from .harness import (
    ErrorReport,
    ErrorRow,
    Preset,
    StudySpec,
    characteristic_transform,
    convergence_study,
    error_norm1,
    error_vs_exact,
    fd_solve,
    liouville_multiplier,
    liouville_problem,
    mu_bound_check,
    mu_explicit,
    mu_recurrence,
    run_selftest,
)
from .kernels import KernelRangeError, RiemannKernel, hyp0f1, riemann, riemann_d1, riemann_d2
from .series import (
    Nonlinearity,
    TruncatedSeries,
    adomian_partition,
    series_compose_nonlinearity,
    series_mul,
)
from .solver import (
    FdExpansion,
    FdSolverError,
    GoursatProblem,
    correction_rhs,
    picard_cell_oracle,
    residual_basic,
    residual_correction,
    solve_basic,
    solve_cell_linear,
    solve_correction,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "Grid", "PiecewiseField", "EdgeTrace", "cheb_nodes", "eval_field",
    "edge_trace", "edge_derivative", "integrate_1d", "integrate_2d",
    "corner_table", "max_edge_jump",
    "KernelRangeError", "RiemannKernel", "hyp0f1", "riemann", "riemann_d1", "riemann_d2",
    "TruncatedSeries", "Nonlinearity", "series_mul", "series_compose_nonlinearity",
    "adomian_partition",
    "GoursatProblem", "FdExpansion", "FdSolverError", "solve_cell_linear",
    "picard_cell_oracle", "solve_basic", "correction_rhs", "solve_correction",
    "residual_basic", "residual_correction",
    "Preset", "StudySpec", "ErrorRow", "ErrorReport", "fd_solve", "error_vs_exact",
    "error_norm1", "convergence_study", "mu_recurrence", "mu_explicit",
    "mu_bound_check", "characteristic_transform", "liouville_problem",
    "liouville_multiplier", "run_selftest",
]
