"""Cell-marching solver for u_xy + N(u) u = f with data on the axes.

Rank 0 ("basic problem"): on each mesh cell the multiplier N(u) is frozen at
the cell's lower-left corner value, so the cell problem is linear with a
constant coefficient and is solved in closed form through the Riemann kernel:

    u(x, y) = u(x0, y) + int_{x0}^{x} R(xi, y0; x, y) du/dxi(xi, y0) dxi
            - int_{y0}^{y} dR/deta(x0, eta; x, y) u(x0, eta) deta
            + int_{x0}^{x} int_{y0}^{y} R(xi, eta; x, y) rhs(xi, eta) dxi deta.

Cells are marched in wavefront order, so each cell's corner value and edge
traces are available when the cell is reached.  Higher ranks solve linear
correction problems on the same cells; their sources combine Adomian
polynomials of the multiplier evaluated at corner values (a piecewise
constant field) and at the running point, plus an explicit source
-N'(u0_corner) * uk_corner * u0(x, y) carrying the correction's own corner
value, which the march has already produced.

All integrals use fresh Clenshaw-Curtis rules on the variable sub-intervals
with integrands interpolated barycentrically from the cell tensors.  The
sub-interval geometry in cell-local coordinates is identical for every cell,
so the interpolation tensors are precomputed once per order P.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from functools import lru_cache
from typing import Callable

import numpy as np

from .field import (
    Grid,
    PiecewiseField,
    _sample_2d,
    bary_matrix,
    cheb_diff_matrix,
    corner_table,
    unit_cc_weights,
    unit_cheb_nodes,
)
from .kernels import hyp0f1_array
from .series import Nonlinearity, compose_with_tail

__all__ = [
    "GoursatProblem",
    "FdExpansion",
    "FdSolverError",
    "solve_cell_linear",
    "picard_cell_oracle",
    "solve_basic",
    "correction_rhs",
    "solve_correction",
    "residual_basic",
    "residual_correction",
]

TRACE_MATCH_TOL = 1.0e-10


class FdSolverError(RuntimeError):
    """Cell-level failure during a march, tagged with the cell index."""


@dataclass(frozen=True)
class GoursatProblem:
    """Problem data: u_xy + N(u) u = f, u(x, 0) = psi(x), u(0, y) = phi(y)."""

    X: float
    Y: float
    psi: Callable[[float], float]
    phi: Callable[[float], float]
    f: Callable[[float, float], float]
    nonlinearity: Nonlinearity

    def __post_init__(self):
        if self.X <= 0 or self.Y <= 0:
            raise ValueError(f"domain extents must be positive, got X={self.X}, Y={self.Y}")
        p0, q0 = float(self.psi(0.0)), float(self.phi(0.0))
        if abs(p0 - q0) > 1.0e-12 * (1.0 + abs(p0)):
            raise ValueError(f"incompatible corner data: psi(0)={p0!r}, phi(0)={q0!r}")


@dataclass
class FdExpansion:
    """Corrections u^(0)..u^(m) with their corner tables and frozen coefficients."""

    problem: GoursatProblem
    grid: Grid
    order: int
    corrections: list = dc_field(default_factory=list)
    corner_tables: list = dc_field(default_factory=list)
    cell_coeffs: np.ndarray | None = None

    @property
    def rank(self) -> int:
        return len(self.corrections) - 1

    def partial_sum(self, m: int) -> PiecewiseField:
        """The rank-m approximation: pointwise sum of corrections 0..m."""
        if not 0 <= m <= self.rank:
            raise ValueError(f"partial sum rank must be in 0..{self.rank}, got {m}")
        total = self.corrections[0].values.copy()
        for k in range(1, m + 1):
            total += self.corrections[k].values
        return PiecewiseField(self.grid, total)


class _CellEngine:
    """Order-P tensors shared by every cell solve.

    With sigma the CGL nodes of [0, 1], the Clenshaw-Curtis rule for the
    sub-interval [0, sigma_t] uses nodes sigma_t * sigma_q, so both the
    interpolation tensor W[t, q, p] (cell nodes -> sub-rule nodes) and the
    offset matrix DXM[t, q] = sigma_t * (sigma_q - 1) are mesh independent.
    """

    def __init__(self, p: int):
        self.p = p
        sigma = unit_cheb_nodes(p)
        self.sigma = sigma
        self.wcc = unit_cc_weights(p)
        self.diff01 = cheb_diff_matrix(sigma)
        w = np.empty((p, p, p))
        for t in range(p):
            w[t] = bary_matrix(sigma[t] * sigma, sigma)
        self.W = w
        self.Wflat = w.reshape(p * p, p)
        self.DXM = sigma[:, None] * (sigma[None, :] - 1.0)
        self.OUTER4 = np.multiply.outer(self.DXM, self.DXM)  # [t,q,u,r]
        self.OUTER2 = np.multiply.outer(self.DXM, sigma)  # [t,q,u]
        self.OUTER3 = np.multiply.outer(sigma, self.DXM)  # [t,u,r]
        self.WSUB = sigma[:, None] * self.wcc[None, :]  # [t,q] sub-rule weights / h


@lru_cache(maxsize=8)
def _engine(p: int) -> _CellEngine:
    return _CellEngine(p)


def _cell_solve(eng: _CellEngine, c: float, h1: float, h2: float,
                left: np.ndarray, bottom: np.ndarray, rhs_vals: np.ndarray) -> np.ndarray:
    """One constant-coefficient cell via the Riemann representation.

    `left`/`bottom` are the P edge samples, `rhs_vals` the P x P source
    tensor on the cell's own nodes.  Returns the P x P solution tensor.
    """
    p = eng.p
    zc = -c * h1 * h2
    zmax = abs(zc)

    ws1 = h1 * eng.WSUB
    ws2 = h2 * eng.WSUB

    # d/dxi of the bottom trace, interpolated to every sub-rule node
    bprime = (eng.diff01 @ bottom) / h1
    bq = eng.W @ bprime  # [t,q]
    r2 = hyp0f1_array(1.0, -zc * eng.OUTER2, zmax)
    term2 = np.einsum("tq,tqu->tu", ws1 * bq, r2)

    # -int dR/deta * left-trace; dR/deta = 0F1(2; z) * c * (x_t - x0)
    lr = eng.W @ left  # [u,r]
    r3 = hyp0f1_array(2.0, -zc * eng.OUTER3, zmax)
    term3 = -(c * h1) * eng.sigma[:, None] * np.einsum("tur,ur->tu", r3, ws2 * lr)

    # area term: interpolate rhs to the tensor sub-rule nodes, weight by R
    g = hyp0f1_array(1.0, zc * eng.OUTER4, zmax)
    rq = (eng.Wflat @ rhs_vals @ eng.Wflat.T).reshape(p, p, p, p)
    g *= rq
    g *= ws1[:, :, None, None]
    g *= ws2[None, None, :, :]
    term4 = g.sum(axis=(1, 3))

    return left[None, :] + term2 + term3 + term4


def _check_corner(left: np.ndarray, bottom: np.ndarray, corner_value: float):
    scale = 1.0 + abs(corner_value)
    if abs(left[0] - corner_value) > TRACE_MATCH_TOL * scale or \
       abs(bottom[0] - corner_value) > TRACE_MATCH_TOL * scale:
        raise ValueError(
            f"edge traces disagree with the corner value: left[0]={left[0]!r}, "
            f"bottom[0]={bottom[0]!r}, corner={corner_value!r}"
        )


def _trace_values(trace, p: int, a: float, b: float) -> np.ndarray:
    values = np.asarray(getattr(trace, "values", trace), dtype=float)
    if values.shape != (p,):
        raise ValueError(f"trace must carry {p} CGL samples, got shape {values.shape}")
    return values


def solve_cell_linear(c: float, left_trace, bottom_trace, corner_value: float,
                      rhs: Callable[[float, float], float], rect, p: int) -> np.ndarray:
    """Solve u_xy + c*u = rhs on one cell from its left/bottom traces.

    Traces are P CGL samples (arrays or EdgeTrace) on the cell sides; the
    result is the P x P tensor on the cell nodes, whose left and bottom edges
    reproduce the traces.
    """
    x0, x1, y0, y1 = rect
    if not (x0 < x1 and y0 < y1):
        raise ValueError(f"degenerate cell rectangle {rect}")
    eng = _engine(p)
    left = _trace_values(left_trace, p, y0, y1)
    bottom = _trace_values(bottom_trace, p, x0, x1)
    _check_corner(left, bottom, corner_value)
    xn = x0 + (x1 - x0) * eng.sigma
    yn = y0 + (y1 - y0) * eng.sigma
    xn[0], xn[-1] = x0, x1
    yn[0], yn[-1] = y0, y1
    rhs_vals = _sample_2d(rhs, xn, yn)
    return _cell_solve(eng, c, x1 - x0, y1 - y0, left, bottom, rhs_vals)


def picard_cell_oracle(c: float, left_trace, bottom_trace, corner_value: float,
                       rhs: Callable[[float, float], float], rect, p: int,
                       tol: float = 1.0e-13, max_iter: int = 100) -> np.ndarray:
    """Independent cell solution by Picard iteration on the integral form.

    Iterates u <- B + int int (rhs - c*u) over [x0, x] x [y0, y], where B is
    the boundary combination left(y) + bottom(x) - corner.  The iteration
    contracts only when |c| * h1 * h2 < 1; larger cells are rejected.  Shares
    no code with the Riemann representation path except interpolation
    plumbing.
    """
    x0, x1, y0, y1 = rect
    h1, h2 = x1 - x0, y1 - y0
    if abs(c) * h1 * h2 >= 1.0:
        raise ValueError(f"no contraction: |c|*h1*h2 = {abs(c) * h1 * h2:.3g} >= 1")
    eng = _engine(p)
    left = _trace_values(left_trace, p, y0, y1)
    bottom = _trace_values(bottom_trace, p, x0, x1)
    _check_corner(left, bottom, corner_value)
    xn = x0 + h1 * eng.sigma
    yn = y0 + h2 * eng.sigma
    xn[0], xn[-1] = x0, x1
    yn[0], yn[-1] = y0, y1
    rhs_vals = _sample_2d(rhs, xn, yn)
    boundary = bottom[:, None] + left[None, :] - corner_value
    ws1 = h1 * eng.WSUB
    ws2 = h2 * eng.WSUB
    u = np.zeros((p, p))
    for _ in range(max_iter):
        w = rhs_vals - c * u
        wq = (eng.Wflat @ w @ eng.Wflat.T).reshape(p, p, p, p)
        wq *= ws1[:, :, None, None]
        wq *= ws2[None, None, :, :]
        new = boundary + wq.sum(axis=(1, 3))
        change = float(np.max(np.abs(new - u)))
        u = new
        if change <= tol:
            return u
    raise FdSolverError(f"picard iteration did not reach {tol:.1e} in {max_iter} steps")


def _march(grid: Grid, p: int, cell_fn, threads: int = 1) -> np.ndarray:
    """Run cell_fn over all cells in wavefront (anti-diagonal) order.

    cell_fn(i, j, values) must only read cells (i-1, j) and (i, j-1), which
    are complete by construction; results are independent of scheduling
    because every cell's arithmetic is self-contained.
    """
    n1, n2 = grid.N1, grid.N2
    values = np.full((n1, n2, p, p), np.nan)

    def run(i, j):
        try:
            values[i, j] = cell_fn(i, j, values)
        except Exception as exc:
            raise FdSolverError(f"cell ({i}, {j}): {exc}") from exc

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for d in range(n1 + n2 - 1):
                cells = [(i, d - i) for i in range(max(0, d - n2 + 1), min(n1, d + 1))]
                for fut in [pool.submit(run, i, j) for i, j in cells]:
                    fut.result()
    else:
        for d in range(n1 + n2 - 1):
            for i in range(max(0, d - n2 + 1), min(n1, d + 1)):
                run(i, d - i)
    return values


def _axis_samples(fn, nodes_1d) -> np.ndarray:
    return np.array([float(fn(v)) for v in nodes_1d])


def _cell_axis_nodes(grid: Grid, p: int):
    s = unit_cheb_nodes(p)
    xs, ys = [], []
    for i in range(grid.N1):
        x0, x1 = grid.x_nodes[i], grid.x_nodes[i + 1]
        xn = x0 + (x1 - x0) * s
        xn[0], xn[-1] = x0, x1
        xs.append(xn)
    for j in range(grid.N2):
        y0, y1 = grid.y_nodes[j], grid.y_nodes[j + 1]
        yn = y0 + (y1 - y0) * s
        yn[0], yn[-1] = y0, y1
        ys.append(yn)
    return xs, ys


def solve_basic(problem: GoursatProblem, grid: Grid, p: int, threads: int = 1):
    """Rank-0 field: N frozen at each cell's lower-left corner, rhs = f.

    Marches cells in wavefront order, freezing c_ij = N(u0(x_{i-1}, y_{j-1}))
    from data already computed, then solving the cell in closed form.
    Returns (field, corner table, cell coefficient array).
    """
    eng = _engine(p)
    nl = problem.nonlinearity
    xs, ys = _cell_axis_nodes(grid, p)
    psi_cells = [_axis_samples(problem.psi, xn) for xn in xs]
    phi_cells = [_axis_samples(problem.phi, yn) for yn in ys]
    coeffs = np.empty((grid.N1, grid.N2))
    h1, h2 = grid.h1, grid.h2

    def cell(i, j, values):
        left = phi_cells[j] if i == 0 else values[i - 1, j, -1, :]
        bottom = psi_cells[i] if j == 0 else values[i, j - 1, :, -1]
        if not (np.all(np.isfinite(left)) and np.all(np.isfinite(bottom))):
            raise RuntimeError("trace read before neighbor cell was solved")
        corner = float(left[0])
        _check_corner(left, bottom, corner)
        c = float(nl.eval(corner))
        coeffs[i, j] = c
        rhs_vals = _sample_2d(problem.f, xs[i], ys[j])
        return _cell_solve(eng, c, h1, h2, left, bottom, rhs_vals)

    values = _march(grid, p, cell, threads)
    field = PiecewiseField(grid, values)
    return field, corner_table(field), coeffs


def _corner_adomians(nl: Nonlinearity, corners: list[float], k: int) -> np.ndarray:
    """A_0..A_k of N at the corner values u0..u^(k-1), with the top slot zero.

    One composition of order k delivers every scalar Adomian polynomial the
    rank-k source needs, including A_k(...; u0..u^(k-1), 0).
    """
    taylor = nl.taylor_at(corners[0], k)
    tail = np.zeros(k + 1)
    tail[1:k] = corners[1:k]
    return compose_with_tail(taylor, tail)


def _running_adomians(nl: Nonlinearity, cell_tensors: list[np.ndarray], k: int) -> np.ndarray:
    """A_0..A_{k-1} of N at the running-point values, over a whole cell tensor."""
    flat = [t.ravel() for t in cell_tensors]
    taylor = nl.taylor_at(flat[0], k - 1)
    tail = np.zeros_like(taylor)
    for s in range(1, k):
        tail[s] = flat[s]
    return compose_with_tail(taylor, tail)


def _correction_source_cell(expansion: FdExpansion, k: int, i: int, j: int) -> np.ndarray:
    """The rank-k Adomian source F^(k) sampled on cell (i, j)'s tensor nodes."""
    nl = expansion.problem.nonlinearity
    corners = [float(expansion.corner_tables[s][i, j]) for s in range(k)]
    a_corner = _corner_adomians(nl, corners, k)
    tensors = [expansion.corrections[s].values[i, j] for s in range(k)]
    a_run = _running_adomians(nl, tensors, k)

    shape = tensors[0].shape
    f = np.zeros(shape[0] * shape[1])
    flat = [t.ravel() for t in tensors]
    for s in range(1, k):
        f -= a_corner[k - s] * flat[s]
    for s in range(k):
        f += (a_corner[k - 1 - s] - a_run[k - 1 - s]) * flat[s]
    f -= a_corner[k] * flat[0]
    return f.reshape(shape)


def correction_rhs(expansion: FdExpansion, k: int, cell, point) -> float:
    """F^(k) at a point of one cell, by the same Adomian assembly as the march.

    Corner-value arguments come from the cell's own lower-left corner even on
    shared edges, so the cell index is part of the signature.
    """
    if k < 1:
        raise ValueError(f"corrections start at k=1, got k={k}")
    if len(expansion.corrections) < k:
        raise ValueError(f"corrections 0..{k - 1} must be complete, have {len(expansion.corrections)}")
    i, j = cell
    x, y = point
    nl = expansion.problem.nonlinearity
    corners = [float(expansion.corner_tables[s][i, j]) for s in range(k)]
    a_corner = _corner_adomians(nl, corners, k)
    here = [expansion.corrections[s].evaluate_in_cell(i, j, x, y) for s in range(k)]
    taylor = nl.taylor_at(here[0], k - 1)
    tail = np.zeros(k)
    tail[1:k] = here[1:k]
    a_run = compose_with_tail(taylor, tail)

    val = 0.0
    for s in range(1, k):
        val -= a_corner[k - s] * here[s]
    for s in range(k):
        val += (a_corner[k - 1 - s] - a_run[k - 1 - s]) * here[s]
    val -= a_corner[k] * here[0]
    return float(val)


def solve_correction(expansion: FdExpansion, k: int, threads: int = 1) -> PiecewiseField:
    """The rank-k correction field, vanishing on both axes.

    Each cell solves u_xy + c_ij u = F^(k) - N'(u0_corner) * uk_corner * u0,
    where uk_corner is this correction's own lower-left corner value, already
    known from the march.
    """
    if k < 1:
        raise ValueError(f"corrections start at k=1, got k={k}")
    if len(expansion.corrections) != k:
        raise ValueError(f"expected corrections 0..{k - 1} complete, have {len(expansion.corrections)}")
    grid, p = expansion.grid, expansion.order
    eng = _engine(p)
    nl = expansion.problem.nonlinearity
    u0 = expansion.corrections[0].values
    coeffs = expansion.cell_coeffs
    nprime = nl.deriv(expansion.corner_tables[0][:-1, :-1])
    h1, h2 = grid.h1, grid.h2
    zero = np.zeros(p)

    def cell(i, j, values):
        left = zero if i == 0 else values[i - 1, j, -1, :]
        bottom = zero if j == 0 else values[i, j - 1, :, -1]
        if not (np.all(np.isfinite(left)) and np.all(np.isfinite(bottom))):
            raise RuntimeError("trace read before neighbor cell was solved")
        corner = float(left[0])
        _check_corner(left, bottom, corner)
        rhs_vals = _correction_source_cell(expansion, k, i, j)
        rhs_vals = rhs_vals - nprime[i, j] * corner * u0[i, j]
        return _cell_solve(eng, float(coeffs[i, j]), h1, h2, left, bottom, rhs_vals)

    return PiecewiseField(grid, _march(grid, p, cell, threads))


def _cross_derivative(values_cell: np.ndarray, d01: np.ndarray, h1: float, h2: float) -> np.ndarray:
    return (d01 @ values_cell @ d01.T) / (h1 * h2)


def residual_basic(expansion: FdExpansion) -> np.ndarray:
    """Per-cell sup residual of the frozen-coefficient equation at interior nodes."""
    grid, p = expansion.grid, expansion.order
    eng = _engine(p)
    u0 = expansion.corrections[0]
    xs, ys = _cell_axis_nodes(grid, p)
    out = np.empty((grid.N1, grid.N2))
    for i in range(grid.N1):
        for j in range(grid.N2):
            cell = u0.values[i, j]
            fv = _sample_2d(expansion.problem.f, xs[i], ys[j])
            res = _cross_derivative(cell, eng.diff01, grid.h1, grid.h2)
            res += expansion.cell_coeffs[i, j] * cell - fv
            out[i, j] = np.max(np.abs(res[1:-1, 1:-1]))
    return out


def residual_correction(expansion: FdExpansion, k: int) -> np.ndarray:
    """Per-cell sup residual of the rank-k correction equation at interior nodes."""
    if not 1 <= k <= expansion.rank:
        raise ValueError(f"have corrections 0..{expansion.rank}, got k={k}")
    grid, p = expansion.grid, expansion.order
    eng = _engine(p)
    nl = expansion.problem.nonlinearity
    uk = expansion.corrections[k]
    u0 = expansion.corrections[0]
    nprime = nl.deriv(expansion.corner_tables[0][:-1, :-1])
    out = np.empty((grid.N1, grid.N2))
    for i in range(grid.N1):
        for j in range(grid.N2):
            cell = uk.values[i, j]
            res = _cross_derivative(cell, eng.diff01, grid.h1, grid.h2)
            res += expansion.cell_coeffs[i, j] * cell
            res += nprime[i, j] * expansion.corner_tables[k][i, j] * u0.values[i, j]
            res -= _correction_source_cell(expansion, k, i, j)
            out[i, j] = np.max(np.abs(res[1:-1, 1:-1]))
    return out
