"""The Picard inner iteration per time step and the outer time march, plus
runtime verifiers for qualitative solver guarantees (monotone inner iterates,
comparison of ordered problems) and the nonlinear scheme residual used by the
monotonicity tests.
"""

from __future__ import annotations

import math
from typing import Callable, Optional

import numpy as np

from ._backend import kernels
from .core import (
    Grid,
    IterationReport,
    ProblemSpec,
    SolutionLattice,
    SolverConfig,
    _ring_slices,
    validate_box,
)
from .errors import IterationCapError
from .linsys import assemble, build_coefficients, solve, validate_m_matrix

__all__ = [
    "picard_step",
    "march",
    "scheme_residual",
    "verify_monotone_iteration",
    "verify_comparison",
]


def picard_step(
    U_n: np.ndarray,
    t_next: float,
    problem: ProblemSpec,
    grid: Grid,
    cfg: SolverConfig,
    keep_iterates: bool = False,
) -> tuple[np.ndarray, IterationReport]:
    """Advance one time level.

    Freezes the coefficient selections at the previous iterate (starting from
    the previous time level), solves the resulting linear interior system and
    repeats until consecutive iterates agree to cfg.tol_picard in the interior
    infinity norm. Boundary nodes of the result carry the boundary datum at
    t_next. The report counts iterates formed (initial freeze included), so a
    step whose first increment is already small reports 2.
    """
    M = grid.cells_per_axis
    X, Y = grid.meshes()

    def boundary_fn(x, y):
        return problem.boundary(t_next, x, y)

    forcing_fn: Optional[Callable] = None
    if problem.forcing is not None:
        def forcing_fn(x, y):
            return problem.forcing(t_next, x, y)

    ring = np.zeros((M + 1, M + 1))
    for sl in _ring_slices(M):
        ring[sl] = np.asarray(boundary_fn(X[sl], Y[sl]), dtype=float)

    iterate = np.ascontiguousarray(U_n, dtype=np.float64).copy()
    snapshots = [iterate.copy()] if keep_iterates else None
    prev_interior = iterate[1:-1, 1:-1].copy()

    increments: list[float] = []
    min_gain = math.inf
    m_matrix_ok = True
    sweeps = 0
    coeffs = None

    for k in range(1, cfg.k_max + 1):
        coeffs = build_coefficients(iterate, grid, problem.box)
        op = assemble(U_n, coeffs, grid, boundary_fn, forcing_fn)
        m_matrix_ok = m_matrix_ok and validate_m_matrix(op).is_m_matrix
        result = solve(op, cfg.tol_lin, x0=prev_interior)
        sweeps += result.sweeps

        inc = float(np.abs(result.x - prev_interior).max(initial=0.0))
        increments.append(inc)
        if k >= 2:
            min_gain = min(min_gain, float((result.x - prev_interior).min()))
        prev_interior = result.x

        iterate = ring.copy()
        iterate[1:-1, 1:-1] = result.x
        if keep_iterates:
            snapshots.append(iterate.copy())

        if inc <= cfg.tol_picard:
            report = IterationReport(
                iterations=k + 1,
                increments=tuple(increments),
                min_interior_gain=min_gain,
                m_matrix_ok=m_matrix_ok,
                sweeps=sweeps,
                tol_lin=cfg.tol_lin,
                coefficient_stats=coeffs.stats() if cfg.record_coefficients else None,
                iterates=tuple(snapshots) if keep_iterates else None,
            )
            return iterate, report

    report = IterationReport(
        iterations=cfg.k_max + 1,
        increments=tuple(increments),
        min_interior_gain=min_gain,
        m_matrix_ok=m_matrix_ok,
        sweeps=sweeps,
        tol_lin=cfg.tol_lin,
        coefficient_stats=coeffs.stats() if cfg.record_coefficients else None,
        iterates=tuple(snapshots) if keep_iterates else None,
    )
    raise IterationCapError(report, partial=iterate)


def march(
    problem: ProblemSpec,
    grid: Grid,
    cfg: SolverConfig,
    override_diag_dom: bool = False,
    on_level: Optional[Callable[[int, float, np.ndarray], None]] = None,
    keep_levels: bool = True,
) -> SolutionLattice:
    """March the implicit scheme from t = 0 to t = T.

    Refuses boxes that are not diagonally dominated unless told otherwise
    (the interior guarantees do not apply there; the solve falls back to a
    direct factorization when dominance actually fails row-wise).
    ``on_level(n, t, level)`` is called for every completed level, level 0
    included; with keep_levels=False the lattice array is not stored, which
    is how reference-scale marches keep memory flat.
    """
    diag = validate_box(problem.box)
    warnings: list[str] = []
    if not diag.diag_dom_ok:
        if not override_diag_dom:
            raise ValueError(
                "box violates the diagonal-dominance requirement "
                "(sigma1_sq_lo and sigma2_sq_lo must be >= max|b12| at all "
                "corners); pass override_diag_dom=True to march anyway"
            )
        warnings.append(
            "diagonal dominance override active: monotonicity and stability "
            "guarantees do not apply"
        )

    M, N = grid.cells_per_axis, grid.steps
    X, Y = grid.meshes()
    ts = grid.times()
    U = np.ascontiguousarray(problem.initial(X, Y), dtype=np.float64)
    if U.shape != (M + 1, M + 1):
        raise ValueError("initial datum did not evaluate to a full level")

    values = np.empty((N + 1, M + 1, M + 1)) if keep_levels else None
    if keep_levels:
        values[0] = U
    if on_level is not None:
        on_level(0, 0.0, U)

    max_abs = float(np.abs(U).max())
    data_bound = max_abs
    reports: list[IterationReport] = []

    for n in range(N):
        try:
            U, rep = picard_step(U, ts[n + 1], problem, grid, cfg)
        except IterationCapError as err:
            partial = err.partial
            if keep_levels:
                partial = SolutionLattice(grid, values[: n + 1].copy(), reports, warnings)
            raise IterationCapError(err.report, partial, step=n) from None
        reports.append(rep)
        if keep_levels:
            values[n + 1] = U
        if on_level is not None:
            on_level(n + 1, ts[n + 1], U)
        max_abs = max(max_abs, float(np.abs(U).max()))
        ring_max = max(float(np.abs(U[sl]).max()) for sl in _ring_slices(M))
        data_bound = max(data_bound, ring_max)

    if problem.forcing is None and diag.diag_dom_ok:
        # zero-forcing stability: values never exceed the data bound beyond
        # accumulated linear-solve noise
        slack = N * 10.0 * cfg.tol_lin * max(1.0, data_bound)
        if max_abs > data_bound + slack:
            raise RuntimeError(
                f"stability bound violated: max |U| = {max_abs:.6e} exceeds "
                f"data bound {data_bound:.6e} + slack {slack:.3e}"
            )

    return SolutionLattice(
        grid=grid,
        values=values if keep_levels else np.empty((0, M + 1, M + 1)),
        reports=reports,
        warnings=warnings,
    )


def scheme_residual(
    U_next: np.ndarray,
    U_prev: np.ndarray,
    grid: Grid,
    box,
    forcing_at_next: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None,
) -> np.ndarray:
    """The nonlinear per-node residual g of the implicit scheme.

    g[i,j] = (A(U_next) U_next)[i,j] - U_prev[i,j]/dt - f[i,j] over interior
    nodes, with A carrying the coefficients selected from U_next itself and
    boundary neighbors read from U_next's ring. Built from the same selection
    and assembly kernels the solver uses.
    """
    M = grid.cells_per_axis
    m = M - 1
    u = np.ascontiguousarray(U_next, dtype=np.float64)
    coeffs = build_coefficients(u, grid, box)
    weights = np.empty((m, m, 9))
    kernels.assemble_stencil(
        coeffs.sigma1_sq, coeffs.sigma2_sq, coeffs.b12, coeffs.alpha,
        grid.dt, grid.h, weights,
    )
    g = np.empty((m, m))
    kernels.apply_stencil(weights, u, g)
    g -= np.asarray(U_prev, dtype=float)[1:-1, 1:-1] / grid.dt
    if forcing_at_next is not None:
        X, Y = grid.meshes()
        g -= np.asarray(forcing_at_next(X[1:-1, 1:-1], Y[1:-1, 1:-1]), dtype=float)
    return g


def verify_monotone_iteration(report: IterationReport) -> bool:
    """True iff iterates from the first solve onward never decreased.

    Needs a report produced with keep_iterates=True; the comparison skips the
    initial frozen iterate (the first solve may move values either way) and
    allows 10*tol_lin of solver noise.
    """
    if report.iterates is None:
        raise ValueError("report has no iterate snapshots; rerun with keep_iterates=True")
    tol = 10.0 * report.tol_lin
    its = report.iterates
    for a, b in zip(its[1:], its[2:]):
        if float((b[1:-1, 1:-1] - a[1:-1, 1:-1]).min()) < -tol:
            return False
    return True


def verify_comparison(
    problem_hi: ProblemSpec,
    problem_lo: ProblemSpec,
    grid: Grid,
    cfg: SolverConfig,
) -> bool:
    """March both problems and check the solutions stay ordered.

    Preconditions (checked, violation raises): same box, same forcing, and
    initial_hi >= initial_lo at all nodes, boundary_hi >= boundary_lo on the
    ring at all time levels. Returns True iff U_hi >= U_lo - 10*tol_picard
    at every node of every level.
    """
    if problem_hi.box != problem_lo.box:
        raise ValueError("problems must share the uncertainty box")
    if problem_hi.forcing is not problem_lo.forcing:
        raise ValueError("problems must share the forcing term")

    X, Y = grid.meshes()
    d0 = np.asarray(problem_hi.initial(X, Y), float) - np.asarray(problem_lo.initial(X, Y), float)
    if d0.min() < 0.0:
        raise ValueError("initial data are not ordered (hi < lo somewhere)")
    for t in grid.times():
        for sl in _ring_slices(grid.cells_per_axis):
            db = np.asarray(problem_hi.boundary(t, X[sl], Y[sl]), float) - np.asarray(
                problem_lo.boundary(t, X[sl], Y[sl]), float
            )
            if db.min() < 0.0:
                raise ValueError(f"boundary data are not ordered at t={t}")

    hi = march(problem_hi, grid, cfg)
    lo = march(problem_lo, grid, cfg)
    gap = float((hi.values - lo.values).min())
    return gap >= -10.0 * cfg.tol_picard
