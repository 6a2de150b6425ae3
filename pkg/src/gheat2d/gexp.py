"""Expectation queries against a two-dimensional G-normal distribution.

E[phi(x0 + sqrt(t) X)] equals u(t, x0) where u solves the G-heat equation
with initial datum phi, so a query is one march plus a nodal read. The lower
expectation comes from the duality -E[-phi].
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import (
    Grid,
    IterationReport,
    ProblemSpec,
    SolverConfig,
    UncertaintyBox,
    _ring_slices,
    make_grid,
)
from .stepper import march

__all__ = [
    "GExpQuery",
    "GExpResult",
    "GExpInterval",
    "default_half_width",
    "g_expectation",
    "upper_and_lower",
]


def default_half_width(box: UncertaintyBox, eval_time: float) -> float:
    """Truncation radius: four standard deviations of the larger marginal,
    rounded up to a half-integer so typical evaluation points stay nodes."""
    L = 4.0 * math.sqrt(eval_time * max(box.sigma1_sq_hi, box.sigma2_sq_hi))
    return max(0.5, math.ceil(L * 2.0) / 2.0)


@dataclass(frozen=True)
class GExpQuery:
    """One expectation query.

    ``payoff(x, y)`` must accept numpy arrays (scalar returns are broadcast).
    ``eval_point`` must be a node of the implied grid; no interpolation is
    performed. ``half_width`` of None picks the four-standard-deviation
    default. ``boundary`` overrides the frozen-payoff Dirichlet datum
    phi(t,x,y) = payoff(x,y) for payoffs with known far-field behavior.
    A result whose boundary_diagnostic exceeds ``warn_threshold`` carries a
    truncation warning.
    """

    payoff: Callable[[np.ndarray, np.ndarray], np.ndarray]
    box: UncertaintyBox
    eval_time: float = 1.0
    eval_point: tuple[float, float] = (0.0, 0.0)
    half_width: Optional[float] = None
    cells: int = 160
    steps: int = 400
    boundary: Optional[Callable[[float, np.ndarray, np.ndarray], np.ndarray]] = None
    warn_threshold: float = 1e-3

    def __post_init__(self):
        if self.eval_time <= 0:
            raise ValueError(f"eval_time must be positive, got {self.eval_time}")
        if self.half_width is not None and self.half_width <= 0:
            raise ValueError(f"half_width must be positive, got {self.half_width}")

    def resolved_half_width(self) -> float:
        if self.half_width is not None:
            return float(self.half_width)
        return default_half_width(self.box, self.eval_time)

    def grid(self) -> Grid:
        g = make_grid(self.resolved_half_width(), self.cells, self.eval_time, self.steps)
        g.index_of(*self.eval_point)
        return g


@dataclass(frozen=True)
class GExpResult:
    value: float
    reports: tuple[IterationReport, ...]
    boundary_diagnostic: float
    warnings: tuple[str, ...]


@dataclass(frozen=True)
class GExpInterval:
    """Upper and lower expectations of one payoff; upper >= lower always
    holds up to solver tolerance, with equality for singleton boxes."""

    upper: float
    lower: float
    upper_result: GExpResult
    lower_result: GExpResult

    @property
    def boundary_diagnostic(self) -> float:
        return max(
            self.upper_result.boundary_diagnostic,
            self.lower_result.boundary_diagnostic,
        )


def _lift(f: Callable) -> Callable:
    def lifted(x, y):
        return np.broadcast_to(np.asarray(f(x, y), dtype=float), np.shape(x))
    return lifted


def g_expectation(query: GExpQuery, cfg: SolverConfig = SolverConfig()) -> GExpResult:
    """March the G-heat equation for the query's payoff and read u(T, x0).

    boundary_diagnostic is max over the boundary ring of |u - payoff| at the
    final time: zero by construction under the default frozen-payoff boundary,
    and a direct measure of how much an overriding boundary departs from the
    payoff (the truncation signal) otherwise.
    """
    grid = query.grid()
    i, j = grid.index_of(*query.eval_point)
    payoff = _lift(query.payoff)

    if query.boundary is not None:
        user_boundary = query.boundary
        def boundary(t, x, y):
            return np.broadcast_to(np.asarray(user_boundary(t, x, y), dtype=float), np.shape(x))
    else:
        def boundary(t, x, y):
            return payoff(x, y)

    problem = ProblemSpec(initial=payoff, boundary=boundary, box=query.box)
    lattice = march(problem, grid, cfg)

    X, Y = grid.meshes()
    final = lattice.final
    diag = 0.0
    for sl in _ring_slices(grid.cells_per_axis):
        d = np.abs(final[sl] - payoff(X[sl], Y[sl]))
        if d.size:
            diag = max(diag, float(d.max()))

    warnings = list(lattice.warnings)
    if diag > query.warn_threshold:
        warnings.append(
            f"boundary diagnostic {diag:.3e} exceeds threshold "
            f"{query.warn_threshold:.3e}; consider enlarging half_width"
        )
    return GExpResult(
        value=float(final[i, j]),
        reports=tuple(lattice.reports),
        boundary_diagnostic=diag,
        warnings=tuple(warnings),
    )


def _negated(query: GExpQuery) -> GExpQuery:
    payoff = query.payoff
    boundary = query.boundary
    neg_boundary = None
    if boundary is not None:
        def neg_boundary(t, x, y):
            return -np.asarray(boundary(t, x, y), dtype=float)
    return GExpQuery(
        payoff=lambda x, y: -np.asarray(payoff(x, y), dtype=float),
        box=query.box,
        eval_time=query.eval_time,
        eval_point=query.eval_point,
        half_width=query.half_width,
        cells=query.cells,
        steps=query.steps,
        boundary=neg_boundary,
        warn_threshold=query.warn_threshold,
    )


def upper_and_lower(query: GExpQuery, cfg: SolverConfig = SolverConfig()) -> GExpInterval:
    """Upper expectation of the payoff and the dual lower expectation
    -E[-phi], each from its own march."""
    up = g_expectation(query, cfg)
    down = g_expectation(_negated(query), cfg)
    return GExpInterval(
        upper=up.value,
        lower=-down.value,
        upper_result=up,
        lower_result=down,
    )
