"""Domain types shared by every module: grids, uncertainty sets, problem
specifications, solver configuration and solution storage.

All types are immutable after construction except :class:`SolutionLattice`,
which is filled by exactly one march and safe to read concurrently afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "UncertaintyBox",
    "BoxDiagnostics",
    "Grid",
    "ProblemSpec",
    "SolverConfig",
    "CoefficientStats",
    "IterationReport",
    "SolutionLattice",
    "make_grid",
    "validate_box",
]


@dataclass(frozen=True)
class UncertaintyBox:
    """Interval bounds for the uncertain coefficients.

    ``sigma1_sq_*`` and ``sigma2_sq_*`` bound the two variances (units x^2/t),
    ``b12_*`` bounds the covariance. Construction checks only interval
    ordering and nonnegativity of the variance bounds; positive
    semidefiniteness and diagonal dominance of the corner matrices are
    diagnostics reported by :func:`validate_box`, because callers are allowed
    to build and inspect failing boxes.
    """

    sigma1_sq_lo: float
    sigma1_sq_hi: float
    sigma2_sq_lo: float
    sigma2_sq_hi: float
    b12_lo: float
    b12_hi: float

    def __post_init__(self):
        if not 0.0 <= self.sigma1_sq_lo <= self.sigma1_sq_hi:
            raise ValueError(
                f"need 0 <= sigma1_sq_lo <= sigma1_sq_hi, got "
                f"[{self.sigma1_sq_lo}, {self.sigma1_sq_hi}]"
            )
        if not 0.0 <= self.sigma2_sq_lo <= self.sigma2_sq_hi:
            raise ValueError(
                f"need 0 <= sigma2_sq_lo <= sigma2_sq_hi, got "
                f"[{self.sigma2_sq_lo}, {self.sigma2_sq_hi}]"
            )
        if not self.b12_lo <= self.b12_hi:
            raise ValueError(
                f"need b12_lo <= b12_hi, got [{self.b12_lo}, {self.b12_hi}]"
            )

    @property
    def b12_abs_max(self) -> float:
        return max(abs(self.b12_lo), abs(self.b12_hi))

    def corners(self) -> list[np.ndarray]:
        """The 8 corner covariance matrices [[s1, b], [b, s2]]."""
        out = []
        for s1 in (self.sigma1_sq_lo, self.sigma1_sq_hi):
            for s2 in (self.sigma2_sq_lo, self.sigma2_sq_hi):
                for b in (self.b12_lo, self.b12_hi):
                    out.append(np.array([[s1, b], [b, s2]]))
        return out


@dataclass(frozen=True)
class BoxDiagnostics:
    """Result of :func:`validate_box`."""

    psd_ok: bool
    diag_dom_ok: bool
    corner_list: tuple


def validate_box(box: UncertaintyBox) -> BoxDiagnostics:
    """Check the 8 corner matrices of the box.

    ``psd_ok``: every corner [[s1, b], [b, s2]] is symmetric nonnegative
    definite. ``diag_dom_ok``: every corner is diagonally dominated, i.e.
    both variance lower bounds are >= max(|b12_lo|, |b12_hi|). The interior
    scheme's M-matrix guarantees require ``diag_dom_ok``; callers decide what
    to do with a failing box.
    """
    corners = tuple(box.corners())
    psd_ok = all(
        c[0, 0] >= 0.0 and c[1, 1] >= 0.0 and c[0, 0] * c[1, 1] - c[0, 1] ** 2 >= 0.0
        for c in corners
    )
    bmax = box.b12_abs_max
    diag_dom_ok = box.sigma1_sq_lo >= bmax and box.sigma2_sq_lo >= bmax
    return BoxDiagnostics(psd_ok=psd_ok, diag_dom_ok=diag_dom_ok, corner_list=corners)


@dataclass(frozen=True)
class Grid:
    """Uniform space-time lattice on the square [-L, L]^2 and horizon [0, T].

    Nodes are x_i = -L + i*h, y_j = -L + j*h for i, j = 0..M and time levels
    t^n = n*dt for n = 0..N, with h = 2L/M and dt = T/N. M must be even so the
    origin is a node (expectation queries read values there without
    interpolation).
    """

    half_width: float
    cells_per_axis: int
    horizon: float
    steps: int

    @property
    def h(self) -> float:
        return 2.0 * self.half_width / self.cells_per_axis

    @property
    def dt(self) -> float:
        return self.horizon / self.steps

    def xs(self) -> np.ndarray:
        """Node coordinates along one axis; endpoints are exact."""
        return np.linspace(-self.half_width, self.half_width, self.cells_per_axis + 1)

    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.steps + 1)

    def meshes(self) -> tuple[np.ndarray, np.ndarray]:
        """X and Y coordinate arrays of shape (M+1, M+1), indexed [i, j]."""
        xs = self.xs()
        return np.meshgrid(xs, xs, indexing="ij")

    def index_of(self, x: float, y: float) -> tuple[int, int]:
        """Map a point to its node index; the point must be a node."""
        L, h = self.half_width, self.h
        i = round((x + L) / h)
        j = round((y + L) / h)
        M = self.cells_per_axis
        tol = 1e-12 * max(1.0, L)
        if not (0 <= i <= M and 0 <= j <= M):
            raise ValueError(f"point ({x}, {y}) lies outside the grid")
        xs = self.xs()
        if abs(xs[i] - x) > tol or abs(xs[j] - y) > tol:
            raise ValueError(f"point ({x}, {y}) is not a grid node")
        return i, j


def make_grid(L: float, M: int, T: float, N: int) -> Grid:
    """Build a grid, rejecting shapes the scheme cannot use.

    M must be even and >= 2 (the origin must be a node), N >= 1, L and T
    positive.
    """
    if L <= 0:
        raise ValueError(f"half_width must be positive, got {L}")
    if T <= 0:
        raise ValueError(f"horizon must be positive, got {T}")
    if M < 2 or M % 2 != 0:
        raise ValueError(f"cells_per_axis must be even and >= 2, got {M}")
    if N < 1:
        raise ValueError(f"steps must be >= 1, got {N}")
    return Grid(half_width=float(L), cells_per_axis=int(M), horizon=float(T), steps=int(N))


@dataclass(frozen=True)
class ProblemSpec:
    """Initial datum, boundary datum, optional forcing and the uncertainty box.

    ``initial(x, y)`` and ``boundary(t, x, y)`` must accept numpy arrays for
    x and y (t is a scalar) and return arrays of the same shape. ``forcing``
    has the boundary signature or is None, meaning zero. Compatibility of
    initial and boundary data at t = 0 is not required; use
    :meth:`compatibility_gap` to inspect the mismatch.
    """

    initial: Callable[[np.ndarray, np.ndarray], np.ndarray]
    boundary: Callable[[float, np.ndarray, np.ndarray], np.ndarray]
    box: UncertaintyBox
    forcing: Optional[Callable[[float, np.ndarray, np.ndarray], np.ndarray]] = None

    def compatibility_gap(self, grid: Grid) -> float:
        """max |initial - boundary(0)| over the boundary ring (diagnostic)."""
        X, Y = grid.meshes()
        gap = 0.0
        for sl in _ring_slices(grid.cells_per_axis):
            x, y = X[sl], Y[sl]
            d = np.abs(
                np.asarray(self.initial(x, y), dtype=float)
                - np.asarray(self.boundary(0.0, x, y), dtype=float)
            )
            if d.size:
                gap = max(gap, float(d.max()))
        return gap


def _ring_slices(M: int) -> tuple:
    """Index expressions covering the boundary ring without overlap."""
    return (
        (0, slice(None)),
        (M, slice(None)),
        (slice(1, M), 0),
        (slice(1, M), M),
    )


@dataclass(frozen=True)
class SolverConfig:
    """Tolerances and caps for the inner iteration and linear solves.

    ``tol_picard`` is the absolute infinity-norm increment tolerance of the
    inner iteration. ``tol_lin`` is the linear residual tolerance, relative to
    max(1, ||rhs||_inf). The iteration counts of the benchmark figures are
    only reproducible when the linear solves are much tighter than the outer
    stop, hence the enforced ratio.
    """

    tol_picard: float = 1e-9
    k_max: int = 30
    tol_lin: float = 1e-12
    record_coefficients: bool = False

    def __post_init__(self):
        if self.tol_picard <= 0 or self.tol_lin <= 0:
            raise ValueError("tolerances must be positive")
        if self.k_max < 1:
            raise ValueError(f"k_max must be >= 1, got {self.k_max}")
        # the 1e-9 slack keeps decimally-exact ratios like 1e-7/1e-9 legal
        if self.tol_lin > self.tol_picard / 100.0 * (1.0 + 1e-9):
            raise ValueError(
                f"tol_lin must be <= tol_picard/100 "
                f"({self.tol_lin} > {self.tol_picard / 100.0})"
            )


@dataclass(frozen=True)
class CoefficientStats:
    """Per-step aggregate of the selected coefficients over interior nodes."""

    frac_sigma1_hi: float
    frac_sigma2_hi: float
    frac_b12_hi: float
    mean_sigma1_sq: float
    mean_sigma2_sq: float
    mean_b12: float


@dataclass(frozen=True)
class IterationReport:
    """What one time step's inner iteration did.

    ``iterations`` counts the Picard iterates formed, including the initial
    frozen iterate, so it equals the number of linear solves plus one. A step
    whose first increment is already below tolerance (constant data, say)
    reports 2. ``increments`` holds the infinity-norm differences of
    consecutive iterates over interior nodes, one entry per linear solve; the
    final entry is <= tol_picard whenever the step converged.
    ``min_interior_gain`` is the smallest pointwise difference between
    consecutive solve outputs (iterates k >= 1); nonnegative up to solver
    noise when the iteration is monotone. ``m_matrix_ok`` is False if any
    inner system failed the strict-dominance scan (the solve still ran, via
    the direct fallback). ``iterates`` keeps full level snapshots only when
    requested.
    """

    iterations: int
    increments: tuple[float, ...]
    min_interior_gain: float
    m_matrix_ok: bool
    sweeps: int
    tol_lin: float
    coefficient_stats: Optional[CoefficientStats] = None
    iterates: Optional[tuple[np.ndarray, ...]] = None


@dataclass
class SolutionLattice:
    """Nodal values for all time levels plus per-step reports.

    ``values`` has shape (N+1, M+1, M+1) indexed [n][i][j]. Level 0 equals the
    sampled initial datum; boundary nodes at level n >= 1 carry the boundary
    datum at t^n. ``warnings`` collects non-fatal conditions observed during
    the march (override runs, stability-margin breaches).
    """

    grid: Grid
    values: np.ndarray
    reports: list[IterationReport] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def level(self, n: int) -> np.ndarray:
        return self.values[n]

    @property
    def final(self) -> np.ndarray:
        return self.values[-1]
