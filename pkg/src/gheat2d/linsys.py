"""Per-iteration linear algebra: coefficient fields, the nine-point operator
A = I/dt - (sigma1^2/2) d_xx - (sigma2^2/2) d_yy - b12 d_xy^alpha over interior
nodes, M-matrix validation and the solve.

Boundary contributions are eliminated into the right-hand side, which keeps
the interior matrix strictly diagonally dominant whenever the box is
diagonally dominated and the covariance interval spans zero. The eliminated
weights are retained per row so the full nine-weight row sum (which equals
1/dt identically) stays reconstructable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ._backend import kernels
from .core import Grid, UncertaintyBox, CoefficientStats, _ring_slices
from .errors import LinearSolveError

__all__ = [
    "CoefficientField",
    "SparseOperator",
    "MMatrixDiagnostics",
    "SolveResult",
    "build_coefficients",
    "assemble",
    "validate_m_matrix",
    "solve",
    "write_matrix_market",
]

# weight-slot offsets (di, dj): center, W, E, S, N, SW, NE, NW, SE
OFFSETS = ((0, 0), (-1, 0), (1, 0), (0, -1), (0, 1), (-1, -1), (1, 1), (-1, 1), (1, -1))

_edge_mask_cache: dict = {}


def _edge_mask(m: int, c: int) -> np.ndarray:
    """Interior positions whose slot-c neighbor falls on the boundary ring."""
    got = _edge_mask_cache.get((m, c))
    if got is None:
        di, dj = OFFSETS[c]
        mask = np.zeros((m, m), dtype=bool)
        if di == -1:
            mask[0, :] = True
        elif di == 1:
            mask[m - 1, :] = True
        if dj == -1:
            mask[:, 0] = True
        elif dj == 1:
            mask[:, m - 1] = True
        _edge_mask_cache[(m, c)] = mask
        got = mask
    return got


@dataclass(frozen=True)
class CoefficientField:
    """Selected coefficients per interior node, as (m, m) arrays.

    ``alpha`` holds +1 for the main-diagonal cross stencil (paired with
    b12_hi) and -1 for the antidiagonal one (paired with b12_lo).
    """

    sigma1_sq: np.ndarray
    sigma2_sq: np.ndarray
    b12: np.ndarray
    alpha: np.ndarray
    box: UncertaintyBox

    @property
    def m(self) -> int:
        return self.sigma1_sq.shape[0]

    def stats(self) -> CoefficientStats:
        return CoefficientStats(
            frac_sigma1_hi=float(np.mean(self.sigma1_sq == self.box.sigma1_sq_hi)),
            frac_sigma2_hi=float(np.mean(self.sigma2_sq == self.box.sigma2_sq_hi)),
            frac_b12_hi=float(np.mean(self.alpha > 0)),
            mean_sigma1_sq=float(np.mean(self.sigma1_sq)),
            mean_sigma2_sq=float(np.mean(self.sigma2_sq)),
            mean_b12=float(np.mean(self.b12)),
        )


def build_coefficients(U_iterate: np.ndarray, grid: Grid, box: UncertaintyBox) -> CoefficientField:
    """Apply the selection rules at every interior node of one level.

    Equivalent to calling select_sigma_sq on the two second differences and
    select_cross on the two cross stencils node by node; this is the array
    form the assembly consumes.
    """
    M = grid.cells_per_axis
    u = np.ascontiguousarray(U_iterate, dtype=np.float64)
    if u.shape != (M + 1, M + 1):
        raise ValueError(f"level shape {u.shape} does not match grid ({M+1}x{M+1})")
    m = M - 1
    sig1 = np.empty((m, m))
    sig2 = np.empty((m, m))
    b12 = np.empty((m, m))
    alpha = np.empty((m, m), dtype=np.int8)
    kernels.select_coefficients(
        u, grid.h,
        box.sigma1_sq_lo, box.sigma1_sq_hi,
        box.sigma2_sq_lo, box.sigma2_sq_hi,
        box.b12_lo, box.b12_hi,
        sig1, sig2, b12, alpha,
    )
    return CoefficientField(sigma1_sq=sig1, sigma2_sq=sig2, b12=b12, alpha=alpha, box=box)


@dataclass(frozen=True)
class SparseOperator:
    """The interior system in stencil form.

    ``weights[p, q, c]`` is the matrix entry coupling unknown (p, q) to its
    slot-c neighbor; slots whose neighbor is a boundary node were zeroed
    during elimination (their contribution moved into ``rhs``, their original
    values summed into ``eliminated_sum``). Unknowns are ordered row-major:
    (p, q) -> p*m + q.
    """

    weights: np.ndarray
    rhs: np.ndarray
    eliminated_sum: np.ndarray
    dt: float
    h: float

    @property
    def m(self) -> int:
        return self.rhs.shape[0]

    def row_sums_full(self) -> np.ndarray:
        """Per-row sum over all nine stencil weights, eliminated ones included."""
        return self.weights.sum(axis=2) + self.eliminated_sum

    def to_csr(self):
        from scipy.sparse import coo_matrix

        m = self.m
        P, Q = np.meshgrid(np.arange(m), np.arange(m), indexing="ij")
        rows, cols, vals = [], [], []
        for c, (di, dj) in enumerate(OFFSETS):
            w = self.weights[:, :, c]
            nz = w != 0.0
            if not nz.any():
                continue
            rows.append((P * m + Q)[nz])
            cols.append(((P + di) * m + (Q + dj))[nz])
            vals.append(w[nz])
        n = m * m
        return coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n, n),
        ).tocsr()


def assemble(
    U_prev_time: np.ndarray,
    coeffs: CoefficientField,
    grid: Grid,
    boundary_at_next: Callable[[np.ndarray, np.ndarray], np.ndarray],
    forcing_at_next: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None,
) -> SparseOperator:
    """Build the interior system for one inner iteration.

    Row (i, j) encodes U/dt - (s1/2) d_xx U - (s2/2) d_yy U - b12 d_xy^a U =
    U_prev/dt + f, with known boundary values of the new level moved to the
    right-hand side. ``boundary_at_next`` and ``forcing_at_next`` are
    functions of node coordinate arrays at the target time.
    """
    M = grid.cells_per_axis
    m = M - 1
    _reject_corrupt(coeffs)
    weights = np.empty((m, m, 9))
    kernels.assemble_stencil(
        coeffs.sigma1_sq, coeffs.sigma2_sq, coeffs.b12, coeffs.alpha,
        grid.dt, grid.h, weights,
    )

    X, Y = grid.meshes()
    rhs = np.asarray(U_prev_time, dtype=float)[1:-1, 1:-1] / grid.dt
    if forcing_at_next is not None:
        rhs = rhs + np.asarray(forcing_at_next(X[1:-1, 1:-1], Y[1:-1, 1:-1]), dtype=float)
    else:
        rhs = rhs.copy()

    B = np.zeros((M + 1, M + 1))
    for sl in _ring_slices(M):
        B[sl] = boundary_at_next(X[sl], Y[sl])

    eliminated = np.zeros((m, m))
    for c, (di, dj) in enumerate(OFFSETS[1:], start=1):
        mask = _edge_mask(m, c)
        nb = B[1 + di : M + di, 1 + dj : M + dj]
        w = weights[:, :, c]
        rhs[mask] -= w[mask] * nb[mask]
        eliminated[mask] += w[mask]
        w[mask] = 0.0

    return SparseOperator(weights=weights, rhs=rhs, eliminated_sum=eliminated,
                          dt=grid.dt, h=grid.h)


def _reject_corrupt(coeffs: CoefficientField) -> None:
    box = coeffs.box
    ok = (
        np.all((coeffs.sigma1_sq == box.sigma1_sq_lo) | (coeffs.sigma1_sq == box.sigma1_sq_hi))
        and np.all((coeffs.sigma2_sq == box.sigma2_sq_lo) | (coeffs.sigma2_sq == box.sigma2_sq_hi))
        and np.all((coeffs.b12 == box.b12_lo) | (coeffs.b12 == box.b12_hi))
        and np.all((coeffs.alpha == 1) | (coeffs.alpha == -1))
    )
    if not ok:
        raise ValueError("coefficient field holds values outside the box corners")
    if box.b12_lo != box.b12_hi:
        paired = np.all((coeffs.alpha > 0) == (coeffs.b12 == box.b12_hi))
        if not paired:
            raise ValueError("cross orientation and covariance bound are mispaired")


@dataclass(frozen=True)
class MMatrixDiagnostics:
    """Sign/dominance scan result. ``worst_row`` is the interior node (i, j)
    with the smallest dominance margin diag - sum|offdiag|."""

    is_m_matrix: bool
    worst_row: tuple[int, int]
    min_diag: float
    max_offdiag: float


def validate_m_matrix(op: SparseOperator) -> MMatrixDiagnostics:
    diag = op.weights[:, :, 0]
    off = op.weights[:, :, 1:]
    margin = diag - np.abs(off).sum(axis=2)
    p, q = np.unravel_index(int(np.argmin(margin)), margin.shape)
    ok = bool((diag > 0).all() and (off <= 0).all() and (margin > 0).all())
    return MMatrixDiagnostics(
        is_m_matrix=ok,
        worst_row=(int(p) + 1, int(q) + 1),
        min_diag=float(diag.min()),
        max_offdiag=float(off.max()),
    )


@dataclass(frozen=True)
class SolveResult:
    x: np.ndarray
    residual: float
    sweeps: int
    used_direct: bool
    diag_dominant: bool


_SWEEP_CAP = 20000


def solve(
    op: SparseOperator,
    tol_lin: float,
    x0: Optional[np.ndarray] = None,
    max_sweeps: int = _SWEEP_CAP,
) -> SolveResult:
    """Solve A x = rhs to ||A x - rhs||_inf <= tol_lin * max(1, ||rhs||_inf).

    Gauss-Seidel sweeps with an explicit residual certificate; rows failing
    strict diagonal dominance route the system to a sparse direct factorization
    instead (the sweep has no convergence guarantee there).
    """
    m = op.m
    rhs = op.rhs
    target = tol_lin * max(1.0, float(np.abs(rhs).max(initial=0.0)))
    diag = op.weights[:, :, 0]
    margin = diag - np.abs(op.weights[:, :, 1:]).sum(axis=2)
    dominant = bool((diag > 0).all() and (margin > 0).all())

    level = np.zeros((m + 2, m + 2))
    if x0 is not None:
        level[1:-1, 1:-1] = x0
    work = np.empty((m, m))

    def residual() -> float:
        kernels.apply_stencil(op.weights, level, work)
        return float(np.abs(rhs - work).max(initial=0.0))

    if not dominant:
        from scipy.sparse.linalg import splu

        lu = splu(op.to_csr().tocsc())
        x = lu.solve(rhs.ravel()).reshape(m, m)
        level[1:-1, 1:-1] = x
        res = residual()
        if res > target:
            raise LinearSolveError(res, target, sweeps=0)
        return SolveResult(x=x, residual=res, sweeps=0, used_direct=True,
                           diag_dominant=False)

    res = residual()
    sweeps = 0
    while res > target:
        if sweeps >= max_sweeps:
            raise LinearSolveError(res, target, sweeps)
        dyn = kernels.gs_sweep(op.weights, rhs, level)
        sweeps += 1
        # certify only when the sweep's own residual estimate looks done,
        # with a periodic forced check as a safety net
        if dyn <= 0.5 * target or sweeps % 64 == 0:
            res = residual()
    return SolveResult(x=level[1:-1, 1:-1].copy(), residual=res, sweeps=sweeps,
                       used_direct=False, diag_dominant=True)


def write_matrix_market(op: SparseOperator, path) -> None:
    """Dump the interior matrix in Matrix Market coordinate format (1-based)."""
    A = op.to_csr().tocoo()
    order = np.lexsort((A.col, A.row))
    with open(path, "w", encoding="ascii", newline="\n") as f:
        f.write("%%MatrixMarket matrix coordinate real general\n")
        f.write(f"{A.shape[0]} {A.shape[1]} {A.nnz}\n")
        for r, c, v in zip(A.row[order], A.col[order], A.data[order]):
            f.write(f"{r + 1} {c + 1} {v:.17g}\n")
