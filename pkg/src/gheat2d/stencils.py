"""Pointwise finite-difference operators and the optimal-coefficient
selection rules.

The scheme freezes, at each interior node, the variance that maximizes the
diffusion term (upper bound where the second difference is nonnegative, lower
bound otherwise) and the covariance/orientation pair that maximizes the cross
term. Two seven-point cross-derivative stencils are available: one aligned
with the main diagonal (``plus``, used with the upper covariance bound) and
one with the antidiagonal (``minus``, used with the lower bound). Both
tie-breaks resolve to the upper bound. Sign tests are exact floating-point
comparisons; no tolerance is applied, which keeps the discrete scheme
deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import UncertaintyBox

__all__ = [
    "CrossChoice",
    "second_diff_x",
    "second_diff_y",
    "cross_diff_plus",
    "cross_diff_minus",
    "select_sigma_sq",
    "select_cross",
]


def _check_interior(U, i: int, j: int) -> None:
    M = U.shape[0] - 1
    if not (0 < i < M and 0 < j < M):
        raise IndexError(f"({i}, {j}) is not interior to a {M+1}x{M+1} level")


def second_diff_x(U, i: int, j: int, h: float) -> float:
    """Central second difference in x at interior node (i, j).

    (U[i+1,j] - 2 U[i,j] + U[i-1,j]) / h^2. Exact for quadratics in x.
    """
    _check_interior(U, i, j)
    return (U[i + 1, j] - 2.0 * U[i, j] + U[i - 1, j]) / (h * h)


def second_diff_y(U, i: int, j: int, h: float) -> float:
    """Central second difference in y at interior node (i, j)."""
    _check_interior(U, i, j)
    return (U[i, j + 1] - 2.0 * U[i, j] + U[i, j - 1]) / (h * h)


def cross_diff_plus(U, i: int, j: int, h: float) -> float:
    """Main-diagonal cross-derivative stencil at interior node (i, j).

    [U[i+1,j+1] + 2 U[i,j] + U[i-1,j-1]
     - (U[i+1,j] + U[i-1,j] + U[i,j+1] + U[i,j-1])] / (2 h^2)

    Exact (value c3) for bilinear data c0 + c1 x + c2 y + c3 x y.
    """
    _check_interior(U, i, j)
    return (
        U[i + 1, j + 1]
        + 2.0 * U[i, j]
        + U[i - 1, j - 1]
        - (U[i + 1, j] + U[i - 1, j] + U[i, j + 1] + U[i, j - 1])
    ) / (2.0 * h * h)


def cross_diff_minus(U, i: int, j: int, h: float) -> float:
    """Antidiagonal cross-derivative stencil at interior node (i, j).

    [U[i+1,j] + U[i-1,j] + U[i,j+1] + U[i,j-1]
     - (U[i+1,j-1] + 2 U[i,j] + U[i-1,j+1])] / (2 h^2)
    """
    _check_interior(U, i, j)
    return (
        U[i + 1, j]
        + U[i - 1, j]
        + U[i, j + 1]
        + U[i, j - 1]
        - (U[i + 1, j - 1] + 2.0 * U[i, j] + U[i - 1, j + 1])
    ) / (2.0 * h * h)


def select_sigma_sq(s: float, lo: float, hi: float) -> float:
    """Variance bound maximizing (sigma^2/2) * s: hi if s >= 0 else lo."""
    return hi if s >= 0.0 else lo


@dataclass(frozen=True)
class CrossChoice:
    """Selected covariance, stencil orientation and the resulting term.

    ``orientation`` is "plus" (main diagonal, paired with b12_hi) or "minus"
    (antidiagonal, paired with b12_lo). ``value`` equals
    max(b12_hi * d_plus, b12_lo * d_minus) for the node it was computed at.
    """

    b12: float
    orientation: str
    value: float


def select_cross(d_plus: float, d_minus: float, box: UncertaintyBox) -> CrossChoice:
    """Covariance/orientation pair maximizing the cross term.

    Compares b12_hi * d_plus against b12_lo * d_minus and returns the winning
    pair; ties select the upper bound. The winning product may be negative
    (both candidates can be), which is what makes the pairing of bound and
    orientation essential rather than a sign convenience.
    """
    a = box.b12_hi * d_plus
    b = box.b12_lo * d_minus
    if a >= b:
        return CrossChoice(b12=box.b12_hi, orientation="plus", value=a)
    return CrossChoice(b12=box.b12_lo, orientation="minus", value=b)
