"""Benchmark problems and measurement harness: the manufactured-solution
example, the zero-forcing example measured against a cached fine-grid
reference, error norms, convergence tables and per-step iteration series.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .core import (
    Grid,
    ProblemSpec,
    SolutionLattice,
    SolverConfig,
    UncertaintyBox,
    _ring_slices,
    make_grid,
)
from .errors import NonNestedGridError
from .stepper import march

__all__ = [
    "EXAMPLE_BOX",
    "Example",
    "ConvergenceRow",
    "ErrorNorms",
    "SeriesPoint",
    "example1_problem",
    "example2_problem",
    "error_norms",
    "lattice_evaluator",
    "reference_solution",
    "convergence_study",
    "iteration_series",
    "write_convergence_csv",
    "write_series_csv",
]

# sigma1 in [0.2, 0.3], sigma2 in [0.25, 0.35] squared to variances,
# covariance spanning zero
EXAMPLE_BOX = UncertaintyBox(
    sigma1_sq_lo=0.04,
    sigma1_sq_hi=0.09,
    sigma2_sq_lo=0.0625,
    sigma2_sq_hi=0.1225,
    b12_lo=-0.04,
    b12_hi=0.03,
)

# sup over the box of (s1/2)uxx + (s2/2)uyy + b*uxy for u = sin(5(x+y+t))
# collapses to one of two corner sums because every second derivative is
# -25 sin(w): the lo corner when sin(w) >= 0, the hi corner otherwise
_C_LO = EXAMPLE_BOX.sigma1_sq_lo / 2 + EXAMPLE_BOX.sigma2_sq_lo / 2 + EXAMPLE_BOX.b12_lo
_C_HI = EXAMPLE_BOX.sigma1_sq_hi / 2 + EXAMPLE_BOX.sigma2_sq_hi / 2 + EXAMPLE_BOX.b12_hi

_SCHEME_TAG = "implicit-picard-v1"


@dataclass(frozen=True)
class Example:
    """A benchmark problem together with its exact solution when one exists."""

    problem: ProblemSpec
    exact: Optional[Callable[[float, np.ndarray, np.ndarray], np.ndarray]]


def _exact1(t, x, y):
    return np.sin(5.0 * (x + y + t))


def _forcing1(t, x, y):
    w = 5.0 * (x + y + t)
    s = np.sin(w)
    c = np.where(s >= 0.0, _C_LO, _C_HI)
    return 5.0 * np.cos(w) + 25.0 * c * s


def example1_problem() -> Example:
    """Manufactured problem with exact solution sin(5(x+y+t)) on (-1,1)^2.

    The forcing is the closed-form nonlinear residual of the exact solution:
    f = 5 cos(w) + 25 c(w) sin(w), w = 5(x+y+t), with c(w) = 0.01125 where
    sin(w) >= 0 and 0.13625 otherwise.
    """
    problem = ProblemSpec(
        initial=lambda x, y: _exact1(0.0, x, y),
        boundary=lambda t, x, y: _exact1(t, x, y),
        box=EXAMPLE_BOX,
        forcing=_forcing1,
    )
    return Example(problem=problem, exact=_exact1)


def example2_problem() -> ProblemSpec:
    """Same data and box as the manufactured problem but zero forcing;
    measured against a fine-grid reference instead of a closed form."""
    return ProblemSpec(
        initial=lambda x, y: _exact1(0.0, x, y),
        boundary=lambda t, x, y: _exact1(t, x, y),
        box=EXAMPLE_BOX,
        forcing=None,
    )


@dataclass(frozen=True)
class ErrorNorms:
    linf: float
    l2: float


def error_norms(
    numeric: SolutionLattice,
    exact: Callable[[float, np.ndarray, np.ndarray], np.ndarray],
    grid: Grid,
    *,
    restrict_to: Optional[Grid] = None,
) -> ErrorNorms:
    """Space-time error norms over levels n = 1..N.

    linf is the max over those levels and all nodes of |exact - numeric|.
    l2 is the root mean square of the error over interior nodes,
    sqrt(sum_n sum_interior e^2 / (N (M-1)^2)); boundary nodes are excluded
    there because the scheme imposes the datum exactly and zero entries would
    only dilute the mean. Level 0 matches the initial datum by construction
    and is skipped. A constant error field c yields (c, c).

    With ``restrict_to`` (the grid of a reference lattice) the scan covers
    only the nodes and time levels the two grids share, so ``exact`` is never
    asked for a point it cannot produce by exact index mapping. Both norms
    are then taken over that common sublattice: M and N above become
    gcd(M, M_ref) and gcd(N, N_ref).
    """
    X, Y = grid.meshes()
    N = grid.steps
    M = grid.cells_per_axis
    si = sn = 1
    if restrict_to is not None:
        if (
            restrict_to.half_width != grid.half_width
            or restrict_to.horizon != grid.horizon
        ):
            raise NonNestedGridError(
                "restriction grid covers a different domain or horizon"
            )
        si = M // math.gcd(M, restrict_to.cells_per_axis)
        sn = N // math.gcd(N, restrict_to.steps)
    linf = 0.0
    sq_sum = 0.0
    Xs, Ys = X[::si, ::si], Y[::si, ::si]
    for n in range(sn, N + 1, sn):
        e = (
            np.asarray(exact(grid.times()[n], Xs, Ys), dtype=float)
            - numeric.values[n][::si, ::si]
        )
        linf = max(linf, float(np.abs(e).max()))
        ei = e[1:-1, 1:-1]
        sq_sum += float(np.dot(ei.ravel(), ei.ravel()))
    l2 = math.sqrt(sq_sum / ((N // sn) * (M // si - 1) ** 2))
    return ErrorNorms(linf=linf, l2=l2)


def lattice_evaluator(ref: SolutionLattice) -> Callable:
    """Wrap a lattice as a nodal evaluator exact(t, x, y).

    Every requested time and coordinate must land on a node of the wrapped
    lattice (NonNestedGridError otherwise); values are read by exact index
    mapping, never interpolated.
    """
    g = ref.grid
    L, h, dt = g.half_width, g.h, g.dt
    M, N = g.cells_per_axis, g.steps

    def exact(t, x, y):
        fn = t / dt
        n = int(round(fn))
        if not (0 <= n <= N) or abs(fn - n) > 1e-8 * max(1.0, N):
            raise NonNestedGridError(
                f"time {t} is not a level of the reference lattice (dt={dt})"
            )
        xi = (np.asarray(x, dtype=float) + L) / h
        yj = (np.asarray(y, dtype=float) + L) / h
        I = np.rint(xi).astype(np.intp)
        J = np.rint(yj).astype(np.intp)
        if (
            np.abs(xi - I).max() > 1e-9 * max(1.0, M)
            or np.abs(yj - J).max() > 1e-9 * max(1.0, M)
            or I.min() < 0 or I.max() > M or J.min() < 0 or J.max() > M
        ):
            raise NonNestedGridError(
                f"coordinates are not nodes of the reference lattice (h={h})"
            )
        return ref.values[n][I, J]

    return exact


def _cache_dir() -> Path:
    env = os.environ.get("GHEAT2D_CACHE_DIR")
    if env:
        return Path(env)
    return Path.home() / ".cache" / "gheat2d"


def _reference_key(tag, box, fine, coarse, half_width, horizon, cfg) -> str:
    payload = json.dumps(
        {
            "scheme": _SCHEME_TAG,
            "layout": "common-sublattice",
            "tag": tag,
            "box": [
                box.sigma1_sq_lo, box.sigma1_sq_hi,
                box.sigma2_sq_lo, box.sigma2_sq_hi,
                box.b12_lo, box.b12_hi,
            ],
            "fine": list(fine),
            "coarse": list(coarse),
            "half_width": half_width,
            "horizon": horizon,
            "tol_picard": cfg.tol_picard,
            "tol_lin": cfg.tol_lin,
            "k_max": cfg.k_max,
        },
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode()).hexdigest()


def reference_solution(
    problem: Optional[ProblemSpec] = None,
    cfg: SolverConfig = SolverConfig(),
    *,
    fine: tuple[int, int] = (360, 5000),
    coarse: tuple[int, int] = (80, 3200),
    half_width: float = 1.0,
    horizon: float = 1.0,
    tag: str = "example2",
    cache_dir: Optional[Path] = None,
    progress: Optional[Callable[[int, int], None]] = None,
) -> SolutionLattice:
    """The fine-grid reference, marched once and cached.

    The reference is computed on the ``fine`` grid and stored on the lattice
    the ``fine`` and ``coarse`` grids share: gcd(M_fine, M_coarse) cells per
    axis, gcd(N_fine, N_coarse) time steps. Every stored value is an exact
    copy of a fine-grid value; nothing is ever interpolated. Grids that do
    not nest in the stored lattice must restrict their comparison to the
    shared nodes, which ``error_norms(..., restrict_to=ref.grid)`` does.
    Level 0 and the boundary rings are overwritten with exactly evaluated
    data so they match a direct evaluation of the problem's data on the
    stored meshes bit for bit. The cache key hashes every quantity the
    values depend on; ``tag`` must name the problem family, and callers
    passing a custom problem must pass their own tag.
    """
    if problem is None:
        problem = example2_problem()
    key = _reference_key(tag, problem.box, fine, coarse, half_width, horizon, cfg)
    cdir = Path(cache_dir) if cache_dir is not None else _cache_dir()
    path = cdir / f"reference_{key[:16]}.npz"
    Mr = math.gcd(fine[0], coarse[0])
    Nr = math.gcd(fine[1], coarse[1])
    ref_grid = make_grid(half_width, Mr, horizon, Nr)

    if path.exists():
        try:
            with np.load(path, allow_pickle=False) as blob:
                stored_key = blob["key"].item()
                values = blob["values"]
            if stored_key == key and values.shape == (Nr + 1, Mr + 1, Mr + 1):
                return SolutionLattice(grid=ref_grid, values=values, reports=[], warnings=[])
        except Exception:
            pass  # unreadable or stale: fall through and recompute

    fine_grid = make_grid(half_width, fine[0], horizon, fine[1])
    stride_s = fine[0] // Mr
    stride_t = fine[1] // Nr
    Nf = fine[1]
    out = np.empty((Nr + 1, Mr + 1, Mr + 1))

    def on_level(q, t, U):
        if q % stride_t == 0:
            out[q // stride_t] = U[::stride_s, ::stride_s]
        if progress is not None:
            progress(q, Nf)

    lattice = march(problem, fine_grid, cfg, on_level=on_level, keep_levels=False)

    X, Y = ref_grid.meshes()
    out[0] = problem.initial(X, Y)
    ts = ref_grid.times()
    for m in range(1, Nr + 1):
        for sl in _ring_slices(Mr):
            out[m][sl] = problem.boundary(ts[m], X[sl], Y[sl])

    cdir.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp.npz")
    np.savez_compressed(tmp, key=np.array(key), values=out)
    os.replace(tmp, path)
    return SolutionLattice(
        grid=ref_grid, values=out, reports=[], warnings=list(lattice.warnings)
    )


@dataclass(frozen=True)
class ConvergenceRow:
    """One table row; orders compare against the previous (coarser) row under
    the paired refinement h -> h/2, dt -> dt/4 and are None on the first row
    or when an error vanished."""

    timesteps: int
    nodes: int
    linf_error: float
    linf_order: Optional[float]
    l2_error: float
    l2_order: Optional[float]


def convergence_study(
    problem: ProblemSpec,
    exact: Callable[[float, np.ndarray, np.ndarray], np.ndarray],
    levels: Sequence[tuple[int, int]],
    cfg: SolverConfig = SolverConfig(),
    *,
    half_width: float = 1.0,
    horizon: float = 1.0,
    jobs: int = 1,
    restrict_to: Optional[Grid] = None,
) -> list[ConvergenceRow]:
    """March every (M, N) level and tabulate errors against ``exact``.

    Levels may run concurrently (``jobs``); rows keep the given order.
    ``restrict_to`` is forwarded to error_norms for comparisons against a
    reference lattice that not every level nests into.
    """

    def run(level):
        M, N = level
        grid = make_grid(half_width, M, horizon, N)
        try:
            lat = march(problem, grid, cfg)
        except Exception as err:
            raise RuntimeError(f"march failed at level (M={M}, N={N})") from err
        return error_norms(lat, exact, grid, restrict_to=restrict_to)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            norms = list(pool.map(run, levels))
    else:
        norms = [run(level) for level in levels]

    rows: list[ConvergenceRow] = []
    for idx, ((M, N), nm) in enumerate(zip(levels, norms)):
        if idx == 0:
            o_inf = o_l2 = None
        else:
            prev = norms[idx - 1]
            o_inf = _order(prev.linf, nm.linf)
            o_l2 = _order(prev.l2, nm.l2)
        rows.append(
            ConvergenceRow(
                timesteps=N,
                nodes=(M + 1) ** 2,
                linf_error=nm.linf,
                linf_order=o_inf,
                l2_error=nm.l2,
                l2_order=o_l2,
            )
        )
    return rows


def _order(prev: float, curr: float) -> Optional[float]:
    if prev <= 0.0 or curr <= 0.0:
        return None
    return math.log2(prev / curr)


@dataclass(frozen=True)
class SeriesPoint:
    """Per-step iteration count and coefficient statistics."""

    step: int
    time: float
    iterations: int
    frac_sigma1_hi: float
    frac_sigma2_hi: float
    frac_b12_hi: float
    mean_sigma1_sq: float
    mean_sigma2_sq: float
    mean_b12: float


def iteration_series(solution: SolutionLattice) -> list[SeriesPoint]:
    """Flatten a marched lattice's reports into plottable per-step rows.

    Requires a march with record_coefficients=True.
    """
    ts = solution.grid.times()
    points = []
    for n, rep in enumerate(solution.reports, start=1):
        st = rep.coefficient_stats
        if st is None:
            raise ValueError(
                "reports carry no coefficient statistics; march with "
                "record_coefficients=True"
            )
        points.append(
            SeriesPoint(
                step=n,
                time=float(ts[n]),
                iterations=rep.iterations,
                frac_sigma1_hi=st.frac_sigma1_hi,
                frac_sigma2_hi=st.frac_sigma2_hi,
                frac_b12_hi=st.frac_b12_hi,
                mean_sigma1_sq=st.mean_sigma1_sq,
                mean_sigma2_sq=st.mean_sigma2_sq,
                mean_b12=st.mean_b12,
            )
        )
    return points


def _fmt(v) -> str:
    if v is None:
        return ""
    return f"{v:.6e}"


def write_convergence_csv(path, rows: Sequence[ConvergenceRow]) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["timesteps", "nodes", "linf_error", "linf_order", "l2_error", "l2_order"])
        for r in rows:
            w.writerow(
                [
                    r.timesteps,
                    r.nodes,
                    _fmt(r.linf_error),
                    _fmt(r.linf_order),
                    _fmt(r.l2_error),
                    _fmt(r.l2_order),
                ]
            )


def write_series_csv(path, points: Sequence[SeriesPoint]) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(
            [
                "step", "time", "iterations",
                "frac_sigma1_hi", "frac_sigma2_hi", "frac_b12_hi",
                "mean_sigma1_sq", "mean_sigma2_sq", "mean_b12",
            ]
        )
        for p in points:
            w.writerow(
                [
                    p.step,
                    _fmt(p.time),
                    p.iterations,
                    _fmt(p.frac_sigma1_hi),
                    _fmt(p.frac_sigma2_hi),
                    _fmt(p.frac_b12_hi),
                    _fmt(p.mean_sigma1_sq),
                    _fmt(p.mean_sigma2_sq),
                    _fmt(p.mean_b12),
                ]
            )
