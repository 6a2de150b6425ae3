import os
import time
from pathlib import Path

import numpy as np
import pytest

os.environ.setdefault(
    "GHEAT2D_CACHE_DIR", str(Path(__file__).resolve().parent.parent / ".cache")
)

from gheat2d import SolverConfig, make_grid, picard_step, verify_monotone_iteration
from gheat2d.bench import (
    error_norms,
    example1_problem,
    example2_problem,
    lattice_evaluator,
    reference_solution,
)

LEVELS = ((10, 50), (20, 200), (40, 800), (80, 3200))


class LevelRun:
    """One marched level with everything the acceptance criteria inspect."""

    def __init__(self, norms, iterations, monotone_ok, k_max, elapsed):
        self.norms = norms
        self.iterations = iterations
        self.monotone_ok = monotone_ok
        self.k_max = k_max
        self.elapsed = elapsed


def _instrumented_march(problem, grid, cfg, exact, restrict_to=None):
    """march() with per-step iterate snapshots checked and dropped on the fly
    (keeping 3200 levels of snapshots would not fit in memory)."""
    M, N = grid.cells_per_axis, grid.steps
    X, Y = grid.meshes()
    ts = grid.times()
    U = np.ascontiguousarray(problem.initial(X, Y), dtype=np.float64)
    values = np.empty((N + 1, M + 1, M + 1))
    values[0] = U
    iterations = []
    monotone_ok = True
    t0 = time.time()
    for n in range(N):
        U, rep = picard_step(U, ts[n + 1], problem, grid, cfg, keep_iterates=True)
        monotone_ok = monotone_ok and verify_monotone_iteration(rep)
        iterations.append(rep.iterations)
        values[n + 1] = U
    elapsed = time.time() - t0

    from gheat2d.core import SolutionLattice

    lattice = SolutionLattice(grid=grid, values=values, reports=[], warnings=[])
    norms = error_norms(lattice, exact, grid, restrict_to=restrict_to)
    return LevelRun(norms, iterations, monotone_ok, cfg.k_max, elapsed)


@pytest.fixture(scope="session")
def reference():
    return reference_solution()


@pytest.fixture(scope="session")
def example1_runs():
    ex = example1_problem()
    cfg = SolverConfig()
    runs = {}
    for M, N in LEVELS:
        grid = make_grid(1.0, M, 1.0, N)
        runs[(M, N)] = _instrumented_march(ex.problem, grid, cfg, ex.exact)
    return runs


@pytest.fixture(scope="session")
def example2_runs(reference):
    problem = example2_problem()
    exact = lattice_evaluator(reference)
    cfg = SolverConfig()
    runs = {}
    for M, N in LEVELS:
        grid = make_grid(1.0, M, 1.0, N)
        runs[(M, N)] = _instrumented_march(
            problem, grid, cfg, exact, restrict_to=reference.grid
        )
    return runs
