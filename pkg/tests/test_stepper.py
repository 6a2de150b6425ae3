import numpy as np
import pytest

from gheat2d import (
    IterationCapError,
    ProblemSpec,
    SolverConfig,
    UncertaintyBox,
    make_grid,
    march,
    picard_step,
    scheme_residual,
    verify_comparison,
    verify_monotone_iteration,
)
from gheat2d.core import SolutionLattice

EX_BOX = UncertaintyBox(0.04, 0.09, 0.0625, 0.1225, -0.04, 0.03)


def dense_picard_oracle(U_n, t_next, problem, grid, cfg):
    """Straight-line reimplementation of one inner iteration: pointwise
    selections, dense row assembly by accumulating the three stencils, exact
    dense solves. Shares no code with the solver."""
    M, h, dt = grid.cells_per_axis, grid.h, grid.dt
    m = M - 1
    box = problem.box
    xs = grid.xs()
    ring = np.zeros((M + 1, M + 1))
    for i in range(M + 1):
        for j in range(M + 1):
            if i in (0, M) or j in (0, M):
                ring[i, j] = problem.boundary(t_next, xs[i], xs[j])

    iterate = np.array(U_n, dtype=float)
    for _ in range(cfg.k_max):
        A = np.zeros((m * m, m * m))
        rhs = np.zeros(m * m)
        for i in range(1, M):
            for j in range(1, M):
                c = iterate[i, j]
                dxx = (iterate[i + 1, j] - 2 * c + iterate[i - 1, j]) / h**2
                dyy = (iterate[i, j + 1] - 2 * c + iterate[i, j - 1]) / h**2
                edge = iterate[i + 1, j] + iterate[i - 1, j] + iterate[i, j + 1] + iterate[i, j - 1]
                dp = (iterate[i + 1, j + 1] + 2 * c + iterate[i - 1, j - 1] - edge) / (2 * h**2)
                dm = (edge - (iterate[i + 1, j - 1] + 2 * c + iterate[i - 1, j + 1])) / (2 * h**2)
                s1 = box.sigma1_sq_hi if dxx >= 0 else box.sigma1_sq_lo
                s2 = box.sigma2_sq_hi if dyy >= 0 else box.sigma2_sq_lo
                plus = box.b12_hi * dp >= box.b12_lo * dm
                b = box.b12_hi if plus else box.b12_lo

                row = {(0, 0): 1.0 / dt}
                for d, sgn in (((1, 0), s1), ((0, 1), s2)):
                    di, dj = d
                    row[(di, dj)] = row.get((di, dj), 0.0) - sgn / 2 * (1 / h**2)
                    row[(-di, -dj)] = row.get((-di, -dj), 0.0) - sgn / 2 * (1 / h**2)
                    row[(0, 0)] += sgn / 2 * (2 / h**2)
                if plus:
                    for d, sgn in (((1, 1), 1), ((-1, -1), 1), ((0, 0), 2),
                                   ((1, 0), -1), ((-1, 0), -1), ((0, 1), -1), ((0, -1), -1)):
                        row[d] = row.get(d, 0.0) - b * sgn / (2 * h**2)
                else:
                    for d, sgn in (((1, 0), 1), ((-1, 0), 1), ((0, 1), 1), ((0, -1), 1),
                                   ((1, -1), -1), ((0, 0), -2), ((-1, 1), -1)):
                        row[d] = row.get(d, 0.0) - b * sgn / (2 * h**2)

                r = (i - 1) * m + (j - 1)
                rhs[r] = U_n[i, j] / dt
                if problem.forcing is not None:
                    rhs[r] += problem.forcing(t_next, xs[i], xs[j])
                for (di, dj), w in row.items():
                    ii, jj = i + di, j + dj
                    if 1 <= ii <= M - 1 and 1 <= jj <= M - 1:
                        A[r, (ii - 1) * m + (jj - 1)] += w
                    else:
                        rhs[r] -= w * ring[ii, jj]

        x = np.linalg.solve(A, rhs).reshape(m, m)
        new = ring.copy()
        new[1:-1, 1:-1] = x
        inc = np.abs(new[1:-1, 1:-1] - iterate[1:-1, 1:-1]).max()
        iterate = new
        if inc <= cfg.tol_picard:
            return iterate
    raise AssertionError("oracle did not converge")


class TestPicardStep:
    def test_matches_dense_oracle(self):
        rng = np.random.default_rng(0)
        grid = make_grid(1.0, 10, 1.0, 40)
        problem = ProblemSpec(
            initial=lambda x, y: np.sin(5 * (x + y)),
            boundary=lambda t, x, y: np.sin(5 * (x + y + t)) * np.ones_like(x),
            box=EX_BOX,
            forcing=lambda t, x, y: np.cos(3 * x) * np.sin(2 * y) + 0 * x,
        )
        X, Y = grid.meshes()
        U0 = problem.initial(X, Y) + 0.1 * rng.normal(size=X.shape)
        cfg = SolverConfig()
        got, report = picard_step(U0, grid.dt, problem, grid, cfg)
        want = dense_picard_oracle(U0, grid.dt, problem, grid, cfg)
        assert np.abs(got - want).max() <= 1e-10
        assert report.iterations >= 2

    def test_constant_data_stops_after_one_solve(self):
        grid = make_grid(1.0, 8, 1.0, 10)
        problem = ProblemSpec(
            initial=lambda x, y: np.full_like(x, 3.25),
            boundary=lambda t, x, y: np.full_like(x, 3.25),
            box=EX_BOX,
        )
        U0 = np.full((9, 9), 3.25)
        got, report = picard_step(U0, grid.dt, problem, grid, SolverConfig())
        # one solve confirms the fixed point, so two iterates were formed
        assert report.iterations == 2
        assert report.increments == (0.0,)
        assert report.sweeps == 0
        np.testing.assert_array_equal(got, U0)

    def test_bilinear_plus_linear_time_is_nodally_exact(self):
        # u = xy + b12_hi * t solves the scheme exactly: cross stencils are
        # exact on bilinears and the time term is linear
        grid = make_grid(1.0, 8, 0.5, 7)
        problem = ProblemSpec(
            initial=lambda x, y: x * y,
            boundary=lambda t, x, y: x * y + EX_BOX.b12_hi * t,
            box=EX_BOX,
        )
        X, Y = grid.meshes()
        U, _ = picard_step(X * Y, grid.dt, problem, grid, SolverConfig())
        np.testing.assert_allclose(U, X * Y + EX_BOX.b12_hi * grid.dt, atol=1e-11)

    def test_boundary_ring_carries_datum_at_target_time(self):
        grid = make_grid(1.0, 6, 1.0, 4)
        problem = ProblemSpec(
            initial=lambda x, y: np.zeros_like(x),
            boundary=lambda t, x, y: t + x - y,
            box=EX_BOX,
        )
        X, Y = grid.meshes()
        U, _ = picard_step(np.zeros((7, 7)), 0.25, problem, grid, SolverConfig())
        np.testing.assert_allclose(U[0, :], 0.25 + X[0, :] - Y[0, :], atol=1e-14)
        np.testing.assert_allclose(U[:, 6], 0.25 + X[:, 6] - Y[:, 6], atol=1e-14)

    def test_iteration_cap_raises_with_report(self):
        grid = make_grid(1.0, 10, 1.0, 50)
        problem = ProblemSpec(
            initial=lambda x, y: np.sin(5 * (x + y)),
            boundary=lambda t, x, y: np.sin(5 * (x + y + t)) * np.ones_like(x),
            box=EX_BOX,
        )
        X, Y = grid.meshes()
        cfg = SolverConfig(k_max=1)
        with pytest.raises(IterationCapError) as exc:
            picard_step(problem.initial(X, Y), grid.dt, problem, grid, cfg)
        assert exc.value.report.iterations == 2
        assert exc.value.partial.shape == (11, 11)

    def test_snapshots_only_on_request(self):
        grid = make_grid(1.0, 6, 1.0, 10)
        problem = ProblemSpec(
            initial=lambda x, y: x**2 + y,
            boundary=lambda t, x, y: x**2 + y + 0 * t,
            box=EX_BOX,
        )
        X, Y = grid.meshes()
        _, r0 = picard_step(problem.initial(X, Y), grid.dt, problem, grid, SolverConfig())
        assert r0.iterates is None
        _, r1 = picard_step(
            problem.initial(X, Y), grid.dt, problem, grid, SolverConfig(), keep_iterates=True
        )
        assert r1.iterates is not None
        assert len(r1.iterates) == r1.iterations

    def test_coefficient_stats_recorded_when_asked(self):
        grid = make_grid(1.0, 6, 1.0, 10)
        problem = ProblemSpec(
            initial=lambda x, y: x**2 - y**2,
            boundary=lambda t, x, y: x**2 - y**2 + 0 * t,
            box=EX_BOX,
        )
        X, Y = grid.meshes()
        _, rep = picard_step(
            problem.initial(X, Y), grid.dt, problem, grid,
            SolverConfig(record_coefficients=True),
        )
        assert rep.coefficient_stats is not None
        assert rep.coefficient_stats.frac_sigma1_hi == 1.0
        assert rep.coefficient_stats.frac_sigma2_hi == 0.0


class TestMarch:
    def test_shapes_and_levels(self):
        grid = make_grid(1.0, 8, 1.0, 5)
        problem = ProblemSpec(
            initial=lambda x, y: np.cos(x) * np.cos(y),
            boundary=lambda t, x, y: np.cos(x) * np.cos(y) * np.exp(-t),
            box=EX_BOX,
        )
        lat = march(problem, grid, SolverConfig())
        assert lat.values.shape == (6, 9, 9)
        assert len(lat.reports) == 5
        X, Y = grid.meshes()
        np.testing.assert_array_equal(lat.values[0], problem.initial(X, Y))
        np.testing.assert_allclose(
            lat.values[3][0, :], np.cos(X[0, :]) * np.cos(Y[0, :]) * np.exp(-0.6), atol=1e-14
        )

    def test_non_dominated_box_refused_without_override(self):
        box = UncertaintyBox(0.01, 0.09, 0.0625, 0.1225, -0.04, 0.03)
        problem = ProblemSpec(
            initial=lambda x, y: np.zeros_like(x),
            boundary=lambda t, x, y: np.zeros_like(x),
            box=box,
        )
        grid = make_grid(1.0, 6, 1.0, 4)
        with pytest.raises(ValueError, match="diagonal-dominance"):
            march(problem, grid, SolverConfig())
        lat = march(problem, grid, SolverConfig(), override_diag_dom=True)
        assert any("override" in w for w in lat.warnings)

    def test_cap_error_carries_step_and_partial_lattice(self):
        problem = ProblemSpec(
            initial=lambda x, y: np.sin(5 * (x + y)),
            boundary=lambda t, x, y: np.sin(5 * (x + y + t)) * np.ones_like(x),
            box=EX_BOX,
        )
        grid = make_grid(1.0, 10, 1.0, 50)
        with pytest.raises(IterationCapError) as exc:
            march(problem, grid, SolverConfig(k_max=1))
        assert exc.value.step == 0
        assert isinstance(exc.value.partial, SolutionLattice)
        assert exc.value.partial.values.shape[0] == 1

    def test_on_level_streaming_matches_stored_levels(self):
        grid = make_grid(1.0, 6, 1.0, 4)
        problem = ProblemSpec(
            initial=lambda x, y: x + y,
            boundary=lambda t, x, y: x + y + 0 * t,
            box=EX_BOX,
        )
        seen = []
        lat = march(problem, grid, SolverConfig(), on_level=lambda n, t, U: seen.append((n, t, U.copy())))
        assert [n for n, _, _ in seen] == [0, 1, 2, 3, 4]
        for n, _, U in seen:
            np.testing.assert_array_equal(U, lat.values[n])

    def test_keep_levels_false_skips_storage(self):
        grid = make_grid(1.0, 6, 1.0, 4)
        problem = ProblemSpec(
            initial=lambda x, y: x + y,
            boundary=lambda t, x, y: x + y + 0 * t,
            box=EX_BOX,
        )
        count = [0]
        lat = march(problem, grid, SolverConfig(), keep_levels=False,
                    on_level=lambda n, t, U: count.__setitem__(0, count[0] + 1))
        assert lat.values.shape[0] == 0
        assert count[0] == 5
        assert len(lat.reports) == 4


class TestSchemeResidual:
    def test_zero_at_a_constant_fixed_point(self):
        grid = make_grid(1.0, 8, 1.0, 10)
        c = 4.0
        g = scheme_residual(np.full((9, 9), c), np.full((9, 9), c), grid, EX_BOX)
        assert np.abs(g).max() <= 1e-10

    def test_vanishes_at_the_marched_solution(self):
        # the certified linear residual bounds g - f at every step
        from gheat2d.bench import example1_problem

        ex = example1_problem()
        grid = make_grid(1.0, 10, 1.0, 20)
        lat = march(ex.problem, grid, SolverConfig())
        X, Y = grid.meshes()
        ts = grid.times()
        for n in (5, 19):
            g = scheme_residual(
                lat.values[n + 1], lat.values[n], grid, EX_BOX,
                forcing_at_next=lambda x, y: ex.problem.forcing(ts[n + 1], x, y),
            )
            assert np.abs(g).max() <= 1e-6

    def test_forcing_shifts_residual_additively(self):
        rng = np.random.default_rng(5)
        grid = make_grid(1.0, 6, 1.0, 10)
        U, V = rng.normal(size=(7, 7)), rng.normal(size=(7, 7))
        g0 = scheme_residual(U, V, grid, EX_BOX)
        g1 = scheme_residual(U, V, grid, EX_BOX, forcing_at_next=lambda x, y: np.full_like(x, 2.0))
        np.testing.assert_allclose(g0 - g1, 2.0, atol=1e-12)


class TestVerifiers:
    def _problem(self):
        return ProblemSpec(
            initial=lambda x, y: np.sin(5 * (x + y)),
            boundary=lambda t, x, y: np.sin(5 * (x + y + t)) * np.ones_like(x),
            box=EX_BOX,
        )

    def test_monotone_iteration_on_real_step(self):
        grid = make_grid(1.0, 10, 1.0, 50)
        problem = self._problem()
        X, Y = grid.meshes()
        _, rep = picard_step(
            problem.initial(X, Y), grid.dt, problem, grid, SolverConfig(), keep_iterates=True
        )
        assert verify_monotone_iteration(rep)

    def test_monotone_iteration_needs_snapshots(self):
        grid = make_grid(1.0, 10, 1.0, 50)
        problem = self._problem()
        X, Y = grid.meshes()
        _, rep = picard_step(problem.initial(X, Y), grid.dt, problem, grid, SolverConfig())
        with pytest.raises(ValueError):
            verify_monotone_iteration(rep)

    def test_monotone_iteration_flags_a_decrease(self):
        import dataclasses

        grid = make_grid(1.0, 10, 1.0, 50)
        problem = self._problem()
        X, Y = grid.meshes()
        _, rep = picard_step(
            problem.initial(X, Y), grid.dt, problem, grid, SolverConfig(), keep_iterates=True
        )
        forged = list(rep.iterates)
        bad = forged[-1].copy()
        bad[5, 5] -= 1.0
        forged.append(bad)
        assert not verify_monotone_iteration(dataclasses.replace(rep, iterates=tuple(forged)))

    def test_comparison_orders_ordered_problems(self):
        lo = self._problem()
        hi = ProblemSpec(
            initial=lambda x, y: lo.initial(x, y) + 0.5,
            boundary=lambda t, x, y: lo.boundary(t, x, y) + 0.5,
            box=lo.box,
        )
        assert verify_comparison(hi, lo, make_grid(1.0, 8, 1.0, 10), SolverConfig())

    def test_comparison_rejects_unordered_data(self):
        lo = self._problem()
        hi = ProblemSpec(
            initial=lambda x, y: lo.initial(x, y) - 0.5,
            boundary=lambda t, x, y: lo.boundary(t, x, y) + 0.5,
            box=lo.box,
        )
        with pytest.raises(ValueError, match="initial"):
            verify_comparison(hi, lo, make_grid(1.0, 8, 1.0, 10), SolverConfig())

    def test_comparison_rejects_mismatched_boxes(self):
        lo = self._problem()
        other = UncertaintyBox(0.05, 0.09, 0.0625, 0.1225, -0.04, 0.03)
        hi = ProblemSpec(initial=lo.initial, boundary=lo.boundary, box=other)
        with pytest.raises(ValueError, match="box"):
            verify_comparison(hi, lo, make_grid(1.0, 8, 1.0, 10), SolverConfig())
