import numpy as np
import pytest

from gheat2d import (
    GExpQuery,
    SolverConfig,
    UncertaintyBox,
    default_half_width,
    g_expectation,
    upper_and_lower,
)
from gheat2d.gexp import _negated

EX_BOX = UncertaintyBox(0.04, 0.09, 0.0625, 0.1225, -0.04, 0.03)

# small lattices keep every march here well under a second
FAST = dict(half_width=1.0, cells=20, steps=20)


def quad(x, y):
    return x**2 + y**2


class TestHalfWidth:
    def test_example_box_resolves_to_1p5(self):
        assert default_half_width(EX_BOX, 1.0) == 1.5

    def test_floor_at_half(self):
        tiny = UncertaintyBox(0.001, 0.001, 0.001, 0.001, 0.0, 0.0)
        assert default_half_width(tiny, 1.0) == 0.5

    def test_grows_with_horizon(self):
        assert default_half_width(EX_BOX, 4.0) == 3.0

    def test_query_resolution(self):
        assert GExpQuery(quad, EX_BOX).resolved_half_width() == 1.5
        assert GExpQuery(quad, EX_BOX, half_width=2.5).resolved_half_width() == 2.5


class TestQueryValidation:
    def test_nonpositive_eval_time(self):
        with pytest.raises(ValueError, match="eval_time"):
            GExpQuery(quad, EX_BOX, eval_time=0.0)

    def test_nonpositive_half_width(self):
        with pytest.raises(ValueError, match="half_width"):
            GExpQuery(quad, EX_BOX, half_width=-1.0)

    def test_eval_point_must_be_a_node(self):
        q = GExpQuery(quad, EX_BOX, eval_point=(0.017, 0.0), half_width=1.0, cells=40)
        with pytest.raises(ValueError):
            q.grid()

    def test_off_center_node_is_read_directly(self):
        q = GExpQuery(
            lambda x, y: x, EX_BOX, eval_point=(0.25, -0.5),
            half_width=1.0, cells=8, steps=10,
        )
        # linear payoffs are invariant: all second differences vanish
        assert abs(g_expectation(q).value - 0.25) <= 1e-9


class TestSingletonBox:
    """lo == hi collapses the operator to the classical heat equation, where
    x^2 + y^2 has the closed-form value 2*s*T and the scheme is nodally exact
    once the boundary carries the exact solution."""

    S = 0.1
    BOX = UncertaintyBox(S, S, S, S, 0.0, 0.0)

    def _query(self, sign=1.0):
        s = self.S
        return GExpQuery(
            payoff=lambda x, y: sign * quad(x, y),
            box=self.BOX,
            boundary=lambda t, x, y: sign * (quad(x, y) + 2 * s * t),
            half_width=2.0,
            cells=40,
            steps=20,
        )

    def test_matches_classical_heat_value(self):
        res = g_expectation(self._query())
        assert abs(res.value - 0.2) <= 1e-8

    def test_upper_equals_lower(self):
        lower = -g_expectation(self._query(sign=-1.0)).value
        upper = g_expectation(self._query()).value
        assert abs(upper - lower) <= 1e-8

    def test_boundary_diagnostic_and_truncation_warning(self):
        res = g_expectation(self._query())
        # exact-solution boundary sits 2*s*T above the payoff on the ring
        assert abs(res.boundary_diagnostic - 0.2) <= 1e-10
        assert any("half_width" in w for w in res.warnings)

    def test_frozen_payoff_boundary_has_zero_diagnostic(self):
        q = GExpQuery(quad, self.BOX, half_width=2.0, cells=40, steps=20)
        res = g_expectation(q)
        assert res.boundary_diagnostic == 0.0
        assert res.warnings == ()


class TestExampleBoxInterval:
    def test_quadratic_interval_brackets_closed_forms(self):
        # convex payoff selects the upper variances, its negation the lower
        # ones, so the interval is [sum of lo, sum of hi] up to truncation
        q = GExpQuery(quad, EX_BOX, half_width=1.5, cells=60, steps=50)
        iv = upper_and_lower(q)
        assert abs(iv.upper - (0.09 + 0.1225)) <= 2e-3
        assert abs(iv.lower - (0.04 + 0.0625)) <= 2e-3
        assert iv.upper > iv.lower + 0.05

    def test_interval_diagnostic_is_the_max_of_both_sides(self):
        q = GExpQuery(quad, EX_BOX, half_width=1.5, cells=30, steps=20)
        iv = upper_and_lower(q)
        assert iv.boundary_diagnostic == max(
            iv.upper_result.boundary_diagnostic, iv.lower_result.boundary_diagnostic
        )


class TestExpectationAlgebra:
    """The discrete solution map inherits the sublinear-expectation axioms
    from scheme monotonicity, so these hold to solver tolerance, not just in
    the continuum limit."""

    TOL = 1e-6

    @staticmethod
    def _E(payoff):
        return g_expectation(GExpQuery(payoff, EX_BOX, **FAST)).value

    def test_preserves_constants(self):
        assert abs(self._E(lambda x, y: np.full_like(x, 1.7)) - 1.7) <= self.TOL

    def test_scalar_payoff_is_broadcast(self):
        assert abs(self._E(lambda x, y: 1.7) - 1.7) <= self.TOL

    def test_monotone_in_the_payoff(self):
        phi = self._E(lambda x, y: np.sin(2 * x) * np.cos(y))
        psi = self._E(lambda x, y: np.sin(2 * x) * np.cos(y) + 0.25 * x**2)
        assert phi <= psi + self.TOL

    def test_cash_translation(self):
        base = self._E(lambda x, y: np.sin(2 * x) * np.cos(y))
        shifted = self._E(lambda x, y: np.sin(2 * x) * np.cos(y) + 3.0)
        assert abs(shifted - base - 3.0) <= self.TOL

    def test_sublinear(self):
        phi = lambda x, y: np.sin(2 * x) * np.cos(y)
        psi = lambda x, y: 0.5 * x**2 - y
        both = self._E(lambda x, y: phi(x, y) + psi(x, y))
        assert both <= self._E(phi) + self._E(psi) + self.TOL

    def test_positively_homogeneous(self):
        phi = lambda x, y: np.sin(2 * x) * np.cos(y)
        assert abs(self._E(lambda x, y: 2.5 * phi(x, y)) - 2.5 * self._E(phi)) <= self.TOL

    def test_upper_dominates_lower(self):
        iv = upper_and_lower(GExpQuery(lambda x, y: np.sin(2 * x) * np.cos(y), EX_BOX, **FAST))
        assert iv.upper >= iv.lower - self.TOL


class TestNegation:
    def test_negated_query_flips_payoff_and_boundary(self):
        q = GExpQuery(
            quad, EX_BOX, boundary=lambda t, x, y: quad(x, y) + t, **FAST
        )
        n = _negated(q)
        xs = np.linspace(-1, 1, 5)
        np.testing.assert_array_equal(n.payoff(xs, xs), -q.payoff(xs, xs))
        np.testing.assert_array_equal(n.boundary(0.3, xs, xs), -q.boundary(0.3, xs, xs))
        assert (n.cells, n.steps, n.half_width) == (q.cells, q.steps, q.half_width)

    def test_negated_default_boundary_stays_default(self):
        assert _negated(GExpQuery(quad, EX_BOX, **FAST)).boundary is None

    def test_explicit_frozen_boundary_matches_default(self):
        q_default = GExpQuery(quad, EX_BOX, **FAST)
        q_explicit = GExpQuery(
            quad, EX_BOX, boundary=lambda t, x, y: quad(x, y), **FAST
        )
        assert g_expectation(q_default).value == g_expectation(q_explicit).value
