"""Exception types shared across the package."""


class GHeatError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(GHeatError):
    """Invalid run configuration.

    Carries the offending field path (dotted, e.g. ``grid.cells``) so front
    ends can emit anchored messages.
    """

    def __init__(self, field: str, message: str):
        self.field = field
        self.message = message
        super().__init__(f"{field}: {message}")


class ExpressionError(GHeatError):
    """Syntax error in a payoff/data expression.

    ``offset`` is the byte offset into the source text; ``expected`` lists the
    token kinds that would have been accepted at that point.
    """

    def __init__(self, message: str, offset: int, expected: tuple[str, ...] = ()):
        self.offset = offset
        self.expected = expected
        detail = f" at offset {offset}"
        if expected:
            detail += " (expected " + " or ".join(expected) + ")"
        super().__init__(message + detail)


class EvaluationError(GHeatError):
    """Expression evaluation failed (division by zero and friends)."""


class LinearSolveError(GHeatError):
    """Linear solve missed the residual contract within the sweep cap."""

    def __init__(self, residual: float, target: float, sweeps: int):
        self.residual = residual
        self.target = target
        self.sweeps = sweeps
        super().__init__(
            f"linear solve stalled at residual {residual:.3e} "
            f"(target {target:.3e}) after {sweeps} sweeps"
        )


class IterationCapError(GHeatError):
    """Inner iteration hit k_max with the increment still above tolerance.

    ``report`` holds the step's IterationReport, ``partial`` the last iterate,
    and ``step`` the failing time-step index when raised from a march.
    """

    def __init__(self, report, partial, step: int | None = None):
        self.report = report
        self.partial = partial
        self.step = step
        where = f" at step {step}" if step is not None else ""
        super().__init__(
            f"inner iteration hit the cap{where}; "
            f"last increment {report.increments[-1]:.3e}"
        )


class NonNestedGridError(GHeatError):
    """Requested grid does not nest in the reference lattice."""
