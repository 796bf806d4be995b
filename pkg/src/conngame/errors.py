"""Exception types shared across the package."""


class ConnGameError(Exception):
    """Base class for all package-specific errors."""


class ShapeMismatch(ConnGameError):
    """A matrix argument is not square/symmetric/hollow as required."""


class NoSuchEdge(ConnGameError):
    """The referenced edge is not present in the graph."""


class NoSuchNode(ConnGameError):
    """The referenced node index is out of range."""


class NumericalFailure(ConnGameError):
    """An eigensolver or other numerical routine did not converge."""


class DegenerateDistance(ConnGameError):
    """Two points are too close for a direction-dependent quantity."""


class EmptyScope(ConnGameError):
    """An attack scope contains no candidate targets."""


class InvalidSpec(ConnGameError):
    """A subproblem specification references dangling indices or is inconsistent."""


class SubproblemInfeasible(ConnGameError):
    """The solver reported an infeasible subproblem.

    A correctly built subproblem always admits the stay-put candidate, so this
    signals a corrupted state (e.g. minimum-distance violation) and aborts the
    run with diagnostics rather than being handled silently.
    """


class NumericalTrouble(ConnGameError):
    """The solver could not reach the required accuracy after a retry."""


class InvalidSchedule(ConnGameError):
    """An update schedule would make both players act on the same step."""


class ScenarioParseError(ConnGameError):
    """A scenario or state file could not be parsed."""


class ScenarioValidationError(ConnGameError):
    """A parsed scenario violates a documented invariant."""
