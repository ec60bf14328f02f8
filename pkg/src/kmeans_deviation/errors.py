"""Exception types shared across the package.

``PreconditionError`` marks a violated modelling assumption (bad parameter
domain, missing moment, degenerate input); the CLI maps it to exit code 2.
``InvariantViolationError`` marks an internal consistency failure and maps
to exit code 3.
"""


class PreconditionError(ValueError):
    """An input violates a documented precondition or assumption."""


class AssumptionUnavailableError(PreconditionError):
    """A required moment/certificate is absent from the supplied profile."""


class DegenerateSampleError(PreconditionError):
    """Sample has zero variance; moment machinery requires sigma^2 > 0."""


class InvariantViolationError(RuntimeError):
    """An internal invariant failed; indicates a bug, not a user error."""
