"""Exception hierarchy.  ``exit_code`` is what the command line returns."""


class CubeKnotError(Exception):
    exit_code = 3
    stage: str | None = None


class PreconditionError(CubeKnotError, ValueError):
    """Bad input or violated precondition (tube too fat, non-orthogonal planes...)."""

    exit_code = 2


class InvariantViolation(CubeKnotError):
    """A property guaranteed by the construction failed; indicates a bug."""

    exit_code = 3


class DisconnectedError(InvariantViolation):
    """A normal line met the cube union in more than one interval."""


class ScaleError(CubeKnotError):
    """The current subdivision is too coarse; retrying at a finer scale may help."""

    exit_code = 3

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
