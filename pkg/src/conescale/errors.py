"""Exception types shared across the package.

Each class carries the CLI exit code it maps to.
"""


class ConeScaleError(Exception):
    exit_code = 1


class SchemaError(ConeScaleError, ValueError):
    """Malformed or schema-violating input; ``path`` names the offending field."""

    exit_code = 1

    def __init__(self, message, path=None):
        self.path = path
        if path:
            message = f"{path}: {message}"
        super().__init__(message)


class PreconditionError(ConeScaleError, ValueError):
    exit_code = 2


class UnsupportedConeError(PreconditionError):
    pass


class NumericalError(ConeScaleError, ArithmeticError):
    exit_code = 3


class ConvergenceError(NumericalError):
    """Iteration cap reached; ``best`` holds the best iterate found."""

    def __init__(self, message, best=None):
        self.best = best
        super().__init__(message)


class IndeterminateError(ConeScaleError):
    exit_code = 4
