"""Exception hierarchy shared by the estimators and the CLI."""


class RobsubError(Exception):
    """Base class for all errors raised by this package."""


class DegenerateFitError(RobsubError):
    """The data or the current weights do not determine a q-dimensional fit."""

    def __init__(self, message, iteration=None):
        if iteration is not None:
            message = f"{message} (iteration {iteration})"
        super().__init__(message)
        self.iteration = iteration


class ZeroScaleColumnError(DegenerateFitError):
    """A column has zero robust scale and cannot be standardized."""

    def __init__(self, column, what="column"):
        super().__init__(f"{what} {column} has zero Qn scale")
        self.column = column


class ScaleConvergenceError(RobsubError):
    """The M-scale root finder hit its iteration cap."""


class DesignError(RobsubError, ValueError):
    """Invalid simulation design parameters."""
