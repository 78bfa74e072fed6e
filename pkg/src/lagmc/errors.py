"""Exception hierarchy shared across the package."""


class LagmcError(Exception):
    """Base class for all package errors."""


class InvalidInputError(LagmcError, ValueError):
    """Malformed or non-finite input data."""


class InvalidPhaseError(InvalidInputError):
    """A phase value outside the admissible range (-n*pi/2, n*pi/2)."""


class InvalidFamilyError(InvalidInputError):
    """Parameters that do not define a valid solution family or phase family."""


class DimensionError(InvalidInputError):
    """Dimension not supported by the requested operation."""


class SolverFailure(LagmcError, RuntimeError):
    """The Newton linearization could not be solved."""


class StabilityError(InvalidInputError):
    """Explicit time step above the stability bound."""


class RotationDegenerateError(InvalidInputError):
    """Rotation angle too large for the coordinate map to stay bi-Lipschitz."""


class ConfigError(LagmcError):
    """Experiment configuration failed validation.

    Parameters
    ----------
    path : str
        Dotted location of the offending field, e.g. ``grid.points``.
    message : str
        Human readable reason.
    """

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")
