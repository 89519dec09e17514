"""Exception hierarchy shared by all nodal_lab modules."""


class NodalLabError(Exception):
    """Base class; the CLI maps any subclass to exit code 2."""


class InvalidArgumentError(NodalLabError, ValueError):
    pass


class ResourceError(NodalLabError):
    """Requested mesh or problem exceeds the built-in resource guard."""


class EmptyDomainError(NodalLabError):
    pass


class AssemblyError(NodalLabError):
    pass


class ConvergenceError(NodalLabError):
    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class UnderResolvedDomainError(NodalLabError):
    pass


class DegenerateFieldError(NodalLabError):
    pass


class GeometryMismatchError(NodalLabError):
    pass


class UnsupportedOracleError(NodalLabError):
    pass


class GridRangeError(NodalLabError):
    pass


class GuardError(NodalLabError):
    """Eigenvalue below the guard the construction requires."""
