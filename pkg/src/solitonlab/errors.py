"""Exception hierarchy shared by the solver, fitters and CLI."""


class SolitonLabError(Exception):
    """Base class for all package errors."""


class ConfigurationError(SolitonLabError, ValueError):
    """Invalid grid, run or sweep configuration.

    ``key`` names the offending configuration entry when there is one.
    """

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class StencilError(SolitonLabError, IndexError):
    """A stencil was requested at a node where it is not defined."""


class SingularityError(SolitonLabError, ArithmeticError):
    """The field hit the blow-up set (a model denominator vanished)."""

    def __init__(self, model, r, f):
        super().__init__(f"{model} denominator vanishes at r={r!r} (f={f!r})")
        self.model = model
        self.r = r
        self.f = f


class InsufficientDataError(SolitonLabError, ValueError):
    """Not enough qualifying data points for a fit."""


class FitFailureError(SolitonLabError, RuntimeError):
    """An iterative fit did not converge; ``last`` holds the final iterate."""

    def __init__(self, message, last=None):
        super().__init__(message)
        self.last = last
