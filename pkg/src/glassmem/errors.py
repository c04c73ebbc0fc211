"""Exception taxonomy shared across the package.

Every error raised by library code derives from GlassMemError so callers can
catch one type at the boundary. The harness maps ConfigError to exit code 2
and everything else to exit code 3.
"""


class GlassMemError(Exception):
    """Base class for all package errors."""


class ParameterError(GlassMemError):
    """A scalar argument is outside its documented domain."""


class ShapeError(GlassMemError):
    """An array argument has the wrong shape, dtype, or alphabet."""


class RankError(GlassMemError):
    """A pattern overlap matrix is numerically singular."""


class NumericError(GlassMemError):
    """An internal numerical check failed."""


class DivergenceError(GlassMemError):
    """A requested kernel value diverges for the given parameters."""


class StiffnessError(GlassMemError):
    """The adaptive integrator's step size underflowed."""


class FitError(GlassMemError):
    """A nonlinear fit did not converge."""


class DegenerateFitError(FitError):
    """The fit input cannot constrain the model (e.g. all counts equal one)."""


class DegenerateSpectrumError(GlassMemError):
    """An eigenvalue spectrum has no usable spacing structure."""


class NotFixedPointError(GlassMemError):
    """A state passed as an attractor is not stable under the dynamics."""


class CodecError(GlassMemError):
    """A pattern-to-state linear map failed its sign-consistency check."""


class CapacityError(GlassMemError):
    """Fewer distinct stable states were found than patterns to store."""

    def __init__(self, message: str, found: int | None = None):
        super().__init__(message)
        self.found = found


class ConfigError(GlassMemError):
    """An experiment configuration is malformed."""
