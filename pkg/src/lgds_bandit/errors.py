"""Exception types raised across the package."""


class DimensionError(ValueError):
    """Array shapes are incompatible."""


class ParameterError(ValueError):
    """A parameter lies outside its admissible range."""


class InputError(ValueError):
    """Caller-supplied data is missing or malformed."""


class InstabilityError(ValueError):
    """State matrix has spectral radius >= 1."""


class NumericError(ArithmeticError):
    """A numerical routine failed to produce a result."""


class ConvergenceError(NumericError):
    """Fixed-point iteration did not reach tolerance.

    Attributes
    ----------
    residual : float
        Frobenius norm of the last update.
    iterations : int
        Number of iterations performed.
    """

    def __init__(self, message, residual, iterations):
        super().__init__(f"{message} (residual={residual:.3e}, iterations={iterations})")
        self.residual = residual
        self.iterations = iterations


class InstanceFormatError(InputError):
    """An instance or config document could not be parsed."""
