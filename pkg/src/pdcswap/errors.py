"""Exception hierarchy shared by all pdcswap modules."""


class SwapError(Exception):
    """Base class for every error raised by pdcswap."""


class DomainError(SwapError, ValueError):
    """An argument lies outside the domain of the operation."""


class DimensionMismatchError(SwapError, ValueError):
    pass


class InvalidStateError(SwapError, ValueError):
    """A density matrix or correlated-state triple violates positivity or normalization."""


class DegeneratePostselectionError(SwapError, ValueError):
    """b + c vanishes, so the post-selected state cannot be normalized."""


class NumericError(SwapError, ArithmeticError):
    """A numerical integration failed to reach its tolerance.

    ``residual`` carries the estimated error of the failed evaluation.
    """

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message if residual is None else f"{message} (residual estimate {residual:.3g})")
        self.residual = residual


class DivergentIntegralError(NumericError):
    """The real part of a quadratic form is not positive definite."""


class ResolutionError(NumericError):
    """A discretization grid is too coarse for the requested accuracy.

    ``values`` holds the quantities computed at the grid resolutions that
    were compared, when available.
    """

    def __init__(self, message: str, values: tuple[float, ...] = (), residual: float | None = None):
        super().__init__(message, residual)
        self.values = tuple(values)


class ConfigError(SwapError, ValueError):
    """A run configuration is malformed; ``line`` points into the source file."""

    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)
        self.line = line
        self.path = path
