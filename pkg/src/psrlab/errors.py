"""Exception hierarchy shared by all psrlab modules."""


class PsrLabError(Exception):
    """Base class for every error raised by psrlab."""


class DomainError(PsrLabError, ValueError):
    """An argument lies outside the domain of the operation."""


class NonSymplectic(PsrLabError, ValueError):
    pass


class SingularCovariance(PsrLabError, ValueError):
    pass


class SchemeMismatch(PsrLabError, ValueError):
    """A coupling or decay entry references an unknown level."""


class NonHermitian(PsrLabError, AssertionError):
    pass


class DegenerateSteadyState(PsrLabError):
    """The Liouvillian null space is not one-dimensional."""


class UnstableDrift(PsrLabError):
    pass


class NegativeDiffusion(PsrLabError):
    pass


class SingularResolvent(PsrLabError):
    pass


class NonConverged(PsrLabError):
    pass


class Unphysical(PsrLabError, ValueError):
    """Measured noise is below what any source could produce through the chain."""


class RankDeficient(PsrLabError, ValueError):
    pass


class ParseError(PsrLabError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MissingColumn(ParseError):
    def __init__(self, column: str):
        self.column = column
        super().__init__(f"missing column {column!r}")


class ConfigError(PsrLabError, ValueError):
    pass
