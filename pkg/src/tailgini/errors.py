"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class TailGiniError(Exception):
    """Root of every error raised by the package."""

    exit_code = 4


class InvalidSampleError(TailGiniError, ValueError):
    """A sample violates its contract (length, finiteness, range of k)."""


class DegenerateSampleError(InvalidSampleError):
    """The sample has no spread where spread is required."""


class ConfigError(TailGiniError, ValueError):
    """Tail fractions, extreme levels or run settings are out of range."""


class EstimatorError(TailGiniError, ValueError):
    """An estimator could not be evaluated on the given sample."""

    def __init__(self, estimator: str, message: str):
        super().__init__(f"{estimator}: {message}")
        self.estimator = estimator


class ConvergenceError(TailGiniError):
    """A numerical procedure (quadrature, likelihood maximisation) did not converge."""

    exit_code = 5


class DataFormatError(TailGiniError, ValueError):
    """An input file could not be parsed against its schema."""

    exit_code = 3


class ExperimentError(TailGiniError):
    """Too many replications failed for the run to be usable."""

    exit_code = 6
