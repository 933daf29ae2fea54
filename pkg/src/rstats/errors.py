"""Exception types shared across the package."""


class RobustStatsError(Exception):
    """Base class for all package-specific errors."""


class DataIOError(RobustStatsError):
    """A file could not be read or written."""


class ParseError(RobustStatsError):
    """A file did not conform to the expected format.

    Attributes:
        line: 1-based line number of the offending row, when known.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class EmptyDataError(ParseError):
    """The file contained a header but no data rows (or nothing at all)."""


class InvalidParameterError(RobustStatsError, ValueError):
    """An argument violated its documented range or shape constraint."""


class DegenerateDataError(RobustStatsError):
    """The input collapsed to something the operation cannot act on.

    Covers empty point sets, pruning that removes every point, filters
    whose support is exhausted, and all-zero score functions.
    """


class FilterPreconditionError(RobustStatsError):
    """The spectral precondition of a filter step does not hold
    (top covariance eigenvalue too small to build a score function)."""


class NoThresholdError(RobustStatsError):
    """The tail-bound filter found no admissible threshold.

    This is a diagnostic rather than a bug: it means the empirical tail of
    the projected data never exceeded the reference sub-gaussian envelope,
    so the deterministic filter cannot make progress. Callers typically
    fall back to the score-based (universal) filter.
    """


class ConvergenceError(RobustStatsError):
    """An iterative routine exceeded its iteration budget with no fallback."""
