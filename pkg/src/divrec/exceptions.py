"""Error taxonomy shared across the package.

Every failure mode raised on purpose derives from :class:`DivrecError` so
callers can catch library errors without swallowing genuine bugs.
"""


class DivrecError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(DivrecError, ValueError):
    """Arguments are malformed: bad shapes, out-of-range values, unknown ids."""


class ConfigError(DivrecError, ValueError):
    """A run configuration is inconsistent (e.g. a knob set for the wrong method)."""


class DegenerateKernelError(DivrecError):
    """Kernel has no spectrum left above the eigenvalue floor."""


class DegenerateItemError(DivrecError):
    """An item embedding has zero norm and cannot live on the unit sphere."""


class NotPositiveDefiniteError(DivrecError):
    """Matrix expected to be positive (semi)definite is not."""


class HistoryDegenerateError(DivrecError):
    """History gram matrix is singular; drop collinear history items and retry."""


class RankDeficientError(DivrecError):
    """The likelihood factor cannot support the requested batch size."""

    def __init__(self, message, rank=None):
        super().__init__(message)
        self.rank = rank


class AssumptionViolationError(DivrecError):
    """Feedback positivity (or a similar standing assumption) is violated."""


class MissingScoreError(DivrecError, KeyError):
    """A precomputed feedback table has no entry for the requested pair."""


class FormatError(DivrecError, ValueError):
    """A data file does not parse; carries a line number when one makes sense."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"{message} (line {line})"
        super().__init__(message)
        self.line = line


class StorageError(DivrecError, OSError):
    """Reading or writing a backing file failed."""


class SkipRound(DivrecError):
    """Signal: this round carries no usable learning signal; do not update."""
