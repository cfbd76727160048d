"""Exception hierarchy.

Everything raised on purpose derives from :class:`OverlapixError`. Input
problems derive from :class:`ValidationError` so the CLI can map them to
exit code 1 in one place.
"""


class OverlapixError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(OverlapixError, ValueError):
    """Input does not satisfy a documented contract."""


class SchemaError(ValidationError):
    """Studies disagree on which characteristics they report."""


class FormatError(ValidationError):
    """An input file or value cannot be parsed.

    ``line`` and ``column`` are 1-based and optional.
    """

    def __init__(self, message, *, source=None, line=None, column=None):
        self.detail = message
        self.source = source
        self.line = line
        self.column = column
        where = []
        if source is not None:
            where.append(str(source))
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column}")
        prefix = ", ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)

    def located(self, *, source=None, line=None, column=None):
        """Copy with missing location fields filled in."""
        return FormatError(
            self.detail,
            source=self.source if self.source is not None else source,
            line=self.line if self.line is not None else line,
            column=self.column if self.column is not None else column,
        )


class PartitionError(ValidationError):
    """Bins are overlapping, incomplete or non-contiguous."""

    def __init__(self, message, *, characteristic=None, bins=()):
        self.characteristic = characteristic
        self.bins = tuple(bins)
        super().__init__(message)


class ConfigError(ValidationError):
    """An estimator or generator configuration is infeasible."""


class CriterionUnavailableError(ValidationError):
    """A selection criterion needs per-study data that is missing."""

    def __init__(self, criterion, missing):
        self.criterion = criterion
        self.missing = tuple(missing)
        super().__init__(
            f"criterion {criterion!r} needs data missing for studies: "
            + ", ".join(self.missing)
        )


class CapacityError(OverlapixError):
    """Too many studies for the requested computation."""


class TimeBudgetExceeded(OverlapixError):
    """An exponential search ran past its time or node budget."""


class SoundnessViolation(OverlapixError, AssertionError):
    """Zero potential was computed for a subset that truly overlaps.

    ``instance`` holds a JSON-serializable replay of the offending synthesis.
    """

    def __init__(self, message, instance=None):
        self.instance = instance
        super().__init__(message)
