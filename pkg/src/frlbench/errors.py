"""Exception hierarchy for the toolkit.

``DataError`` subclasses map to CLI exit code 2; everything they describe is a
problem with user-supplied data or files, not a bug in the caller.
"""


class FrlBenchError(Exception):
    """Base class for all toolkit errors."""


class DataError(FrlBenchError):
    """A problem with input data (files, schemas, values)."""


class MissingColumnError(DataError):
    """A column required by the schema is absent."""


class MissingValueError(DataError):
    """An empty cell where a value is required."""


class NonNumericValueError(DataError):
    """A cell in a numeric column could not be parsed as a number."""


class EmptyCsvError(DataError):
    """A CSV file with no data rows (or no header at all)."""


class EmptyGroupError(DataError):
    """A declared sensitive group has zero rows."""


class UnknownTaskError(DataError):
    """A task name that does not exist in the dataset."""


class DimensionMismatchError(DataError):
    """Column/feature count disagreement between two fitted artifacts."""


class MissingBaselineError(DataError):
    """A report was requested for a task with no baseline record."""


class CalibrationError(FrlBenchError):
    """Bias calibration failed to converge."""
