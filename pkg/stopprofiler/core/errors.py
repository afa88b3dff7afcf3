"""
Error types

Every failure the library reports is a StopProfilerError. DataError covers
bad inputs (CLI exit code 2), UsageError covers bad flags (CLI exit code 1).
"""

from typing import Iterable, Optional, Tuple


class StopProfilerError(Exception):
    """Base class for all stopprofiler errors"""
    pass


class DataError(StopProfilerError):
    """Raised when input data violates a precondition"""
    pass


class UsageError(StopProfilerError):
    """Raised when command-line flags are missing or inconsistent"""
    pass


class ConfigError(DataError):
    """Raised when a configuration object violates its constraints"""
    pass


class RangeError(DataError):
    """Raised when an event field is outside its valid range"""

    def __init__(self, field: str, value=None, line: Optional[int] = None):
        self.field = field
        self.value = value
        self.line = line
        super().__init__(self._message())

    def _message(self) -> str:
        where = f" (line {self.line})" if self.line is not None else ""
        return f"{self.field} out of range: {self.value!r}{where}"

    def at_line(self, line: int) -> "RangeError":
        self.line = line
        self.args = (self._message(),)
        return self


class MixedTripError(DataError):
    """Raised when events of several trips are passed as one trip"""
    pass


class ParseError(DataError):
    """Raised when an event file row cannot be decoded"""

    def __init__(self, line: int, column: str, detail: str = ""):
        self.line = line
        self.column = column
        message = f"line {line}, column {column!r}"
        if detail:
            message += f": {detail}"
        super().__init__(message)


class DuplicateEventError(DataError):
    """Raised when two rows share (trip_id, service_date, event_time, stop_id)"""

    def __init__(self, line: int, key: Tuple):
        self.line = line
        self.key = key
        super().__init__(f"line {line}: duplicate event {key}")


class ZeroTotalError(DataError):
    """Raised when a profile total of zero makes normalization undefined"""

    def __init__(self, stops: Iterable[str]):
        self.stops = list(stops)
        super().__init__(f"zero total for stop(s): {', '.join(self.stops)}")


class LengthMismatchError(DataError):
    """Raised when vectors or partitions have different lengths"""
    pass


class TooFewCurvesError(DataError):
    """Raised when band distance gets fewer than two curves"""
    pass


class NotAPermutationError(DataError):
    """Raised when a reordering is not a bijection on 0..n-1"""
    pass


class UnknownVariationError(DataError):
    """Raised when no trip of the requested route variation exists"""
    pass


class BadKError(DataError):
    """Raised when k is outside 1..n"""
    pass


class TooFewStopsError(DataError):
    """Raised when a matrix has no off-diagonal pair"""
    pass


class EmptyInputError(DataError):
    """Raised when ranking an empty vector"""
    pass


class LabelMismatchError(DataError):
    """Raised when two distance matrices do not share labels and order"""
    pass


class DegenerateError(DataError):
    """Raised when a statistic is undefined for constant input"""
    pass


class UnknownStopError(DataError):
    """Raised when an ordering names a stop with no profile"""
    pass


class InvalidMatrixError(DataError):
    """Raised when a distance matrix is not square, symmetric, zero-diagonal and nonnegative"""
    pass
