"""Exception hierarchy.

Errors fall into three families that map onto CLI exit codes: configuration
problems (2), data problems (3) and numerical failures (4).
"""

from __future__ import annotations


class WindVolError(Exception):
    exit_code = 1

    def __init__(self, message: str = "", *, station: str | None = None):
        self.station = station
        if station is not None:
            message = f"[station {station}] {message}"
        super().__init__(message)


class ConfigError(WindVolError):
    exit_code = 2


class DataError(WindVolError):
    exit_code = 3


class NumericalError(WindVolError):
    exit_code = 4


# configuration / contract errors
class ConfigInvalid(ConfigError):
    pass


class KTooLarge(ConfigError):
    pass


class BadLambda(ConfigError):
    pass


class DimensionMismatch(ConfigError):
    pass


class ShapeMismatch(ConfigError):
    pass


class InvalidParameters(ConfigError, ValueError):
    pass


# data errors
class MissingUpstream(DataError):
    pass


class DataUnavailable(DataError):
    pass


class MissingCell(DataError):
    def __init__(self, date, station_id):
        self.date = date
        super().__init__(f"missing observation for {date}", station=str(station_id))


class DuplicateRow(DataError):
    pass


class NonDailySpacing(DataError):
    pass


class UnparseableValue(DataError):
    pass


class EmptyPanel(DataError):
    pass


class EmptyList(DataError):
    pass


class BoundaryOutsideRange(DataError):
    pass


class OutOfDomain(DataError):
    pass


class SeriesTooShort(DataError):
    pass


class TooShort(SeriesTooShort):
    pass


class TooFewObservations(SeriesTooShort):
    pass


class NonFinite(DataError):
    pass


class ConstantSeries(DataError):
    pass


class ConstantValues(DataError):
    pass


class AllZeroWeights(DataError):
    pass


class AllZeroResiduals(DataError):
    pass


class AllExcluded(DataError):
    pass


class UndefinedDirection(DataError):
    pass


# numerical failures
class DegenerateVariance(NumericalError):
    pass


class DegenerateInput(NumericalError):
    pass


class NonConvergence(NumericalError):
    pass


class InsufficientSample(NonConvergence):
    pass


class SingularRegression(NumericalError):
    pass


class SingularSystem(NumericalError):
    pass
