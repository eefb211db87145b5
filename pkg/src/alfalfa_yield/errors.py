"""Exception hierarchy shared by the pipeline stages."""

from __future__ import annotations


class AlfalfaError(Exception):
    """Base class for every error raised by this package."""


# ingest / featurize


class IngestError(AlfalfaError):
    pass


class MissingColumnError(IngestError):
    pass


class BadDateError(IngestError):
    pass


class NegativeYieldError(IngestError):
    pass


class BadNumericError(IngestError):
    pass


class DuplicateDayError(IngestError):
    pass


class GapTooLargeError(IngestError):
    def __init__(self, station, start, end, field=None):
        self.station = station
        self.start = start
        self.end = end
        self.field = field
        what = f" ({field})" if field else ""
        super().__init__(f"gap in {station}{what} from {start} to {end} exceeds max_gap")


class UnmappedLocationError(IngestError):
    pass


class CoverageHoleError(IngestError):
    pass


class NonPositiveIntervalError(AlfalfaError):
    pass


# models


class ModelError(AlfalfaError):
    pass


class EmptyTrainingSetError(ModelError):
    pass


class WrongDimensionError(ModelError):
    pass


class UnfittedError(ModelError):
    pass


class KTooLargeError(ModelError):
    pass


class NonFiniteLossError(ModelError):
    pass


class SingularDesignError(ModelError):
    pass


class ConvergenceWarning(UserWarning):
    """Iterative solver stopped at its iteration cap; the best iterate is kept."""


# selection / stats / experiments


class TooFewRowsError(AlfalfaError):
    pass


class KExceedsNError(AlfalfaError):
    pass


class StatsError(AlfalfaError):
    pass


class LengthMismatchError(StatsError):
    pass


class EmptyInputError(StatsError):
    pass


class DegenerateVarianceError(StatsError):
    pass


class ZeroTruthError(StatsError):
    pass


class TooFewSamplesError(StatsError):
    pass


class PlanError(AlfalfaError):
    """Invalid experiment plan (unknown state, target among sources, ...)."""


class UnknownStateError(PlanError):
    pass


class EmptySourceError(PlanError):
    pass
