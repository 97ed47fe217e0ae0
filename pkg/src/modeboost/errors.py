"""Exception types raised by the forecasting pipeline.

Every domain failure derives from :class:`ModeboostError`, so callers (and
the CLI) can distinguish expected data/contract problems from genuine bugs.
"""


class ModeboostError(Exception):
    """Base class for all domain errors."""


# -- panels and splits -------------------------------------------------------

class EmptyInput(ModeboostError):
    pass


class UnparseableTimestamp(ModeboostError):
    pass


class GridTooShort(ModeboostError):
    pass


class UnknownEntity(ModeboostError):
    pass


# -- ingestion ---------------------------------------------------------------

class MissingColumn(ModeboostError):
    pass


class MalformedRow(ModeboostError):
    pass


class MalformedDate(ModeboostError):
    pass


class DegeneratePolygon(ModeboostError):
    pass


class InvalidSpec(ModeboostError):
    pass


# -- features and matrices ---------------------------------------------------

class InsufficientHistory(ModeboostError):
    pass


class NoUsableRows(ModeboostError):
    pass


class HorizonExceedsGrid(ModeboostError):
    pass


class EmptyTraining(ModeboostError):
    pass


class FeatureMismatch(ModeboostError):
    pass


class AlreadyScaled(ModeboostError):
    pass


class DuplicateName(ModeboostError):
    pass


# -- model training and persistence ------------------------------------------

class EmptyMatrix(ModeboostError):
    pass


class LabelOutOfRange(ModeboostError):
    pass


class NonFiniteFeature(ModeboostError):
    pass


class WrongTask(ModeboostError):
    pass


class IoFailure(ModeboostError):
    pass


class VersionMismatch(ModeboostError):
    pass


class CorruptFile(ModeboostError):
    pass


# -- evaluation and statistics -----------------------------------------------

class LengthMismatch(ModeboostError):
    pass


class EmptySample(ModeboostError):
    pass


class TooFewSamples(ModeboostError):
    pass


class AllZeroDifferences(ModeboostError):
    pass


class AllZeroTraining(ModeboostError):
    pass


class NoTestRows(ModeboostError):
    pass


class SingleEntity(ModeboostError):
    pass


# -- tuning ------------------------------------------------------------------

class EmptySpace(ModeboostError):
    pass


class TrialPruned(Exception):
    """Raised inside an objective to abandon the current trial early.

    Deliberately not a ModeboostError: it is control flow, not a failure.
    """
