"""Exception hierarchy.

Every error raised by the library derives from :class:`CalibError`, which is
itself a ``ValueError`` so generic callers can catch bad input uniformly.
"""


class CalibError(ValueError):
    """Base class for all library errors."""


# outcomes
class LengthMismatch(CalibError):
    pass


class NegativeWeight(CalibError):
    pass


class NotNormalized(CalibError):
    pass


class SpaceMismatch(CalibError):
    pass


class EmptyEvent(CalibError):
    pass


class EmptyDataset(CalibError):
    pass


# properties
class MissingEmbedding(CalibError):
    pass


class BadParam(CalibError):
    pass


class KindMismatch(CalibError):
    pass


class RejectionBudgetExceeded(CalibError):
    pass


class NotBinary(CalibError):
    pass


# losses
class EmptyGrid(CalibError):
    pass


class NotOriented(CalibError):
    pass


# metrics
class MissingPrediction(CalibError):
    pass


class MissingDistPrediction(MissingPrediction):
    pass


class EmptyMap(CalibError):
    pass


class EmptyGroup(CalibError):
    pass


# verify
class MissingIngredient(CalibError):
    pass


class Unrealizable(CalibError):
    pass


class SeparationFailure(CalibError):
    def __init__(self, message, pair=None):
        super().__init__(message)
        self.pair = pair


class TooLarge(CalibError):
    pass


# cli
class ConfigError(CalibError):
    pass


class SchemaError(CalibError):
    pass


class RowError(CalibError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
