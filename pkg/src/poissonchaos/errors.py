"""Exception hierarchy.

Everything raised on bad input derives from :class:`ValidationError`; the CLI
maps those to exit code 1 and :class:`BudgetExceeded` to exit code 2.
"""


class ChaosError(Exception):
    pass


class ValidationError(ChaosError, ValueError):
    pass


class RepeatedIndex(ValidationError):
    pass


class DuplicateEntry(ValidationError):
    pass


class IndexOutOfRange(ValidationError):
    pass


class OrderMismatch(ValidationError):
    pass


class SizeMismatch(ValidationError):
    pass


class WeightLengthMismatch(SizeMismatch):
    pass


class InvalidContractionIndices(ValidationError):
    pass


class InvalidOrder(ValidationError):
    pass


class OrderTooSmall(ValidationError):
    pass


class OrderTooLarge(ValidationError):
    pass


class MissingCustomMoment(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class DomainError(ValidationError):
    pass


class InsufficientSamples(ValidationError):
    pass


class NonpositiveVariance(ValidationError):
    pass


class WidthMismatch(ValidationError):
    pass


class UnsupportedSampler(ValidationError):
    pass


class ParseError(ValidationError):
    pass


class BudgetExceeded(ChaosError, RuntimeError):
    pass
