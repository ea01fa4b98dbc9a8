"""Exception hierarchy.

Every failure the toolkit raises on bad data derives from :class:`DPIError`,
so callers (and the command line) can separate data problems from bugs.
"""


class DPIError(Exception):
    """Base class for data and contract errors."""


# signal
class EmptySignal(DPIError):
    pass


class NoPeriodicity(DPIError):
    pass


class HarmonicNotFound(DPIError):
    pass


class SilentFrame(DPIError):
    pass


class DegenerateCalibration(DPIError):
    pass


class AliasedHarmonic(DPIError):
    pass


# features
class TooFewSamples(DPIError):
    pass


class ZeroVariance(DPIError):
    pass


class InsufficientVoicing(DPIError):
    pass


class NotEnoughDays(DPIError):
    pass


class WindowSearchExhausted(DPIError):
    pass


# model / eval
class SingleClass(DPIError):
    pass


class ClassTooSmall(DPIError):
    pass


class NonConvergence(RuntimeWarning):
    """Emitted (not raised) when logistic training hits ``max_iter``."""


# stats
class ZeroPooledStd(DPIError):
    pass


class DegenerateVariance(DPIError):
    pass


class ConstantInput(DPIError):
    pass


class DegenerateInput(DPIError):
    pass


class NotReached(DPIError):
    pass


# experiments
class MissingCondition(DPIError):
    pass


# io
class ParseError(DPIError):
    pass


class DuplicateSubject(DPIError):
    pass


class MissingDayIndex(DPIError):
    pass


class UnresolvablePath(DPIError):
    pass


class UnsupportedFormat(DPIError):
    pass


class CorruptHeader(DPIError):
    pass


class SchemaMismatch(DPIError):
    pass


class SchemaVersionMismatch(DPIError):
    pass
