"""Exception types raised across the package."""


class WearcastError(Exception):
    """Base class for all package errors."""


# signal pipeline
class SegmentTooShort(WearcastError, ValueError):
    pass


class CutoffAboveNyquist(WearcastError, ValueError):
    pass


class WindowLongerThanRecord(WearcastError, ValueError):
    pass


class DegenerateChannel(UserWarning):
    """Warned (not raised) when a channel's spread is too small to scale."""


class EmptyFitSet(WearcastError, ValueError):
    pass


# wear labels
class EmptyMeasurementList(WearcastError, ValueError):
    pass


class ProfileCoverageError(WearcastError, ValueError):
    pass


class InvalidMeasurement(WearcastError, ValueError):
    pass


# network
class UnknownConditionKey(WearcastError, KeyError):
    pass


class KernelLargerThanInput(WearcastError, ValueError):
    pass


class ShapeMismatch(WearcastError, ValueError):
    pass


class LengthMismatch(WearcastError, ValueError):
    pass


class MissingForwardCache(WearcastError, RuntimeError):
    pass


class WindowTooShort(WearcastError, ValueError):
    pass


class ConfigError(WearcastError, ValueError):
    pass


# training
class EmptyDataset(WearcastError, ValueError):
    pass


# evaluation
class UnknownFpt(WearcastError, ValueError):
    pass


class SingleFptDataset(WearcastError, ValueError):
    pass


class EmptyInput(WearcastError, ValueError):
    pass


class DegenerateActuals(WearcastError, ValueError):
    pass


class DivisionByZeroReference(WearcastError, ZeroDivisionError):
    pass


class DatasetFormatError(WearcastError, ValueError):
    pass
