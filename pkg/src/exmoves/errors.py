"""Exception hierarchy shared by every stage of the pipeline."""


class ExmovesError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(ExmovesError, ValueError):
    """A volume or array does not fit the video it is applied to."""


class IncompatibleModelError(ExmovesError, ValueError):
    """Model weights and video codebook layout disagree."""


class DegenerateSetError(ExmovesError, ValueError):
    """A training set lacks one of the classes it needs."""


class CalibrationError(ExmovesError, ValueError):
    pass


class ContractError(ExmovesError, ValueError):
    """An input violates a documented precondition (e.g. uncalibrated model)."""


class CardinalityError(ExmovesError, ValueError):
    pass


class FormatError(ExmovesError, ValueError):
    """A file could not be parsed; the message names the offending line."""
