"""Exception hierarchy shared by all modules."""


class SlipError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatch(SlipError, ValueError):
    pass


class InvalidHorizon(SlipError, ValueError):
    pass


class NonConvergence(SlipError, RuntimeError):
    pass


class IndexOutOfRange(SlipError, IndexError):
    pass


class EigenFailure(SlipError, RuntimeError):
    pass


class LambdaOutOfRange(SlipError, ValueError):
    pass


class HistoryLengthMismatch(SlipError, ValueError):
    pass


class InvalidAlpha(SlipError, ValueError):
    pass


class SolveFailure(SlipError, RuntimeError):
    pass


class ComplexSpectrum(SlipError, ValueError):
    pass


class NotDiagonalizable(SlipError, ValueError):
    pass


class Unsupported(SlipError, ValueError):
    pass


class ConfigInvalid(SlipError, ValueError):
    pass
