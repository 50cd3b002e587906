"""Exception types raised across the package."""


class SeqlocError(Exception):
    pass


class ZeroQuaternion(SeqlocError, ValueError):
    pass


class EmptyList(SeqlocError, ValueError):
    pass


class BehindCamera(SeqlocError, ValueError):
    pass


class DegeneratePoint(SeqlocError, ValueError):
    pass


class DimensionMismatch(SeqlocError, ValueError):
    pass


class TooFewFrames(SeqlocError, ValueError):
    pass


class ShapeMismatch(SeqlocError, ValueError):
    pass


class CacheMismatch(SeqlocError, ValueError):
    pass


class LengthMismatch(SeqlocError, ValueError):
    pass


class DegenerateOrientationTerm(SeqlocError, ValueError):
    pass


class NonFiniteGradient(SeqlocError, FloatingPointError):
    pass


class NonFiniteLoss(SeqlocError, FloatingPointError):
    pass


class ConfigMismatch(SeqlocError, ValueError):
    pass


class CheckpointFormatError(SeqlocError, ValueError):
    pass
