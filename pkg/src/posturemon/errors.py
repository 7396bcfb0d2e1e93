"""Exception hierarchy shared by every posturemon module.

All validation failures derive from :class:`PostureError` so callers (the CLI
in particular) can catch one type and report ``type(exc).__name__``.
"""

from __future__ import annotations


class PostureError(ValueError):
    """Base class for input-validation failures."""


# orientation
class ZeroNormQuaternion(PostureError):
    pass


class NotNormalized(PostureError):
    pass


class NonUnitInput(PostureError):
    pass


# sensor models
class OutOfRange(PostureError):
    pass


class InvalidScript(PostureError):
    pass


# calibration
class InsufficientData(PostureError):
    pass


class ExcessiveMotion(PostureError):
    pass


# detection
class NonMonotonicTimestamp(PostureError):
    pass


class UncalibratedDetector(PostureError):
    pass


# features
class EmptyMatrix(PostureError):
    pass


class TooFewRows(PostureError):
    pass


class NotSymmetric(PostureError):
    pass


class NoConvergence(PostureError):
    pass


class AllZeroVariance(PostureError):
    pass


# evaluation
class UnsortedInput(PostureError):
    pass


class NoPositives(PostureError):
    pass


# traceio
class MalformedHeader(PostureError):
    pass


class BadFieldCount(PostureError):
    pass


class UnparseableNumber(PostureError):
    pass


class MalformedProfile(PostureError):
    pass
