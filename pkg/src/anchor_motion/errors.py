"""Exception types shared across the package."""


class AnchorMotionError(Exception):
    """Base class for all package-specific errors."""


class FormatError(AnchorMotionError):
    """A file does not conform to its container format (bad magic, bad version, ...)."""


class CorruptionError(AnchorMotionError):
    """A file's payload is truncated or inconsistent with its header."""


class ValidationError(AnchorMotionError, ValueError):
    """Input data violates a documented invariant."""


class NoTrajectoriesError(AnchorMotionError):
    """Trajectory collection produced an empty set (e.g. everything masked out)."""
