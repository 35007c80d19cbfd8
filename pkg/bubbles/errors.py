"""Exception types raised by the lab."""

from __future__ import annotations


class BubbleLabError(Exception):
    """Base class for all lab errors."""


class GridError(BubbleLabError, ValueError):
    """Invalid grid parameters or fields living on different grids."""


class ResolutionError(BubbleLabError, ValueError):
    """A bubble scale fell below the resolution floor of the grid."""

    def __init__(self, scale: float, floor: float):
        self.scale = scale
        self.floor = floor
        super().__init__(
            f"Bubble scale {scale:.6g} is below the resolution floor {floor:.6g}"
        )


class ShootingError(BubbleLabError, RuntimeError):
    """Ground-state shooting failed to bracket or decay."""

    def __init__(self, message: str, bracket: tuple[float, float] | None = None):
        self.bracket = bracket
        if bracket is not None:
            message = f"{message} (bracket [{bracket[0]:.16g}, {bracket[1]:.16g}])"
        super().__init__(message)


class ConditioningError(BubbleLabError, RuntimeError):
    """A linear solve was too ill-conditioned to trust."""

    def __init__(self, what: str, estimate: float):
        self.estimate = estimate
        super().__init__(f"{what}: condition estimate {estimate:.3e}")


class DegenerateProfileError(BubbleLabError, ValueError):
    """A profile is identically zero or otherwise unusable."""


class TimeRangeError(BubbleLabError, ValueError):
    """A time lies outside the admissible range."""


class TruncationError(BubbleLabError, ValueError):
    """A rescaled field no longer fits the computational box."""

    def __init__(self, lost: float, message: str = ""):
        self.lost = lost
        super().__init__(message or f"Rescaled support escapes the box (lost {lost:.3e})")


class NoiseRangeError(BubbleLabError, ValueError):
    """Noise weights or paths used outside their valid range."""


class SeparationError(BubbleLabError, ValueError):
    """Bubble anchors are not separable."""


class DivergenceError(BubbleLabError, RuntimeError):
    """The solution blew up numerically."""


class InsufficientDataError(BubbleLabError, ValueError):
    """Too few samples for a fit or finite difference."""


class MisalignedRunsError(BubbleLabError, ValueError):
    """Two trajectories do not share grid and checkpoint times."""


class ConfigMismatchError(BubbleLabError, ValueError):
    """Runs that must share a configuration do not."""


class EmptyReportError(BubbleLabError, ValueError):
    """A report was requested over no records."""


class ConfigError(BubbleLabError, ValueError):
    """A run configuration failed validation.

    :ivar field: Dotted name of the offending field
    """

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class DecompositionError(BubbleLabError, RuntimeError):
    """Modulation Newton iteration failed to converge."""
