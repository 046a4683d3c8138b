"""Exception types shared across the solvers."""

from __future__ import annotations


class ConfigurationError(ValueError):
    """Invalid physical configuration or solver setup."""


class GridAlignmentError(ValueError):
    """A time was requested that does not lie on the integration grid."""


class NonExponentialWindowError(ValueError):
    """The fit window contains a revival, so no single rate describes it."""


class PoleError(ZeroDivisionError):
    """Laplace-domain evaluation too close to a pole."""


class NoBoundStateError(ValueError):
    """No bound state in the continuum exists at the requested phases."""


class RootFindingError(RuntimeError):
    """Phase solver failed; carries the partial assignment reached so far."""

    def __init__(self, message: str, partial: dict[int, float] | None = None):
        super().__init__(message)
        self.partial = dict(partial or {})


class PrematureCallError(ValueError):
    """Post-processing requested before the atom has decayed."""
