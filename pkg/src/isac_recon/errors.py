"""Exception types raised across the toolkit."""


class IsacError(Exception):
    """Base class for all toolkit errors."""


class PlacementError(IsacError):
    """Scene object placement failed after bounded retries."""


class GeometryError(IsacError):
    """Degenerate geometric configuration (parallel line/plane, zero segment)."""


class PlateauError(IsacError):
    """Fusion-radius search found no growth-rate plateau.

    Carries the probed radius grid and the mean growth-rate curve as
    diagnostics.
    """

    def __init__(self, message, radii=None, h_mean=None):
        super().__init__(message)
        self.radii = radii
        self.h_mean = h_mean


class FormatError(IsacError):
    """A file did not parse as the expected on-disk format."""


class ConfigError(IsacError):
    """Invalid configuration value or combination."""
