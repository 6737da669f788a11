"""Exception types shared across the package."""


class SwapSimError(Exception):
    """Base class for package-specific errors."""


class IncompatibleSourcesError(SwapSimError, ValueError):
    """Two sources cannot be combined (different bin count or bin phase)."""


class NotHeraldedError(SwapSimError, ValueError):
    """Operation requires a heralded (Psi-minus) component."""


class InsufficientDataError(SwapSimError, ValueError):
    """Not enough samples to produce an estimate."""


class FitFailureError(SwapSimError, RuntimeError):
    """Fringe fit could not converge or the sweep is degenerate."""


class ConfigError(SwapSimError, ValueError):
    """Scenario configuration file is malformed.

    ``location`` points at the offending JSON line or key path.
    """

    def __init__(self, message: str, location: str = ""):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)
