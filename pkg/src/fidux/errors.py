"""Exception types shared across the package."""


class FiduxError(Exception):
    """Base class for package-specific errors."""


class DataError(FiduxError):
    """Malformed or inconsistent input data."""


class NoFailuresError(DataError):
    """Dataset contains no failures; fiducial inversion is undefined."""


class ConfigError(FiduxError):
    """Invalid configuration or scenario file."""


class SolverError(FiduxError):
    """Numerical failure inside a convex solve or a sampling run."""


class InfeasibleProblemError(SolverError):
    """The constraint system has no strictly feasible point."""


class DegenerateDensityError(FiduxError):
    """A failure's risk set has all-equal covariates; the 1-d density degenerates."""
