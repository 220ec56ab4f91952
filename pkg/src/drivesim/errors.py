"""Exception hierarchy shared across the package."""

from __future__ import annotations


class DriveSimError(Exception):
    """Base class for all drivesim failures."""


class ValidationError(DriveSimError):
    """An argument or configuration value violates its contract."""


class ConfigError(DriveSimError):
    """A strategy or run configuration is incomplete or inconsistent."""


class SchemaError(DriveSimError):
    """An input file is missing required columns or is malformed."""


class DataReadError(DriveSimError):
    """An input file could not be read at all."""


class PoolEmptyError(DriveSimError):
    """A play pool ended up with zero plays and cannot be sampled."""


class NoEligiblePlaysError(DriveSimError):
    """The sampling ladder was exhausted without finding a matching play.

    Carries the offending situation so callers can report what was asked for.
    """

    def __init__(self, message, *, state=None, kinds=None, down_pool=None):
        super().__init__(message)
        self.state = state
        self.kinds = kinds
        self.down_pool = down_pool


class DownloadError(DriveSimError):
    """A play-by-play download failed.

    ``retryable`` distinguishes transient network trouble from permanent
    failures such as an unknown season.
    """

    def __init__(self, message, *, url=None, retryable=False):
        super().__init__(message)
        self.url = url
        self.retryable = retryable


class FitError(DriveSimError):
    """An empirical model component could not be estimated from the pool."""


class CacheFormatError(DriveSimError):
    """A pool cache file has a bad magic header, version, or layout."""
