"""Exception hierarchy; the CLI maps these onto process exit codes."""

from __future__ import annotations


class FewshotError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(FewshotError):
    """Invalid configuration or parameters (CLI exit code 2)."""


class DataError(FewshotError):
    """Malformed or inconsistent input data (CLI exit code 3)."""


class NumericError(FewshotError):
    """Numerical failure: non-finite values, zero norms (CLI exit code 4)."""


class ZeroVarianceError(FewshotError):
    """Degenerate significance test: zero-variance differences (CLI exit code 5)."""
