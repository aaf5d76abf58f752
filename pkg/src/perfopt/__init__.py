"""Performance anti-pattern mining, retrieval, and edit generation toolkit."""

__version__ = "0.1.0"


class PerfOptError(Exception):
    """Base class for all domain errors raised by this package."""
