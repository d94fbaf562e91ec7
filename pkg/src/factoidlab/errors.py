"""Semantic exception hierarchy.

Public functions raise these instead of bare ValueError so callers can
distinguish contract violations from genuine bugs.
"""


class FactoidLabError(Exception):
    """Base class for all errors raised by this package."""


class DistributionError(FactoidLabError, ValueError):
    """Invalid weights, indices, or parameters when building a distribution."""


class UniverseMismatchError(FactoidLabError, ValueError):
    """Two objects that must share a factoid universe do not."""


class PartitionError(FactoidLabError, ValueError):
    """Blocks are empty, overlapping, or do not cover the universe."""


class UnsupportedModelError(FactoidLabError, ValueError):
    """Operation requested for a world model it is not defined on."""


class InsufficientDataError(FactoidLabError, ValueError):
    """Not enough samples or trials for the requested computation."""


class ConfigError(FactoidLabError, ValueError):
    """Invalid experiment configuration (bad key, type, or invariant)."""
