"""Exception types shared across the package, mapped to CLI exit codes."""


class KgrelexError(Exception):
    """Base class for all package errors."""


class ConfigError(KgrelexError):
    """Invalid configuration or usage (CLI exit code 1)."""


class DataError(KgrelexError):
    """Malformed or inconsistent input data (CLI exit code 2)."""


class VocabError(DataError):
    """Reference to an entity or relation missing from a vocabulary."""


class NumericalError(KgrelexError):
    """Numerical failure such as training divergence (CLI exit code 3)."""
