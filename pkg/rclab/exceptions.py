from __future__ import annotations


class RclabError(Exception):
    """Base exception with user-friendly message."""
    exit_code = 1


class ConfigError(RclabError):
    exit_code = 2


class ParameterError(ConfigError):
    pass


class LatticeError(RclabError):
    exit_code = 2


class FitError(RclabError):
    exit_code = 2


class StorageError(RclabError):
    """A support or trajectory needs bonds outside the stored box."""
    exit_code = 3


class BudgetError(RclabError):
    exit_code = 3


class EnvironmentFileError(RclabError):
    exit_code = 4


class FormatVersionError(EnvironmentFileError):
    pass


class OutputError(RclabError):
    exit_code = 4


class InvariantError(RclabError):
    """A proven inequality failed on computed data."""
    pass
