"""Exception types shared across the harness."""


class LamperError(Exception):
    """Base class for all harness errors."""


class DatasetError(LamperError):
    """Malformed archive file, missing split, or violated dataset invariant."""


class UnequalLengthError(LamperError):
    """Raw-series classification requested on a dataset with varying lengths."""


class BudgetError(LamperError):
    """A prompt (or prompt fragment) cannot fit the backend token budget."""


class BackendError(LamperError):
    """Embedding backend unreachable or returned a protocol-level failure."""


class ConfigError(LamperError):
    """Invalid, unknown, or inconsistent run-configuration input."""
