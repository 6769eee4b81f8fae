"""Exception types that map onto the CLI exit codes."""


class ValidationError(ValueError):
    """Bad inputs or malformed files. CLI exits with code 2."""


class NumericalError(RuntimeError):
    """A solver or factorization failed. CLI exits with code 3."""
