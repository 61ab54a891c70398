"""Exception hierarchy shared across the package."""


class SemsearchError(Exception):
    """Base class for all semsearch errors."""


class FormatError(SemsearchError):
    """A data file does not follow its documented format."""


class EmptyDocumentError(SemsearchError):
    """A statement has no usable tokens after filtering."""


class EmptyQueryError(SemsearchError):
    """A query has no usable tokens after filtering."""


class UnresolvedTokenError(SemsearchError):
    """A token has no vector and was not filtered out upstream."""


class SolverError(SemsearchError):
    """The exact transport solver failed; the result is not usable."""


class ConvergenceError(SemsearchError):
    """An iterative decomposition did not converge within its budget."""


class TrialFileError(SemsearchError):
    """A trial file is malformed or references an unknown target."""


class ConfigError(SemsearchError):
    """Invalid run configuration (bad key, missing file, bad value)."""
