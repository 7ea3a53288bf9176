"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: validation problems exit 1, I/O
problems exit 2, numerical failures exit 3.
"""


class MadmixError(Exception):
    """Base class for all package errors."""


class ValidationError(MadmixError):
    """Invalid input: bad manifest, bad shapes, bad parameter values."""


class ManifestError(ValidationError):
    """Manifest file fails structural or semantic validation."""


class EmbeddingFormatError(ValidationError):
    """Embedding file is corrupt, truncated, or contains non-finite values."""


class NumericalError(MadmixError):
    """A factorization or eigensolve failed beyond recoverable jitter."""
