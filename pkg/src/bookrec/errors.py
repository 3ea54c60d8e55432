"""Exception types raised across the package.

Every error carries enough context in its message to locate the offending
input (file, line, user, ...); callers that need structured detail can use
the extra attributes where provided.
"""


class BookrecError(Exception):
    """Base class for all package errors."""


class InvalidId(BookrecError):
    """An external identifier is empty or otherwise unusable."""


class IoError(BookrecError):
    """An input file is missing or unreadable."""


class SchemaError(BookrecError):
    """A CSV header does not match the declared schema."""


class CorruptInput(BookrecError):
    """Too large a fraction of rows in an input file failed to parse."""


class LinkError(BookrecError):
    """A link file references unknown book/item ids or repeats an id."""

    def __init__(self, message, offenders=()):
        super().__init__(message)
        self.offenders = list(offenders)


class EmptySummary(BookrecError):
    """All selected metadata fields of a book are empty."""


class FormatError(BookrecError):
    """A serialized embedding or model file violates its format contract."""


class DimError(BookrecError):
    """Vector lengths disagree."""


class UnknownUser(BookrecError):
    """A ranking was requested for a user absent from the fitted data."""


class ColdStartError(BookrecError):
    """A content-based ranking was requested for a user with no read books."""


class MissingEmbedding(BookrecError):
    """A catalog book has no vector in the embedding store."""

    def __init__(self, message, book_ids=()):
        super().__init__(message)
        self.book_ids = list(book_ids)


class DivergenceError(BookrecError):
    """Latent factors became non-finite during training."""

    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch


class SplitError(BookrecError):
    """A user cannot be split into train/validation/test."""


class EvalError(BookrecError):
    """No users are evaluable for a metric."""


class GridError(BookrecError):
    """Every grid-search cell failed to train."""


class InvariantViolation(BookrecError):
    """An internal consistency check failed; indicates a pipeline bug."""
