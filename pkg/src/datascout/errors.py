"""Exception hierarchy shared across the package.

Every error raised by the public API derives from DatascoutError so callers
can catch one base class; the concrete subclasses mirror the failure modes of
the operations that raise them.
"""


class DatascoutError(Exception):
    """Base class for all datascout errors."""


# manifest ingestion / validation

class ManifestParseError(DatascoutError):
    """A manifest file or line could not be parsed."""


class DimensionMismatchError(DatascoutError):
    """A feature vector or input does not match the declared dimension."""


class DuplicateIdError(DatascoutError):
    """Two items in a manifest share the same id."""


class TooFewItemsError(DatascoutError):
    """An operation needs more items than the dataset provides."""


# gating

class KTooLargeError(DatascoutError):
    """Requested more clusters than clusterable units."""


class MissingLabelsError(DatascoutError):
    """Operation requires labels the dataset does not carry."""


class UnknownItemError(DatascoutError):
    """Item id not covered by the partition."""


# experts

class NonSquareImageError(DatascoutError):
    """Rotation requires a square image."""


class MissingImageError(DatascoutError):
    """Item lacks an image and its features cannot stand in for one."""


class DivergenceError(DatascoutError):
    """Training produced a non-finite loss."""


class SingleClassError(DatascoutError):
    """Task-specific training needs at least two classes."""


class KindMismatchError(DatascoutError):
    """Expert kind incompatible with the requested evaluation."""


class VersionMismatchError(DatascoutError):
    """Serialized blob has an unsupported format version."""


class CorruptBlobError(DatascoutError):
    """Serialized blob is truncated or malformed."""


# selection

class NonFiniteInputError(DatascoutError):
    """Score vector contains NaN or infinity."""


class NonPositiveTemperatureError(DatascoutError):
    """Softmax temperature must be > 0."""


class LengthMismatchError(DatascoutError):
    """Weight vector length does not match the partition."""


class EmptySourceError(DatascoutError):
    """No items available to sample from."""


class InvalidBudgetError(DatascoutError):
    """Budget must be a positive item count."""


# server / registry

class DuplicateNameError(DatascoutError):
    """A different manifest was already registered under this name."""


class UnknownDatasetError(DatascoutError):
    """No record for the referenced dataset id."""


class NotReadyError(DatascoutError):
    """Dataset record has no built index yet."""


class CorruptStoreError(DatascoutError):
    """Persisted registry state failed an integrity check."""


# client

class NetworkError(DatascoutError):
    """Server could not be reached."""
