"""Exception types shared across the package."""


class SortadError(Exception):
    """Base class for all library-specific errors."""


class TransformOverflowError(SortadError):
    """A polynomial transformation produced a non-finite value."""

    def __init__(self, message, spec_id=None, feature=None, row=None):
        super().__init__(message)
        self.spec_id = spec_id
        self.feature = feature
        self.row = row


class SelectionError(SortadError):
    """Every candidate transformation in a selection round was unusable."""


class TrainingDivergenceError(SortadError):
    """Classifier training produced a non-finite loss."""

    def __init__(self, message, epoch=None, batch=None):
        super().__init__(message)
        self.epoch = epoch
        self.batch = batch


class ModelFormatError(SortadError):
    """Model file is malformed or truncated."""


class ModelVersionError(SortadError):
    """Model file declares an unsupported format version."""


class ConfigError(SortadError):
    """Invalid run configuration (CLI exit code 2)."""


class DataError(SortadError):
    """Unreadable or invalid dataset (CLI exit code 3)."""
