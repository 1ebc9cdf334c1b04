"""
Exception hierarchy for adversarial data-selection training.

Every error derives from ValueError so code that validates inputs the
plain way (``except ValueError``) keeps catching them.
"""

from typing import Optional


class AdvSelectionError(ValueError):
    """Base class for all package errors."""


class DimensionError(AdvSelectionError):
    """Shape mismatch between a model layer and the data flowing into it."""

    def __init__(self, message: str, layer: Optional[int] = None):
        self.layer = layer
        if layer is not None:
            message = f"layer {layer}: {message}"
        super().__init__(message)


class InputError(AdvSelectionError):
    """Invalid argument value (labels, fractions, ranges, grids)."""


class EmptySelectionError(AdvSelectionError):
    """A parameter update was requested with no selected sample."""


class NonFiniteError(AdvSelectionError):
    """A numerics operation produced NaN or Inf."""


class DataFormatError(AdvSelectionError):
    """A dataset file could not be parsed."""


class IdxMagicError(DataFormatError):
    """IDX header carries an unexpected magic number."""


class IdxTruncatedError(DataFormatError):
    """IDX payload is shorter than its header announces."""


class IdxCountMismatchError(DataFormatError):
    """IDX image and label files disagree on the number of items."""


class MissingColumnError(DataFormatError):
    """CSV file lacks the requested column."""


class NonNumericCellError(DataFormatError):
    """CSV feature column holds a value that is not a number."""


class CheckpointError(AdvSelectionError):
    """Checkpoint container is malformed or of an unsupported version."""


class ConfigError(AdvSelectionError):
    """Run configuration failed validation."""
