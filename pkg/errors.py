"""
Errors Module

This module defines the exception hierarchy shared by every part of the
vulnerability localizer. Library code raises these; only the command line
entry point catches them and turns them into an exit status.

date: 10/18/2026
"""


class VulnLocalizerError(Exception):
    """Base class for every error raised on purpose by this package."""


class ShapeError(VulnLocalizerError, ValueError):
    """Tensor extents do not fit the requested operation."""


class NumericError(VulnLocalizerError, ArithmeticError):
    """A NaN/Inf value appeared, or a value left its allowed domain."""


class SegmentationError(VulnLocalizerError, ValueError):
    """Source text could not be split into statements or tokens."""


class VocabError(VulnLocalizerError, ValueError):
    """BPE vocabulary is malformed or cannot be trained."""


class DatasetError(VulnLocalizerError, ValueError):
    """
    A dataset record is malformed.

    Attributes:
        line_number (int | None): 1-based line of the offending record, if known.
    """

    def __init__(self, message: str, line_number: int | None = None):
        """
        Build the error, prefixing the message with the line number when given.

        Args:
            message (str): What is wrong with the record.
            line_number (int | None): 1-based line of the record.

        Returns:
            None
        """
        self.line_number = line_number
        if line_number is not None:
            message = f'line {line_number}: {message}'
        super().__init__(message)


class ConfigError(VulnLocalizerError, ValueError):
    """A configuration value or file is invalid."""


class CheckpointError(VulnLocalizerError):
    """A checkpoint file cannot be read or does not match the model."""


class MetricError(VulnLocalizerError, ValueError):
    """Metrics were requested over an empty or inconsistent set."""


class TrainingError(VulnLocalizerError):
    """Training cannot start or diverged."""
