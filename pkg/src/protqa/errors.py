"""Shared exception types."""


class ProtqaError(Exception):
    """Base class for all package errors."""


class DimensionError(ProtqaError):
    """Operand shapes violate an operation's contract."""


class NumericError(ProtqaError):
    """An operation produced NaN/Inf, or a numeric contract failed."""


class ContractError(ProtqaError):
    """An API was called outside its documented preconditions."""


class ConfigError(ProtqaError):
    """Inconsistent or invalid configuration."""


class PdbParseError(ProtqaError):
    """Malformed PDB text."""

    def __init__(self, message: str, line_number: int | None = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class EmptyStructureError(ProtqaError):
    """A structure with no usable residues."""


class SchemaError(ProtqaError):
    """A dataset file violates the sample schema."""


class CheckpointError(ProtqaError):
    """Unreadable, truncated or incompatible checkpoint."""


class LengthError(ProtqaError):
    """Sequence does not fit the model's context budget."""


class RankingParseError(ProtqaError):
    """A judge reply is not a usable ranking."""
