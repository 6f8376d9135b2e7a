"""Exception types shared across the package.

The CLI maps these onto its exit-code contract: ConfigError -> 2,
NumericError -> 3, verification failures -> 1.
"""


class DimensionError(ValueError):
    """Operand shapes are incompatible for the requested operation."""


class GraphParseError(ValueError):
    """Malformed CoNLL-U input; message carries the offending line number."""


class CoverageError(ValueError):
    """A subword map does not cover every token of a graph."""


class NumericError(RuntimeError):
    """A non-finite value surfaced during training or verification."""


class ConfigError(ValueError):
    """An experiment configuration failed validation."""
