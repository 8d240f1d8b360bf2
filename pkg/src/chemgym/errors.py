"""Exception types shared across the package.

Every error raised by library code derives from :class:`ChemGymError`, so
callers (and the CLI) can distinguish data problems from programming bugs.
"""

from __future__ import annotations


class ChemGymError(Exception):
    """Base class for all library errors."""


# ---------------------------------------------------------------------------
# chemistry / string formats


class SmilesSyntaxError(ChemGymError):
    """Malformed SMILES input. Carries the offending position."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class ValenceError(ChemGymError):
    """Chemically impossible atom (valence outside the allowed table)."""


class KekulizationError(ValenceError):
    """Aromatic system that cannot be assigned alternating bonds."""


class UnsupportedFeatureError(ChemGymError):
    """Input uses grammar or chemistry outside the supported subset."""


class SymbolError(ChemGymError):
    """Token outside the molecular-string alphabet."""


class LengthMismatchError(ChemGymError):
    """Fingerprints of different sizes cannot be compared."""


# ---------------------------------------------------------------------------
# tokenizer


class UnbalancedTagError(ChemGymError):
    """Format tags in the input do not nest/balance."""


class UnknownChemicalSymbolError(ChemGymError):
    """Chemical span contains a symbol missing from the inventory."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class UnknownTextSymbolError(ChemGymError):
    """Plain-text segment contains a character missing from the vocabulary."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class UnknownTokenIdError(ChemGymError):
    """Token id is not present in the vocabulary."""


class VocabularyError(ChemGymError):
    """Malformed vocabulary file or inconsistent inventory."""


# ---------------------------------------------------------------------------
# spatial encodings


class PrecisionOverflowError(ChemGymError):
    """Coordinate does not fit the fixed-width text field."""


class CountMismatchError(ChemGymError):
    """Coordinate lines do not match the declared atom count."""


class SpatialFormatError(ChemGymError):
    """Malformed 3D text block."""


# ---------------------------------------------------------------------------
# sampler / registry


class SchemaError(ChemGymError):
    """A JSONL record does not match the task schema."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class EmptyCategoryError(ChemGymError):
    """Registry category has no tasks."""


class EmptyTaskError(ChemGymError):
    """Registry task has no examples."""


# ---------------------------------------------------------------------------
# rewards


class DegenerateRangeError(ChemGymError):
    """Regression task registered with max(answers) <= min(answers)."""


class GroupTooSmallError(ChemGymError):
    """Group-relative advantages need at least two completions."""


# ---------------------------------------------------------------------------
# evaluation


class MissingPlaceholderError(ChemGymError):
    """Prompt template references an entity the record does not provide."""


class AmbiguousLabelTokensError(ChemGymError):
    """Two class labels share the same first token."""


class AllInvalidError(ChemGymError):
    """Every prediction for an example failed to parse."""


class DegenerateInputError(ChemGymError):
    """Metric input is degenerate (single class, constant vector, ...)."""


class ProviderError(ChemGymError):
    """Completion provider failed to produce a response."""


class SuiteConfigError(ChemGymError):
    """Malformed benchmark suite configuration."""


# ---------------------------------------------------------------------------
# numeric ops


class ShapeMismatchError(ChemGymError):
    """Operator input/parameter shapes are inconsistent."""
