"""Exception hierarchy.

Every error raised by this package derives from ShiftLabError, so callers can
catch one type at the CLI boundary. Construction errors are raised eagerly:
invalid tables never circulate.
"""


class ShiftLabError(Exception):
    """Base class for all errors raised by shiftlab."""


class NegativeProbability(ShiftLabError):
    """A probability entry is below zero."""


class NotNormalized(ShiftLabError):
    """Total probability mass deviates from 1 beyond tolerance."""


class ShapeMismatch(ShiftLabError):
    """Tensor shape does not match the declared schema or partner object."""


class UnknownVariable(ShiftLabError):
    """A referenced variable name is not part of the schema."""


class VariableCollision(ShiftLabError):
    """A new variable name is already present in the schema."""


class OverlappingVariableSets(ShiftLabError):
    """Variable sets that must be disjoint share a name."""


class ZeroProbabilityEvidence(ShiftLabError):
    """Conditioning event has probability zero."""


class SchemaMismatch(ShiftLabError):
    """Channel and joint disagree on variable names or cardinalities."""


class MissingSelectionVariable(ShiftLabError):
    """The joint carries no selection variable to decompose against."""


class ZeroSupportZ(ShiftLabError):
    """A latent value has zero probability where positive support is required."""


class DegeneratePrior(ShiftLabError):
    """A label prior contains a zero where reweighting needs positive mass."""


class NonFiniteLogits(ShiftLabError):
    """Encoder logits contain NaN or infinity."""


class StateLimitExceeded(ShiftLabError):
    """Total state count of a schema exceeds the configured limit."""
