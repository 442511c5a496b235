"""Exception hierarchy shared across the toolkit."""


class TubekitError(Exception):
    """Base class for every library-specific failure."""


class ParameterError(TubekitError, ValueError):
    """A hyperparameter or argument is outside its documented range."""


class OutOfRangeError(TubekitError, ValueError):
    """A query timestamp falls outside the valid domain."""


class DegenerateTubeError(TubekitError, ValueError):
    """A tube is too short for the requested operation (needs >= 2 frames)."""


class UnderdeterminedFitError(TubekitError, ValueError):
    """Fewer observations than polynomial coefficients."""


class IllConditionedFitError(TubekitError, ArithmeticError):
    """The fitting system is numerically singular (condition number guard)."""


class CardinalityError(TubekitError, ValueError):
    """Not enough items for the requested grouping (e.g. boxes < clusters)."""


class ValidationError(TubekitError, ValueError):
    """Input data violates a documented invariant."""


class SchemaError(ValidationError):
    """A serialized file does not conform to the JSON schema."""


class SynthesisError(TubekitError, RuntimeError):
    """Synthetic generation could not produce feasible geometry."""
