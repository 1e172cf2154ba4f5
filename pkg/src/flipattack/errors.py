"""Exception types shared across the package."""


class FlipAttackError(Exception):
    """Base class for errors raised by this package."""


class ValidationError(FlipAttackError, ValueError):
    """Input values violate a precondition (non-finite, out of range, ...)."""


class StructuralError(FlipAttackError, ValueError):
    """Shapes, dimensions or file layouts do not fit together."""


class SurrogateNotCleanError(FlipAttackError):
    """The trained surrogate misclassifies part of its own training set."""

    def __init__(self, accuracy: float, model):
        super().__init__(f"surrogate not clean-perfect: train accuracy {accuracy:.6f} < 1")
        self.accuracy = accuracy
        self.model = model
