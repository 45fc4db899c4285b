class InputError(ValueError):
    """Bad arguments: dimension or grid mismatch, index out of range, bad precondition."""


class HypothesisError(ValueError):
    """A hypothesis of the blow-up theorem is violated (e.g. alpha <= 2)."""


class EstimationUnavailable(RuntimeError):
    """The blow-up tail fit cannot be performed on the supplied samples."""


class NumericalAbort(RuntimeError):
    """Non-finite values appeared during a computation."""


class PreparationError(RuntimeError):
    """Certified blow-up data could not be constructed."""
