class ModelError(ValueError):
    """Malformed curve, bundle or point data."""


class PreconditionError(ValueError):
    """A verifier was called on input outside its hypotheses."""


class FatalInvariantError(AssertionError):
    """A theorem-backed identity failed: the model or the engine is wrong."""


class InconclusiveError(RuntimeError):
    """A seeded sampling budget ran out before a witness was found."""
