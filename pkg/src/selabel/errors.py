"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Shapes of inputs do not conform to the model contract."""


class SchemaError(ValueError):
    """A CSV file violates the dataset schema."""


class InsufficientDataError(ValueError):
    """Too few (selected) observations for the requested operation."""


class SingularBasisError(ValueError):
    """Sieve Gram matrix is singular and no ridge was requested."""

    def __init__(self, message: str, deficient_dimension: int | None = None):
        super().__init__(message)
        self.deficient_dimension = deficient_dimension


class DivergenceError(RuntimeError):
    """A gradient-descent iterate became non-finite; carries the trace so far."""

    def __init__(self, message: str, trace=None):
        super().__init__(message)
        self.trace = trace if trace is not None else []


class EstimationError(RuntimeError):
    """An estimator could not produce a usable fit."""
