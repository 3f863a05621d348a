"""Exception types shared across the toolkit."""


class ParameterError(ValueError):
    """An argument is outside the domain of the requested operation."""


class NumericalError(RuntimeError):
    """A numerical procedure failed to produce a trustworthy value."""


class IntegratorError(NumericalError):
    """Time integration became unstable."""
