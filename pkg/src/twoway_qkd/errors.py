"""Exception hierarchy shared by the library and the CLI."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class InfeasibleAllocationError(DomainError):
    """The requested control-mode size leaves no room for encoding-mode rounds."""


class NoPositiveRateError(DomainError):
    """A protocol yields no secret key even on a noiseless channel."""


class NoCrossoverError(DomainError):
    """One protocol dominates the other over the whole search bracket."""


class PhenomenologicalOnlyError(DomainError):
    """The channel model has no microscopic Pauli realisation.

    Raised when a round-level simulation is requested for correlated channels,
    which are only defined through their error statistics.
    """
