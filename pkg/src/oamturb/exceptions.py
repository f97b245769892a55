"""Exception hierarchy shared by all oamturb modules."""


class OAMTurbError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(OAMTurbError, ValueError):
    """Operands live on different grids or have incompatible shapes."""


class DomainError(OAMTurbError, ValueError):
    """A physical parameter is outside its admissible range."""


class SamplingError(OAMTurbError, ValueError):
    """The grid cannot represent the requested field without aliasing or clipping."""


class ResolutionError(OAMTurbError, ValueError):
    """The Fried parameter is too small to be resolved by the grid pitch."""


class DegenerateEnsembleError(OAMTurbError, ValueError):
    """An ensemble carries no weight inside the qubit subspace."""


class ValidationError(OAMTurbError, ValueError):
    """A matrix violates the invariants of a density matrix."""


class DecayRangeError(OAMTurbError, ValueError):
    """A concurrence curve never crosses the requested level."""
