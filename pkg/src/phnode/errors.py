"""Exception hierarchy."""


class PHNodeError(Exception):
    """Base class for all errors raised by :mod:`phnode`."""


class StructureError(PHNodeError, ValueError):
    """Inconsistent dimensions or violated algebraic preconditions."""


class DensityError(PHNodeError, ValueError):
    """A Hamiltonian density sample is not Hermitian positive definite."""


class IntegrabilityError(DensityError):
    """A cell integral of the density (or its inverse) is not finite."""


class ResolventError(PHNodeError, ArithmeticError):
    """``s I - A`` is singular (``s`` lies in the spectrum of the generator)."""


class StepSizeError(PHNodeError, ArithmeticError):
    """The implicit midpoint step matrix is singular."""


class ModelFileError(PHNodeError, ValueError):
    """A model file could not be parsed or violates the schema."""


class CompatibilityWarning(UserWarning):
    """Initial state and initial input disagree on the boundary."""
