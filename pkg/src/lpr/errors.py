"""Exception types shared across the engine."""


class LPRError(Exception):
    """Base class for all engine errors."""


class LieAlgebraError(LPRError, ValueError):
    """Structure constants violate antisymmetry or the Jacobi identity."""


class DimensionError(LPRError, ValueError):
    pass


class MembershipError(LPRError, ValueError):
    """A matrix is not an element of the represented group."""


class AdjointExpansionError(LPRError):
    """Conjugated basis element cannot be expanded in the representation basis."""


class DomainError(LPRError, ValueError):
    """A state lies outside the open set on which a Lagrangian is defined."""


class SingularHessianError(LPRError):
    """A Hessian block needed for a linear solve is singular.

    ``block`` names the failing block ("full" or "fiber") and ``cond`` carries
    the 2-norm condition number estimate.
    """

    def __init__(self, message, block="full", cond=float("inf")):
        super().__init__(message)
        self.block = block
        self.cond = cond


class IntegrationError(LPRError):
    """Numerical failure during time stepping; ``time`` is where it happened."""

    def __init__(self, message, time):
        self.time = float(time)
        super().__init__(f"{message} (t={self.time:.17g})")


class RouthError(LPRError):
    """Routh reduction is not applicable (non-Abelian group, root finding failed)."""


class GridMismatchError(LPRError, ValueError):
    pass


class ConfigError(LPRError, ValueError):
    pass
