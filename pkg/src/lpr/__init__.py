"""Lagrange-Poincare reduction and reconstruction on trivialized principal bundles."""

from .errors import (
    ConfigError,
    DomainError,
    IntegrationError,
    LieAlgebraError,
    LPRError,
    RouthError,
    SingularHessianError,
)
from .dynamics import ReducedState, ReducedTrajectory, energy, integrate_reduced, lp_rhs, momentum, routh_reduce
from .reconstruction import FullState, FullTrajectory, direct_integrate, reconstruct_route
from .scenarios import REGISTRY, get_scenario

__all__ = [
    "ConfigError",
    "DomainError",
    "FullState",
    "FullTrajectory",
    "IntegrationError",
    "LieAlgebraError",
    "LPRError",
    "REGISTRY",
    "ReducedState",
    "ReducedTrajectory",
    "RouthError",
    "SingularHessianError",
    "direct_integrate",
    "energy",
    "get_scenario",
    "integrate_reduced",
    "lp_rhs",
    "momentum",
    "reconstruct_route",
    "routh_reduce",
]

__version__ = "0.1.0"
