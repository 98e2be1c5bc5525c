"""Exception taxonomy shared across the package."""


class SolwaveError(Exception):
    """Base class for all package errors."""


class GridError(SolwaveError):
    """Grid construction or grid-compatibility failure."""


class ResolutionError(SolwaveError):
    """Grid too coarse (aliasing) or box too small for the charge support."""


class DomainError(SolwaveError):
    """Parameter outside the admissible domain, e.g. |v| >= 1."""


class SingularSourceError(SolwaveError):
    """Charge density fails the neutrality needed for removable k=0 limits."""


class DegeneracyError(SolwaveError):
    """Frame Gram matrix numerically singular."""


class BasinError(SolwaveError):
    """Newton projection failed to converge inside the manifold basin."""


class AccuracyError(SolwaveError):
    """Quadrature failed its refinement self-check."""


class PoleError(SolwaveError):
    """Resolvent denominator 1 - nu*r(omega) vanished unexpectedly."""


class BlowupError(SolwaveError):
    """Integrator hit the velocity cap or energy-drift guard."""
