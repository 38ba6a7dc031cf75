"""Exception hierarchy shared across the package."""


class DonorGateError(Exception):
    """Base class for all package errors."""


class ConfigError(DonorGateError):
    """Malformed or inconsistent run configuration."""


class UnknownSpecies(DonorGateError):
    """Requested donor species / excited-state combination is not tabulated."""


class DimensionMismatch(DonorGateError):
    """Quantity carries a dimension the unit system does not support."""


class InvalidState(DonorGateError):
    """Density matrix violates hermiticity, trace or positivity tolerances."""


class IntegrationFailure(DonorGateError):
    """Adaptive integrator failed (step size underflow or solver abort)."""


class NonPositiveRabi(DonorGateError):
    """Pulse construction requires a strictly positive Rabi frequency."""


class NoConvergence(DonorGateError):
    """Optimizer exhausted its evaluation budget without converging."""


class MeshTooCoarse(DonorGateError):
    """Eigensolver mesh fails the refinement convergence check."""


class EigensolverFailure(DonorGateError):
    """Sparse eigensolver did not converge."""


class BracketFailure(DonorGateError):
    """Bisection could not bracket a sign change."""


class StateCrossing(DonorGateError):
    """Eigenstate tracking across a parameter sweep lost its target state."""


class NotConverged(DonorGateError):
    """Envelope passed to the multivalley builder is not from a converged solve."""


class GuardViolation(DonorGateError):
    """Donor separation is inside the minimum-distance guard."""


class ZeroSeparation(DonorGateError):
    """Dipole-dipole energy is undefined at zero separation."""


class NearDegeneracy(DonorGateError):
    """Second-order sum hit a denominator below the energy floor."""


class CatalogInsufficient(DonorGateError):
    """Eigenstate catalog lacks states required for a perturbative sum."""
