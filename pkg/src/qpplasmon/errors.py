"""Exception hierarchy shared by all modules.

Each class carries the CLI exit code it maps to.
"""


class QPPlasmonError(Exception):
    """Base class; ``exit_code`` is what the CLI returns."""

    exit_code = 3


class ValidationError(QPPlasmonError):
    """Invalid user input or configuration."""

    exit_code = 2


class DomainError(ValidationError):
    """Argument outside the supported domain of a function."""


class GeometryError(ValidationError):
    """Curve, clearance or grid construction failure."""


class NumericalError(QPPlasmonError):
    """Conditioning, convergence or consistency failure."""

    exit_code = 3


class SingularityError(NumericalError):
    """Evaluation at a kernel singularity (x equal to y modulo the lattice)."""


class WoodAnomalyError(NumericalError):
    """Wave number too close to a Wood anomaly k^2 = |alpha + 2 pi n|^2."""

    def __init__(self, message, n=None):
        super().__init__(message)
        self.n = n


class AccuracyError(NumericalError):
    """Requested evaluation would be silently inaccurate (too close to the boundary)."""


class FitError(NumericalError):
    """Ill-conditioned least-squares fit."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class SpectralError(NumericalError):
    """Eigenvalue identification or self-adjointness failure."""


class PositivityError(SpectralError):
    """Gram matrix not positive definite."""


class DegeneracyError(SpectralError):
    """Eigenvalue gap too small for first-order perturbation theory."""


class InvertibilityError(NumericalError):
    """Layer operator too ill-conditioned to invert."""


class PoleError(NumericalError):
    """Evaluation at a pole of a rational map."""


class InfeasibleDesignError(QPPlasmonError):
    """No admissible Drude parameter reaches the target eigenvalue."""

    exit_code = 4
