"""Material parameters of the background and the inclusion."""

from dataclasses import dataclass
import warnings

import numpy as np

from .errors import ValidationError
from .quasi_green import wave_number


@dataclass(frozen=True)
class MaterialParams:
    """Permittivities and permeabilities of background (m) and inclusion (c).

    ``eps_m`` and ``mu_m`` must be real positive.  The inclusion values are
    complex; lossy double-negative particles have negative real parts and
    positive imaginary parts, anything else is accepted but flagged
    through :attr:`physical`.
    """

    eps_m: float
    mu_m: float
    eps_c: complex
    mu_c: complex

    def __post_init__(self):
        if not (np.isreal(self.eps_m) and float(self.eps_m) > 0):
            raise ValidationError("eps_m must be real and positive")
        if not (np.isreal(self.mu_m) and float(self.mu_m) > 0):
            raise ValidationError("mu_m must be real and positive")
        object.__setattr__(self, "eps_m", float(self.eps_m))
        object.__setattr__(self, "mu_m", float(self.mu_m))
        object.__setattr__(self, "eps_c", complex(self.eps_c))
        object.__setattr__(self, "mu_c", complex(self.mu_c))
        if abs(self.mu_c / self.mu_m + 1.0) < 1e-14:
            raise ValidationError("mu_c / mu_m = -1 is excluded (the contrast map has a zero there)")
        if not self.physical:
            warnings.warn("inclusion parameters are not lossy double-negative; treated as exploratory",
                          stacklevel=2)

    @property
    def physical(self):
        return (self.eps_c.real < 0 and self.eps_c.imag > 0
                and self.mu_c.real < 0 and self.mu_c.imag > 0)

    def k_m(self, omega):
        return wave_number(omega, self.eps_m, self.mu_m)

    def k_c(self, omega):
        return wave_number(omega, self.eps_c, self.mu_c)

    @property
    def sigma(self):
        """Re(1 / mu_c)."""
        return (1.0 / self.mu_c).real

    @property
    def delta(self):
        """Im(1 / mu_c)."""
        return (1.0 / self.mu_c).imag

    def with_mu_c(self, mu_c):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return MaterialParams(self.eps_m, self.mu_m, self.eps_c, mu_c)


def quiet_materials(eps_m, mu_m, eps_c, mu_c):
    """MaterialParams without the exploratory-values warning."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return MaterialParams(eps_m, mu_m, eps_c, mu_c)
