"""Plasmonic resonances of periodic inclusions in the quasi-static regime.

Quasi-periodic Green's functions, layer potentials on smooth closed curves,
the spectrum of the static Neumann-Poincare operator, the near-field
transmission problem and Drude-type design of resonant media.
"""

from .errors import (AccuracyError, DegeneracyError, GeometryError, InfeasibleDesignError,
                     PoleError, PositivityError, QPPlasmonError, SpectralError, ValidationError)
from .geometry import make_circle, make_curve, make_ellipse, make_star
from .materials import MaterialParams, quiet_materials
from .quasi_green import SummationConfig, green
from .spectrum import decompose

__all__ = [
    "AccuracyError", "DegeneracyError", "GeometryError", "InfeasibleDesignError", "PoleError",
    "PositivityError", "QPPlasmonError", "SpectralError", "ValidationError",
    "make_circle", "make_curve", "make_ellipse", "make_star",
    "MaterialParams", "quiet_materials", "SummationConfig", "green", "decompose",
]
__version__ = "0.1.0"
