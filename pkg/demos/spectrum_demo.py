"""
Demo: plasmonic eigenvalues of a circular and an elliptic inclusion.

Prints the leading eigenvalues of the static adjoint Neumann-Poincare
operator, the contrast mu_c/mu_m at which each one resonates, and how the
spectrum moves across the Brillouin zone.
"""

import math

import numpy as np

from qpplasmon import decompose, make_circle, make_ellipse
from qpplasmon.resonance import contrast_from_lambda


def show(name, curve, alpha):
    dec = decompose(alpha, curve)
    print(f"\n{name}: N={curve.n}, trusted modes {dec.trusted}")
    print(f"  |lambda_0 - 1/2| = {dec.diagnostics['half_deviation']:.1e}, "
          f"self-adjointness residual {dec.diagnostics['self_adjoint']:.1e}")
    print("   j      lambda_j     resonant mu_c/mu_m")
    for j, lam in enumerate(dec.eigenvalues[:7]):
        t = contrast_from_lambda(lam) if j else float("inf")
        print(f"  {j:2d}  {lam:+.8f}   {t:+.5f}")
    return dec


def main():
    alpha = (math.pi / 2, math.pi / 3)
    show("circle r=0.2", make_circle((0.5, 0.5), 0.2, 128), alpha)
    show("ellipse 0.3 x 0.15", make_ellipse((0.5, 0.5), (0.3, 0.15), 128), alpha)

    # the lattice couples the inclusions, so lambda_1 depends on alpha
    print("\nlambda_1 of the circle along alpha = (s, s):")
    curve = make_circle((0.5, 0.5), 0.2, 64)
    for s in np.linspace(0.2, math.pi, 5):
        dec = decompose((s, s), curve)
        print(f"  s = {s:.3f}  lambda_1 = {dec.eigenvalues[1]:+.6f}")


if __name__ == "__main__":
    main()
