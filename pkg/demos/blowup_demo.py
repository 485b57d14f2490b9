"""
Demo: near-field energy blow-up as the loss of the inclusion vanishes.

Re(1/mu_c) is pinned to the value that resonates with the first plasmonic
mode and |Im(1/mu_c)| is reduced; the energy grows like 1/|delta|.  The same
sweep with Re(1/mu_c) detuned stays bounded.
"""

import math

import numpy as np

from qpplasmon import decompose, make_circle, quiet_materials
from qpplasmon.drude import loglog_slope
from qpplasmon.resonance import SourceDipole, contrast_from_lambda, energy_cross_check, solve_densities


def sweep(alpha, curve, source, omega, sigma, deltas):
    rows = []
    for d in deltas:
        mat = quiet_materials(1.0, 1.0, -2.0 + 0j, 1.0 / complex(sigma, -d))
        sol = solve_densities(alpha, omega, mat, curve, source)
        energy, _, disc = energy_cross_check(sol)
        rows.append((d, energy, disc))
    return rows


def main():
    alpha = (math.pi / 2, math.pi / 3)
    curve = make_circle((0.5, 0.5), 0.2, 128)
    source = SourceDipole((1.0, 0.5), (0.85, 0.2))
    omega = 1e-4
    lam = decompose(alpha, curve).eigenvalues[1]
    sigma = 1.0 / contrast_from_lambda(lam)
    deltas = np.geomspace(1e-1, 1e-3, 5)

    print(f"mode 1: lambda = {lam:.6f}, resonant sigma = {sigma:.6f}")
    for label, s in (("on resonance", sigma), ("detuned by 0.5", sigma + 0.5)):
        rows = sweep(alpha, curve, source, omega, s, deltas)
        print(f"\n{label}")
        print("     |delta|      energy   grid discrepancy")
        for d, e, disc in rows:
            print(f"  {d:.3e}  {e:10.4f}   {disc:.1e}")
        slope, _ = loglog_slope([r[0] for r in rows], [r[1] for r in rows])
        print(f"  log-log slope {slope:+.3f}")


if __name__ == "__main__":
    main()
