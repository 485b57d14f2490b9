"""
Demo: designing a Drude inclusion that resonates at a chosen frequency.

The localized frequency omega_0 is placed just past the point where the
lossless permeability can reach the resonance, then the filling factor is
solved for.  Detuning F shows the resulting energy amplification.
"""

import math
from dataclasses import replace

from qpplasmon import decompose, make_circle, quiet_materials
from qpplasmon.drude import DrudeParams, design_filling_factor, design_frequency_scale, drude_mu
from qpplasmon.resonance import SourceDipole, near_field_energy, solve_densities


def energy(params, omega, alpha, curve, source):
    resp = drude_mu(params, omega)
    mat = quiet_materials(1.0, 1.0, -2.0 + 0j, resp.mu)
    sol = solve_densities(alpha, omega, mat, curve, source)
    return near_field_energy(sol.phi, alpha, mat.k_c(omega), curve), resp


def main():
    alpha = (math.pi / 2, math.pi / 3)
    curve = make_circle((0.5, 0.5), 0.2, 128)
    source = SourceDipole((1.0, 0.5), (0.85, 0.2))
    omega, tau = 0.01, 2e4
    lam = decompose(alpha, curve).eigenvalues[1]

    omega0 = design_frequency_scale(lam, 1.0, 0.5, omega, margin=1e-3)
    design = design_filling_factor(lam, 1.0, tau, omega, omega0)
    print(f"target lambda_1 = {lam:.6f}, omega_0 = {omega0:.6f}")
    print(f"designed F = {design.value:.9f} after {design.iterations} bisections, "
          f"residual {design.residual:.1e}")

    base = DrudeParams(design.value, tau, omega0)
    print("\n  F             mu_c                      delta        energy")
    for F in (design.value, design.value * 0.99, design.value / 10):
        e, resp = energy(replace(base, F=F), omega, alpha, curve, source)
        print(f"  {F:.6f}  {resp.mu.real:+.5f}{resp.mu.imag:+.5f}j  {resp.delta:+.3e}  {e:9.4f}")


if __name__ == "__main__":
    main()
