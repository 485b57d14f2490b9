"""Quasi-static transmission problem, near field and plasmonic resonance.

Inside the inclusion the field is u = S^{k_c}[phi], outside it is
F_z + S^{k_m}[psi], where F_z is the quasi-periodic dipole field.  The
densities solve

    S^{k_c} phi - S^{k_m} psi                           = F_z
    (1/mu_m)(1/2 + K*_{k_m}) psi - (1/mu_c)(-1/2 + K*_{k_c}) phi = f

on the boundary, with f = -(1/mu_m) dF_z/dnu.  Eliminating phi gives the
reduced equation A(omega) psi = g.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import (AccuracyError, InvertibilityError, NumericalError, PoleError,
                     ValidationError)
from .geometry import interior_grid
from .materials import MaterialParams, quiet_materials
from .potentials import (OperatorMatrix, _shift_into_cell, assemble_np_adjoint,
                         assemble_single_layer, check_source, dipole_field, dipole_trace,
                         eval_single_layer, eval_single_layer_interior, neumann_data)
from .quasi_green import QuasiMomentum

__all__ = [
    "MaterialParams", "quiet_materials", "SourceDipole", "NearFieldSolution", "ResonanceIndexSet",
    "lambda_contrast", "contrast_from_lambda", "tau_static", "assemble_A", "assemble_A0",
    "solve_densities", "near_field", "near_field_energy", "energy_cross_check",
    "resonance_index_set", "resonance_report",
]

QUASI_STATIC_LIMIT = 0.1
MAX_CONDITION = 1e10
DEFAULT_ETA0 = 0.05


@dataclass(frozen=True)
class SourceDipole:
    """Dipole of moment ``a`` located at ``z`` outside the inclusion."""

    a: tuple
    z: tuple

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        z = np.asarray(self.z, dtype=float)
        if a.shape != (2,) or z.shape != (2,):
            raise ValidationError("dipole moment and location must be 2-vectors")
        object.__setattr__(self, "a", tuple(a))
        object.__setattr__(self, "z", tuple(z))


@dataclass(frozen=True, eq=False)
class NearFieldSolution:
    """Densities of the near field and their diagnostics.

    Attributes
    ----------
    phi, psi : ndarray, shape (N,)
        Interior and exterior densities.
    omega : float
    energy : float or None
        ||grad u||_{L^2(D)} when computed.
    residual : float
        Relative residual of the solved linear system.
    condition : float
        Condition number of S^{k_c}.
    path : str
    """

    phi: np.ndarray
    psi: np.ndarray
    omega: float
    alpha: QuasiMomentum
    materials: MaterialParams
    curve: object
    source: SourceDipole
    residual: float
    condition: float
    path: str
    energy: float = None
    resonance: list = field(default_factory=list)


@dataclass(frozen=True)
class ResonanceIndexSet:
    """Indices j >= 1 with |tau_j| below the threshold ``eta0``."""

    indices: frozenset
    eta0: float

    def __contains__(self, j):
        return j in self.indices

    def __len__(self):
        return len(self.indices)


def lambda_contrast(t):
    """lambda(t) = (1 + t) / (2 (1 - t)).

    Raises
    ------
    PoleError
        At t = 1.
    """
    t = complex(t)
    if t == 1:
        raise PoleError("lambda(t) has a pole at t = 1")
    val = (1 + t) / (2 * (1 - t))
    return val.real if val.imag == 0 else val


def contrast_from_lambda(lam):
    """Inverse of :func:`lambda_contrast`: t = (2 lambda - 1) / (2 lambda + 1)."""
    if lam == -0.5:
        raise PoleError("lambda = -1/2 corresponds to t = infinity")
    return (2 * lam - 1) / (2 * lam + 1)


def tau_static(lam, materials):
    """tau_j = (1/mu_m + 1/mu_c)/2 + (1/mu_m - 1/mu_c) lambda_j."""
    im, ic = 1.0 / materials.mu_m, 1.0 / materials.mu_c
    return 0.5 * (im + ic) + (im - ic) * np.asarray(lam)


def _check_omega(omega, allow_large):
    if not omega > 0:
        raise ValidationError("omega must be positive")
    if omega > QUASI_STATIC_LIMIT and not allow_large:
        raise ValidationError(
            f"omega = {omega} exceeds the quasi-static limit {QUASI_STATIC_LIMIT}; pass allow_large_omega")


def _operators(alpha, omega, materials, curve, cfg):
    km, kc = materials.k_m(omega), materials.k_c(omega)
    Sm = assemble_single_layer(alpha, km, curve, cfg).entries
    Sc = assemble_single_layer(alpha, kc, curve, cfg).entries
    Km = assemble_np_adjoint(alpha, km, curve, cfg).entries
    Kc = assemble_np_adjoint(alpha, kc, curve, cfg).entries
    cond = float(np.linalg.cond(Sc))
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise InvertibilityError(f"S at k_c = {kc:.6g} is numerically singular (cond {cond:.3e})")
    return Sm, Sc, Km, Kc, cond


def assemble_A(alpha, omega, materials, curve, cfg=None, allow_large_omega=False):
    """A(omega) = (1/mu_m)(1/2 + K*_{k_m}) + (1/mu_c)(1/2 - K*_{k_c}) S_{k_c}^{-1} S_{k_m}.

    Returns
    -------
    OperatorMatrix
        With ``kind='A'``; the condition number of S_{k_c} is available
        through :func:`solve_densities`.

    Raises
    ------
    InvertibilityError
        If S at k_c has condition number above 1e10.
    """
    _check_omega(omega, allow_large_omega)
    Sm, Sc, Km, Kc, _ = _operators(alpha, omega, materials, curve, cfg)
    I = np.eye(curve.n)
    ent = (0.5 * I + Km) / materials.mu_m + (0.5 * I - Kc) @ np.linalg.solve(Sc, Sm) / materials.mu_c
    return OperatorMatrix(ent, curve, "A", complex(omega), QuasiMomentum.coerce(alpha))


def assemble_A0(alpha, materials, curve, cfg=None, kstar=None):
    """Static limit A_0 = (1/mu_m + 1/mu_c)/2 I + (1/mu_m - 1/mu_c) K*_0."""
    if kstar is None:
        kstar = assemble_np_adjoint(alpha, 0.0, curve, cfg)
    im, ic = 1.0 / materials.mu_m, 1.0 / materials.mu_c
    ent = 0.5 * (im + ic) * np.eye(curve.n) + (im - ic) * kstar.entries
    return OperatorMatrix(ent, curve, "A0", 0j, QuasiMomentum.coerce(alpha))


def solve_densities(alpha, omega, materials, curve, source, cfg=None, path="block",
                    continuity="corrected", allow_large_omega=False):
    """Solve the boundary integral system for (phi, psi).

    Parameters
    ----------
    path : {'block', 'reduced'}
        Direct 2N x 2N solve or the reduced A(omega) equation.
    continuity : {'corrected', 'homogeneous'}
        Right-hand side of the Dirichlet row: the dipole trace F_z, which
        makes the total field continuous, or zero.
    allow_large_omega : bool
        Skip the omega <= 0.1 gate.

    Returns
    -------
    NearFieldSolution
    """
    _check_omega(omega, allow_large_omega)
    if path not in ("block", "reduced"):
        raise ValidationError(f"unknown solve path {path!r}")
    if continuity not in ("corrected", "homogeneous"):
        raise ValidationError(f"unknown continuity option {continuity!r}")
    alpha = QuasiMomentum.coerce(alpha)
    if not isinstance(source, SourceDipole):
        source = SourceDipole(*source)
    check_source(curve, source.z)
    Sm, Sc, Km, Kc, cond = _operators(alpha, omega, materials, curve, cfg)
    f, _ = neumann_data(alpha, omega, materials, curve, source.a, source.z, cfg)
    if continuity == "corrected":
        trace = dipole_trace(alpha, omega, materials, curve, source.a, source.z, cfg)
    else:
        trace = np.zeros(curve.n, dtype=complex)
    N = curve.n
    I = np.eye(N)
    im, ic = 1.0 / materials.mu_m, 1.0 / materials.mu_c
    M = np.block([[Sc, -Sm], [-ic * (-0.5 * I + Kc), im * (0.5 * I + Km)]])
    rhs = np.concatenate([trace, f])
    if path == "block":
        x = np.linalg.solve(M, rhs)
        phi, psi = x[:N], x[N:]
    else:
        ScSm = np.linalg.solve(Sc, Sm)
        Sct = np.linalg.solve(Sc, trace)
        A = im * (0.5 * I + Km) + ic * (0.5 * I - Kc) @ ScSm
        g = f + ic * (-0.5 * I + Kc) @ Sct
        psi = np.linalg.solve(A, g)
        phi = ScSm @ psi + Sct
        x = np.concatenate([phi, psi])
    scale = np.linalg.norm(rhs)
    res = float(np.linalg.norm(M @ x - rhs) / scale) if scale > 0 else 0.0
    return NearFieldSolution(
        phi=phi, psi=psi, omega=float(omega), alpha=alpha, materials=materials, curve=curve,
        source=source, residual=res, condition=cond, path=path)


def _eval_adaptive(alpha, k, curve, density, pts, cfg, gradient, max_upsample=4096):
    """Single-layer evaluation with upsampling chosen per point from its distance."""
    d = curve.distance(pts, periodic=True)
    h = curve.node_spacing
    need = np.maximum(1, np.ceil(3.0 * h / np.maximum(d, 1e-300)))
    levels = 2 ** np.ceil(np.log2(need)).astype(int)
    if np.any(levels > max_upsample):
        raise AccuracyError(f"point within {d.min():.2e} of the boundary; refinement would exceed {max_upsample}x")
    val = np.empty(pts.shape[0], dtype=complex)
    grad = np.empty((pts.shape[0], 2), dtype=complex) if gradient else None
    for lev in np.unique(levels):
        sel = levels == lev
        out = eval_single_layer(alpha, k, curve, density, pts[sel], cfg=cfg, gradient=gradient,
                                upsample=int(lev))
        if gradient:
            val[sel], grad[sel] = out
        else:
            val[sel] = out
    return (val, grad) if gradient else val


def _inside(curve, pts):
    xin, _ = _shift_into_cell(curve, pts)
    return curve.contains(xin)


def near_field(solution, x, cfg=None, gradient=False, refine=1):
    """Total field u at points x, from the interior or exterior representation.

    Parameters
    ----------
    solution : NearFieldSolution
    x : array_like, shape (2,) or (P, 2)
    gradient : bool
        Also return grad u.
    refine : int or 'auto'
        Upsampling factor for the principal image, see :func:`eval_single_layer`;
        'auto' picks it per point from the distance to the boundary.
    """
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    curve = solution.curve
    mat = solution.materials
    inside = _inside(curve, pts)
    val = np.empty(pts.shape[0], dtype=complex)
    grad = np.empty((pts.shape[0], 2), dtype=complex)
    kc, km = mat.k_c(solution.omega), mat.k_m(solution.omega)
    for mask, k, dens in ((inside, kc, solution.phi), (~inside, km, solution.psi)):
        if not mask.any():
            continue
        if refine == "auto":
            v, g = _eval_adaptive(solution.alpha, k, curve, dens, pts[mask], cfg, gradient=True)
        else:
            v, g = eval_single_layer(solution.alpha, k, curve, dens, pts[mask], cfg=cfg,
                                     gradient=True, upsample=refine)
        if k is km:
            fv, fg = dipole_field(solution.alpha, km, solution.source.a, solution.source.z,
                                  pts[mask], cfg)
            v, g = v + fv, g + fg
        val[mask], grad[mask] = v, g
    single = np.asarray(x).ndim == 1
    if single:
        return (val[0], grad[0]) if gradient else val[0]
    return (val, grad) if gradient else val


def _energy_terms(phi, alpha, k_c, curve, cfg, grid, gradient):
    u = eval_single_layer_interior(alpha, k_c, curve, phi, grid.points, cfg=cfg, gradient=gradient)
    if gradient:
        u, g = u
        return grid.cell_area * float(np.sum(np.abs(u) ** 2)), grid.cell_area * float(np.sum(np.abs(g) ** 2))
    return grid.cell_area * float(np.sum(np.abs(u) ** 2)), None


def _boundary_energy(phi, alpha, k_c, curve, cfg, volume):
    S = assemble_single_layer(alpha, k_c, curve, cfg).entries
    K = assemble_np_adjoint(alpha, k_c, curve, cfg).entries
    trace = S @ phi
    flux = -0.5 * phi + K @ phi
    sq = (complex(k_c) ** 2).real * volume + float(np.real(np.sum(curve.weights * trace * np.conj(flux))))
    if sq < -1e-8 * max(abs(sq), volume, 1e-300):
        raise AccuracyError(f"boundary energy formula returned a negative value {sq:.3e}")
    return float(np.sqrt(max(sq, 0.0)))


def near_field_energy(phi, alpha, k_c, curve, cfg=None, spacing=0.005, grid=None):
    """||grad u||_{L^2(D)} for u = S^{k_c}[phi] from the boundary formula.

    ||grad u||^2 = Re(k_c^2) ||u||^2_{L^2(D)} + Re int u conj((-1/2 + K*_{k_c}) phi) dsigma,

    with ||u||^2 integrated on an interior grid.

    Raises
    ------
    AccuracyError
        If the squared norm is below -1e-8 (under-resolution).
    """
    phi = np.asarray(phi, dtype=complex)
    if not np.any(phi):
        return 0.0
    if grid is None:
        grid = interior_grid(curve, spacing)
    vol, _ = _energy_terms(phi, alpha, k_c, curve, cfg, grid, gradient=False)
    return _boundary_energy(phi, alpha, k_c, curve, cfg, vol)


def interior_energy(phi, alpha, k_c, curve, cfg=None, spacing=0.005, grid=None):
    """||grad u||_{L^2(D)} by midpoint quadrature of |grad u|^2 on an interior grid."""
    phi = np.asarray(phi, dtype=complex)
    if not np.any(phi):
        return 0.0
    if grid is None:
        grid = interior_grid(curve, spacing)
    _, gsq = _energy_terms(phi, alpha, k_c, curve, cfg, grid, gradient=True)
    return float(np.sqrt(gsq))


def energy_cross_check(solution, cfg=None, spacing=0.005):
    """Boundary-formula energy, interior-grid energy and their relative discrepancy."""
    phi = np.asarray(solution.phi, dtype=complex)
    if not np.any(phi):
        return 0.0, 0.0, 0.0
    kc = solution.materials.k_c(solution.omega)
    grid = interior_grid(solution.curve, spacing)
    vol, gsq = _energy_terms(phi, solution.alpha, kc, solution.curve, cfg, grid, gradient=True)
    b = _boundary_energy(phi, solution.alpha, kc, solution.curve, cfg, vol)
    i = float(np.sqrt(gsq))
    disc = abs(b - i) / max(b, i) if max(b, i) > 0 else 0.0
    return b, i, disc


def resonance_index_set(decomp, materials, eta0=DEFAULT_ETA0, trusted_only=True):
    """J = {j >= 1 : |tau_j| < eta0}; the 1/2 mode is never included."""
    if not eta0 > 0:
        raise ValidationError("eta0 must be positive")
    lam = decomp.eigenvalues[:decomp.trusted] if trusted_only else decomp.eigenvalues
    tau = np.abs(tau_static(lam, materials))
    J = frozenset(int(j) for j in np.nonzero(tau < eta0)[0] if j != decomp.phi0_index)
    return ResonanceIndexSet(J, float(eta0))


def resonance_report(decomp, materials):
    """Rows (j, lambda_j, |lambda(mu_c/mu_m) - lambda_j|, |tau_j|) over trusted modes."""
    lc = lambda_contrast(materials.mu_c / materials.mu_m)
    lam = decomp.trusted_eigenvalues()
    tau = tau_static(lam, materials)
    return [(int(j), float(l), float(abs(lc - l)), float(abs(t))) for j, (l, t) in enumerate(zip(lam, tau))]


def solve_with_energy(alpha, omega, materials, curve, source, cfg=None, path="block",
                      spacing=0.005, cross_check=True, decomp=None):
    """Solve, then attach the energy (and optionally the grid discrepancy)."""
    sol = solve_densities(alpha, omega, materials, curve, source, cfg=cfg, path=path)
    if cross_check:
        b, i, disc = energy_cross_check(sol, cfg, spacing)
    else:
        kc = materials.k_c(omega)
        b = near_field_energy(sol.phi, sol.alpha, kc, curve, cfg, spacing=spacing)
        i, disc = float("nan"), float("nan")
    rep = resonance_report(decomp, materials) if decomp is not None else []
    out = NearFieldSolution(
        phi=sol.phi, psi=sol.psi, omega=sol.omega, alpha=sol.alpha, materials=materials,
        curve=curve, source=sol.source, residual=sol.residual, condition=sol.condition,
        path=path, energy=b, resonance=rep)
    return out, i, disc
