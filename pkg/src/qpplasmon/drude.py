"""Drude permeability, its causality check, and resonance design and sweeps.

The inclusion permeability is

    mu_c(omega) = mu_0 (1 - F omega^2 / (omega^2 - omega_0^2 + i omega / tau))

with filling factor F, relaxation parameter tau and resonant frequency
omega_0.  Resonance with the NP eigenvalue lambda_j is the condition
lambda(1 / (sigma mu_m)) = lambda_j with sigma = Re(1/mu_c); it is solved as
sigma = 1 / (mu_m t_j), t_j = (2 lambda_j - 1) / (2 lambda_j + 1), which
has no poles in the design variable.
"""

from dataclasses import dataclass
import math

import numpy as np
import scipy.integrate

from .errors import InfeasibleDesignError, PoleError, ValidationError
from .resonance import (SourceDipole, contrast_from_lambda, energy_cross_check,
                        lambda_contrast, near_field_energy, solve_densities)
from .materials import quiet_materials

TAU_BRACKET = (1e-6, 1e3)
MAX_BISECTIONS = 60
DEFAULT_C1 = 0.1


@dataclass(frozen=True)
class DrudeParams:
    """Drude model parameters.

    Attributes
    ----------
    F : float
        Filling factor in (0, 1).
    tau : float
        Relaxation parameter, > 0.
    omega0 : float
        Localized resonant frequency, > 0.
    mu0 : float
        Background permeability scale, default 1.
    """

    F: float
    tau: float
    omega0: float
    mu0: float = 1.0

    def __post_init__(self):
        if not 0 < self.F < 1:
            raise ValidationError(f"filling factor must lie in (0, 1), got {self.F}")
        if not self.tau > 0:
            raise ValidationError("tau must be positive")
        if not self.omega0 > 0:
            raise ValidationError("omega0 must be positive")
        if not self.mu0 > 0:
            raise ValidationError("mu0 must be positive")


@dataclass(frozen=True)
class DrudeResponse:
    mu: complex
    sigma: float
    delta: float


def _mu(F, tau, omega0, mu0, omega):
    return mu0 * (1.0 - F * omega ** 2 / (omega ** 2 - omega0 ** 2 + 1j * omega / tau))


def drude_mu(params, omega):
    """mu_c(omega) together with sigma = Re(1/mu_c) and delta = Im(1/mu_c)."""
    if not omega > 0:
        raise ValidationError("omega must be positive")
    mu = complex(_mu(params.F, params.tau, params.omega0, params.mu0, omega))
    inv = 1.0 / mu
    return DrudeResponse(mu=mu, sigma=inv.real, delta=inv.imag)


def loss_closed_form(params, omega):
    """Im(mu_c) = mu_0 F omega^3 / tau / ((omega^2 - omega_0^2)^2 + omega^2 / tau^2)."""
    a = omega ** 2 - params.omega0 ** 2
    return params.mu0 * params.F * omega ** 3 / params.tau / (a * a + (omega / params.tau) ** 2)


def delta_closed_form(params, omega):
    """delta = -Im(mu_c) / |mu_c|^2 with Im(mu_c) from :func:`loss_closed_form`."""
    mu = _mu(params.F, params.tau, params.omega0, params.mu0, omega)
    return -loss_closed_form(params, omega) / abs(mu) ** 2


def negativity_condition(params, omega):
    """True iff (1-F)(w^2-w0^2)^2 - F w0^2 (w^2-w0^2) + w^2/tau^2 < 0, i.e. Re(mu_c) < 0."""
    a = omega ** 2 - params.omega0 ** 2
    F = params.F
    return bool((1 - F) * a * a - F * params.omega0 ** 2 * a + (omega / params.tau) ** 2 < 0)


def kramers_kronig_residual(params, omega_probe, band=None, points=10001, form="causal",
                            loss=None):
    """Relative mismatch between Re(mu_c) and the Hilbert transform of Im(mu_c).

    With the odd extension Im mu(-s) = -Im mu(s), causality gives

        Re mu(w) - mu_inf = (1/pi) P.V. int_0^inf Im mu(s) (1/(s - w) + 1/(s + w)) ds,

    where mu_inf = mu_0 (1 - F) is the high-frequency limit.  The integral
    is truncated to ``band`` and evaluated by Simpson's rule after
    subtracting the pole.

    Parameters
    ----------
    params : DrudeParams
    omega_probe : float
    band : (float, float), optional
        Defaults to (1e-3, 50 omega_0).
    points : int
        Number of uniform quadrature nodes (odd for Simpson).
    form : {'causal', 'literal'}
        'literal' subtracts mu_0 and uses the kernel 1/(w - s) instead.
    loss : callable, optional
        Replacement for Im(mu_c) (e.g. a synthetic lossless profile).

    Returns
    -------
    float
        |mismatch| / |Re mu_c(omega_probe) - mu_0|.

    Raises
    ------
    ValidationError
        If the probe is outside the band or sits on a quadrature node.
    """
    if form not in ("causal", "literal"):
        raise ValidationError(f"unknown Kramers-Kronig form {form!r}")
    lo, hi = band if band is not None else (1e-3, 50.0 * params.omega0)
    if not lo < omega_probe < hi:
        raise ValidationError("probe frequency must lie inside the band")
    s = np.linspace(lo, hi, int(points))
    h = s[1] - s[0]
    if np.min(np.abs(s - omega_probe)) < 1e-9 * h:
        raise ValidationError("probe frequency coincides with a quadrature node; the principal value is undefined there")
    im_mu = loss if loss is not None else (
        lambda x: _mu(params.F, params.tau, params.omega0, params.mu0, x).imag)
    f = im_mu(s)
    f0 = float(im_mu(np.array([omega_probe]))[0])
    # P.V. int f/(s - w) = int (f - f0)/(s - w) + f0 ln((hi - w)/(w - lo))
    pv = scipy.integrate.simpson((f - f0) / (s - omega_probe), x=s) + f0 * math.log((hi - omega_probe) / (omega_probe - lo))
    mirror = scipy.integrate.simpson(f / (s + omega_probe), x=s)
    transform = (pv + mirror) / math.pi
    re_mu = _mu(params.F, params.tau, params.omega0, params.mu0, omega_probe).real
    if form == "causal":
        mismatch = re_mu - params.mu0 * (1 - params.F) - transform
    else:
        mismatch = re_mu - params.mu0 + transform
    scale = abs(re_mu - params.mu0)
    return float(abs(mismatch) / scale) if scale > 0 else float(abs(mismatch))


def hilbert_transform_of_loss(params, omega_probe, band=None, points=10001, loss=None):
    """The truncated (1/pi) P.V. transform used by :func:`kramers_kronig_residual`."""
    lo, hi = band if band is not None else (1e-3, 50.0 * params.omega0)
    s = np.linspace(lo, hi, int(points))
    im_mu = loss if loss is not None else (
        lambda x: _mu(params.F, params.tau, params.omega0, params.mu0, x).imag)
    f = im_mu(s)
    f0 = float(im_mu(np.array([omega_probe]))[0])
    pv = scipy.integrate.simpson((f - f0) / (s - omega_probe), x=s) + f0 * math.log((hi - omega_probe) / (omega_probe - lo))
    return (pv + scipy.integrate.simpson(f / (s + omega_probe), x=s)) / math.pi


# ---------------------------------------------------------------------------
# design


def resonance_lambda(mu_c, mu_m):
    """lambda(|mu_c|^2 / (mu_m Re mu_c)), checked against lambda(1/(sigma mu_m))."""
    mu_c = complex(mu_c)
    if mu_c.real == 0:
        raise PoleError("Re(mu_c) = 0: the contrast |mu_c|^2/(mu_m Re mu_c) is infinite")
    t = abs(mu_c) ** 2 / (mu_m * mu_c.real)
    sigma = (1.0 / mu_c).real
    t_alt = 1.0 / (sigma * mu_m)
    if abs(t - t_alt) > 1e-10 * max(1.0, abs(t)):
        raise AssertionError(f"contrast rewrite mismatch: {t} vs {t_alt}")
    return lambda_contrast(t)


def target_sigma(lam_j, mu_m):
    """sigma that puts lambda(1/(sigma mu_m)) on lambda_j."""
    t = contrast_from_lambda(lam_j)
    if t == 0:
        raise InfeasibleDesignError("lambda_j = 1/2 would need an infinite sigma")
    return 1.0 / (mu_m * t)


@dataclass(frozen=True)
class DesignResult:
    value: float
    residual: float
    iterations: int
    parameter: str


def _bisect(fn, a, b, fa, log_scale):
    it = 0
    for it in range(1, MAX_BISECTIONS + 1):
        m = math.sqrt(a * b) if log_scale else 0.5 * (a + b)
        if m in (a, b):
            break
        fm = fn(m)
        if fm == 0:
            return m, it
        if (fm < 0) == (fa < 0):
            a, fa = m, fm
        else:
            b = m
    return (math.sqrt(a * b) if log_scale else 0.5 * (a + b)), it


def _safe(lam_fn, x):
    try:
        return lam_fn(x)
    except PoleError:
        return float("inf")


def _design(fn, grid, log_scale, lam_fn, lam_j, name, hint, loss_fn):
    vals = np.array([fn(x) for x in grid])
    idx = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) <= 0)[0]
    if idx.size == 0:
        lams = [_safe(lam_fn, x) for x in (grid[0], grid[-1])]
        raise InfeasibleDesignError(
            f"no {name} in [{grid[0]:.3g}, {grid[-1]:.3g}] reaches lambda_j = {lam_j:.6g}; "
            f"the bracket ends give lambda = {lams[0]:.6g} and {lams[1]:.6g}")
    if hint is not None:
        idx = idx[[np.argmin([abs(math.log(grid[i] / hint)) for i in idx])]]
    # several roots: keep the least lossy, which is the one that resonates
    best = None
    for i in idx:
        root, it = _bisect(fn, float(grid[i]), float(grid[i + 1]), vals[i], log_scale)
        if best is None or loss_fn(root) < loss_fn(best[0]):
            best = (root, it)
    root, it = best
    return DesignResult(value=root, residual=abs(lam_fn(root) - lam_j), iterations=it, parameter=name)


def design_relaxation_rate(lam_j, mu_m, F, omega, omega0, mu0=1.0, bracket=TAU_BRACKET,
                           scan=241, hint=None):
    """tau such that lambda(|mu_c(tau)|^2 / (mu_m Re mu_c(tau))) = lambda_j.

    Parameters
    ----------
    lam_j : float
        Target NP eigenvalue (trusted, simple).
    mu_m : float
    F, omega, omega0, mu0 : float
        The other Drude parameters and the operating frequency.
    bracket : (float, float)
        Search interval for tau, scanned on a log grid of ``scan`` points
        and refined by bisection (at most 60 halvings).
    hint : float, optional
        Prefer the root closest to this value when several exist; without
        a hint the root with the smallest |delta| is returned.

    Returns
    -------
    DesignResult

    Raises
    ------
    InfeasibleDesignError
        If no sign change of sigma(tau) - sigma_target exists in the bracket.
    """
    sig = target_sigma(lam_j, mu_m)

    def fn(tau):
        return (1.0 / _mu(F, tau, omega0, mu0, omega)).real - sig

    def lam_fn(tau):
        return resonance_lambda(_mu(F, tau, omega0, mu0, omega), mu_m)

    grid = np.geomspace(bracket[0], bracket[1], scan)
    return _design(fn, grid, True, lam_fn, lam_j, "tau", hint,
                   lambda tau: abs((1.0 / _mu(F, tau, omega0, mu0, omega)).imag))


def design_filling_factor(lam_j, mu_m, tau, omega, omega0, mu0=1.0, bracket=(1e-6, 1 - 1e-9),
                          scan=401, hint=None):
    """F in (0, 1) such that the resonance condition holds for the given tau."""
    sig = target_sigma(lam_j, mu_m)

    def fn(F):
        return (1.0 / _mu(F, tau, omega0, mu0, omega)).real - sig

    def lam_fn(F):
        return resonance_lambda(_mu(F, tau, omega0, mu0, omega), mu_m)

    grid = np.geomspace(bracket[0], bracket[1], scan)
    return _design(fn, grid, True, lam_fn, lam_j, "F", hint,
                   lambda F: abs((1.0 / _mu(F, tau, omega0, mu0, omega)).imag))


def design_frequency_scale(lam_j, mu_m, F, omega, mu0=1.0, margin=1.0):
    """omega_0 that makes resonance reachable: sigma at tau -> infinity overshoots the target.

    Returns the omega_0 for which the lossless sigma equals
    ``(1 + margin)`` times the (negative) target.  Along a tau-sweep
    1/mu_c runs on a circle from the lossless sigma (tau -> infinity) to
    1/mu_0, so a small margin puts the resonant tau on the low-loss end,
    where |delta| at resonance scales as sqrt(margin).
    """
    sig = target_sigma(lam_j, mu_m)
    if sig >= 0:
        raise InfeasibleDesignError("resonance needs Re(1/mu_c) < 0, i.e. |lambda_j| < 1/2")
    if not margin > 0:
        raise ValidationError("margin must be positive")
    # lossless: sigma = (1/mu0)(1 + F w^2 / c), c = w^2 (1 - F) - w0^2
    c = F * omega ** 2 / ((1.0 + margin) * mu0 * sig - 1.0)
    return math.sqrt(omega ** 2 * (1 - F) - c)


# ---------------------------------------------------------------------------
# sweeps


@dataclass(frozen=True)
class SweepRow:
    value: float
    tau: float
    F: float
    mu_c: complex
    sigma: float
    delta: float
    energy: float
    discrepancy: float
    included: bool
    note: str


@dataclass(frozen=True)
class SweepResult:
    axis: str
    rows: list
    slope: float = None
    intercept: float = None

    @property
    def fitted(self):
        return self.slope is not None


def loglog_slope(x, y):
    """Least-squares slope and intercept of log y against log x."""
    lx, ly = np.log(np.asarray(x, dtype=float)), np.log(np.asarray(y, dtype=float))
    slope, intercept = np.polyfit(lx, ly, 1)
    return float(slope), float(intercept)


def sweep_blowup(lam_j, background, drude_base, curve, source, alpha, omega, axis, grid,
                 eps_c=-1.0 + 0.0j, c1=DEFAULT_C1, cfg=None, cross_check=False, spacing=0.005,
                 max_discrepancy=0.05, tau_bracket=TAU_BRACKET):
    """Energy along a tau- or F-sweep with the resonance re-pinned at every point.

    Parameters
    ----------
    lam_j : float
        Target NP eigenvalue.
    background : MaterialParams
        Supplies eps_m and mu_m (its inclusion values are ignored).
    drude_base : DrudeParams
        Supplies omega0, mu0 and the starting value of the complementary
        parameter.
    axis : {'tau', 'F'}
        Swept parameter; the other one is re-designed at each point.
    grid : sequence of float
    c1 : float
        Regime guard: rows with omega / |delta| > c1 are excluded from the fit.
    cross_check : bool
        Also compute the interior-grid energy; rows whose discrepancy
        exceeds ``max_discrepancy`` are excluded.
    tau_bracket : (float, float)
        Search interval when tau is re-designed (F-sweeps).

    Returns
    -------
    SweepResult
        The slope of log energy against log value over the included rows,
        or no fit when fewer than three rows are included.
    """
    if axis not in ("tau", "F"):
        raise ValidationError(f"sweep axis must be 'tau' or 'F', got {axis!r}")
    if not isinstance(source, SourceDipole):
        source = SourceDipole(*source)
    rows = []
    prev = drude_base.F if axis == "tau" else drude_base.tau
    for value in grid:
        note = ""
        try:
            if axis == "tau":
                tau = float(value)
                F = design_filling_factor(lam_j, background.mu_m, tau, omega, drude_base.omega0,
                                          drude_base.mu0, hint=prev).value
                prev = F
            else:
                F = float(value)
                tau = design_relaxation_rate(lam_j, background.mu_m, F, omega, drude_base.omega0,
                                             drude_base.mu0, bracket=tau_bracket, hint=prev).value
                prev = tau
        except InfeasibleDesignError as exc:
            rows.append(SweepRow(float(value), float("nan"), float("nan"), complex("nan"), float("nan"),
                                 float("nan"), float("nan"), float("nan"), False, f"design failed: {exc}"))
            continue
        resp = drude_mu(DrudeParams(F=F, tau=tau, omega0=drude_base.omega0, mu0=drude_base.mu0), omega)
        mat = quiet_materials(background.eps_m, background.mu_m, eps_c, resp.mu)
        sol = solve_densities(alpha, omega, mat, curve, source, cfg=cfg)
        if cross_check:
            energy, _, disc = energy_cross_check(sol, cfg, spacing)
        else:
            energy = near_field_energy(sol.phi, alpha, mat.k_c(omega), curve, cfg, spacing=spacing)
            disc = float("nan")
        included = True
        if omega / abs(resp.delta) > c1:
            included, note = False, "outside the quasi-static regime"
        elif cross_check and disc > max_discrepancy:
            included, note = False, "energy cross-check discrepancy too large"
        rows.append(SweepRow(float(value), tau, F, resp.mu, resp.sigma, resp.delta, energy, disc,
                             included, note))
    inc = [r for r in rows if r.included]
    if len(inc) >= 3:
        slope, icpt = loglog_slope([r.value for r in inc], [r.energy for r in inc])
        return SweepResult(axis, rows, slope, icpt)
    return SweepResult(axis, rows)
