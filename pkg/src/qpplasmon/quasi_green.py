"""Quasi-periodic Helmholtz Green's function on the unit square lattice.

The function is

    G(x, y) = -(i/4) sum_n H0(k |x - n - y|) exp(i n . alpha),

which solves (Laplace + k^2) G = sum_n delta(x - y - n) exp(i n . alpha),
behaves like ln|x - y| / (2 pi) near the diagonal and picks up the phase
exp(i m . alpha) under a lattice shift x -> x + m.  Its Fourier series is

    G(r) = sum_m exp(i kappa_m . r) / (k^2 - |kappa_m|^2),  kappa_m = 2 pi m + alpha.

Three evaluation routes are provided: Ewald splitting (default), the
Fourier series with the inner sum done in closed form (``spectral``),
and the direct image sum (``spatial``, only for Im k >= 0.3).
"""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy.special import exp1

from .errors import (DomainError, FitError, SingularityError, ValidationError,
                     WoodAnomalyError)
from .special_functions import EULER_GAMMA, hankel1_any, j0_j1

TWO_PI = 2.0 * np.pi
BACKENDS = ("ewald", "spectral", "spatial")
SPATIAL_MIN_IMAG = 0.3


@dataclass(frozen=True)
class QuasiMomentum:
    """Bloch quasi-momentum alpha, each component in the open interval (0, 2 pi)."""

    a1: float
    a2: float

    def __post_init__(self):
        for name, a in (("a1", self.a1), ("a2", self.a2)):
            if not (np.isfinite(a) and 0.0 < a < TWO_PI):
                raise DomainError(
                    f"quasi-momentum component {name}={a!r} must lie strictly inside (0, 2pi)")

    @property
    def vector(self):
        return np.array([self.a1, self.a2], dtype=float)

    @classmethod
    def coerce(cls, alpha):
        if isinstance(alpha, cls):
            return alpha
        a = np.asarray(alpha, dtype=float).ravel()
        if a.size != 2:
            raise DomainError("quasi-momentum needs two components")
        return cls(float(a[0]), float(a[1]))


@dataclass(frozen=True)
class SummationConfig:
    """How lattice sums are evaluated.

    Attributes
    ----------
    backend : {'ewald', 'spectral', 'spatial'}
    truncation_radius : int
        Lattice shells inspected by the Wood-anomaly detector (and the
        minimum shell count of the spatial sum).
    ewald_split : float
        Splitting parameter E of the Ewald representation.  It is raised
        automatically when |k| > 4 E (see :func:`effective_split`).
    tolerance : float
        Target absolute truncation error of each lattice sum.
    poisson_comb : {'zero', 'truncated'}
        How the distributional comb sum_n exp(i n . alpha) entering the
        low-frequency model is valued.  ``'zero'`` uses Poisson summation
        (the comb vanishes for alpha inside the zone); ``'truncated'``
        keeps the Dirichlet-kernel value over ``truncation_radius`` shells
        as a rank-one correction.
    """

    backend: str = "ewald"
    truncation_radius: int = 4
    ewald_split: float = math.sqrt(math.pi)
    tolerance: float = 1e-13
    poisson_comb: str = "zero"

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ValidationError(f"backend must be one of {BACKENDS}, got {self.backend!r}")
        if not (isinstance(self.truncation_radius, (int, np.integer)) and self.truncation_radius >= 1):
            raise ValidationError("truncation_radius must be an integer >= 1")
        if not self.ewald_split > 0:
            raise ValidationError("ewald_split must be positive")
        if not self.tolerance > 0:
            raise ValidationError("tolerance must be positive")
        if self.poisson_comb not in ("zero", "truncated"):
            raise ValidationError("poisson_comb must be 'zero' or 'truncated'")


DEFAULT_CONFIG = SummationConfig()


def wave_number(omega, eps, mu):
    """k = omega sqrt(eps mu) on the branch with Im k >= 0."""
    k = omega * np.sqrt(complex(eps) * complex(mu))
    if k.imag < 0 or (k.imag == 0 and k.real < 0):
        k = -k
    return complex(k)


# ---------------------------------------------------------------------------
# checks


def check_wood_anomaly(alpha, k, cutoff=4):
    """Raise if k^2 is within 1e-6 (1 + |k|^2) of some |alpha + 2 pi n|^2."""
    av = QuasiMomentum.coerce(alpha).vector
    k2 = complex(k) ** 2
    reach = int(cutoff) + int(np.ceil(abs(complex(k)) / TWO_PI)) + 1
    n = np.arange(-reach, reach + 1)
    n1, n2 = np.meshgrid(n, n, indexing="ij")
    kap2 = (av[0] + TWO_PI * n1) ** 2 + (av[1] + TWO_PI * n2) ** 2
    gap = np.abs(kap2 - k2)
    idx = np.unravel_index(np.argmin(gap), gap.shape)
    if gap[idx] < 1e-6 * (1.0 + abs(k2)):
        bad = (int(n1[idx]), int(n2[idx]))
        raise WoodAnomalyError(
            f"k={complex(k)} is at a Wood anomaly: |k^2 - |alpha + 2 pi n|^2| = {gap[idx]:.3e} "
            f"for n={bad}", n=bad)


def _wrap(r):
    return r - np.round(r)


def _check_offset(r):
    d = np.abs(_wrap(r))
    if np.any(np.max(d, axis=-1) < 1e-12):
        raise SingularityError("x coincides with y modulo the lattice")


# ---------------------------------------------------------------------------
# Ewald route


def _expn_orders(nmax, x):
    """[E_0(x), ..., E_nmax(x)] from one exp1 call and the upward recurrence.

    E_{n+1} = (e^{-x} - x E_n) / n loses relative accuracy only where x > n,
    and there the functions are below e^{-x}, so the absolute error stays at
    roundoff.
    """
    e = np.exp(-x)
    out = [e / x, exp1(x)]
    for n in range(1, nmax):
        out.append((e - x * out[-1]) / n)
    return out[:nmax + 1]


def _q_terms(w, tol):
    """Number of Taylor terms in exp(k^2 t) needed for the spatial sum."""
    aw = abs(w)
    q, term = 0, 1.0
    while True:
        q += 1
        term *= aw / q
        if term / q < tol * 1e-3 and q > aw:
            return q + 1


def _spectral_modes(alpha_vec, k2, E, tol):
    reach2 = max(k2.real, 0.0) + 4.0 * E * E * (np.log(1.0 / tol) + 7.0)
    mmax = int(np.ceil(np.sqrt(reach2) / TWO_PI)) + 1
    m = np.arange(-mmax, mmax + 1)
    m1, m2 = np.meshgrid(m, m, indexing="ij")
    kap = np.stack([alpha_vec[0] + TWO_PI * m1.ravel(), alpha_vec[1] + TWO_PI * m2.ravel()], axis=1)
    kap2 = np.sum(kap * kap, axis=1)
    keep = kap2 <= reach2 + TWO_PI ** 2
    return kap[keep], kap2[keep]


def _image_shifts(r, E, w, tol):
    """Lattice images whose Gaussian-screened contribution is not negligible."""
    xmax = np.log(1.0 / tol) + abs(w) + 5.0
    rmax = np.sqrt(xmax) / E
    lo = np.floor(r.min(axis=0) - rmax).astype(int)
    hi = np.ceil(r.max(axis=0) + rmax).astype(int)
    shifts = []
    for n1 in range(lo[0], hi[0] + 1):
        for n2 in range(lo[1], hi[1] + 1):
            shifts.append((n1, n2))
    return np.array(shifts, dtype=float), rmax


#: Largest |k^2 / 4E^2| for the Taylor expansion of exp(k^2 t) in the
#: screened image sum; beyond it the alternating terms cancel digits.
MAX_EWALD_W = 4.0


def effective_split(cfg, k):
    """The configured split E, raised so that |k|^2 / (4 E^2) <= MAX_EWALD_W."""
    return max(float(cfg.ewald_split), abs(complex(k)) / (2.0 * math.sqrt(MAX_EWALD_W)))


def ewald_sum(alpha, k, r, cfg=DEFAULT_CONFIG, derivatives=1, skip_origin=False):
    """Ewald evaluation of G, its gradient and optionally its Hessian.

    Parameters
    ----------
    alpha : QuasiMomentum or pair
    k : complex
    r : ndarray, shape (M, 2)
        Offsets x - y.  No check for lattice points is made here.
    cfg : SummationConfig
    derivatives : {0, 1, 2}
    skip_origin : bool
        Drop the n = 0 image of the screened spatial sum (used for the
        regular part at r = 0).

    Returns
    -------
    list
        ``[G]``, ``[G, grad]`` or ``[G, grad, hess]`` with shapes (M,),
        (M, 2) and (M, 2, 2).
    """
    av = QuasiMomentum.coerce(alpha).vector
    r = np.asarray(r, dtype=float).reshape(-1, 2)
    k = complex(k)
    k2 = k * k
    E = effective_split(cfg, k)
    tol = float(cfg.tolerance)
    w = k2 / (4.0 * E * E)
    M = r.shape[0]
    g = np.zeros(M, dtype=complex)
    grad = np.zeros((M, 2), dtype=complex) if derivatives >= 1 else None
    hess = np.zeros((M, 2, 2), dtype=complex) if derivatives >= 2 else None

    # Fourier part: sum_m exp(i kappa.r) exp((k^2-|kappa|^2)/4E^2)/(k^2-|kappa|^2)
    kap, kap2 = _spectral_modes(av, k2, E, tol)
    coef = np.exp((k2 - kap2) / (4.0 * E * E)) / (k2 - kap2)
    step = max(1, 400000 // max(len(kap2), 1))
    for s in range(0, M, step):
        ph = np.exp(1j * (r[s:s + step] @ kap.T))
        g[s:s + step] += ph @ coef
        if derivatives >= 1:
            grad[s:s + step] += ph @ (1j * kap * coef[:, None])
        if derivatives >= 2:
            outer = -(kap[:, :, None] * kap[:, None, :]) * coef[:, None, None]
            hess[s:s + step] += np.tensordot(ph, outer, axes=(1, 0))

    # screened images: -(1/4pi) sum_n e^{i n.alpha} sum_q w^q/q! E_{q+1}(E^2 |r-n|^2)
    nq = _q_terms(w, tol)
    cq = np.array([w ** q / math.factorial(q) for q in range(nq + 1)], dtype=complex)
    shifts, rmax = _image_shifts(r, E, w, tol)
    xcut = (rmax * E) ** 2
    for n in shifts:
        if skip_origin and n[0] == 0 and n[1] == 0:
            continue
        rho = r - n
        R2 = np.sum(rho * rho, axis=1)
        sel = R2 * E * E < xcut
        if not sel.any():
            continue
        x = E * E * R2[sel]
        phase = np.exp(1j * (n @ av))
        rs = rho[sel]
        en = _expn_orders(nq + 1, x)
        val = sum(cq[q] * en[q + 1] for q in range(nq + 1))
        g[sel] += -phase / (4.0 * np.pi) * val
        if derivatives >= 1:
            d1 = sum(cq[q] * en[q] for q in range(nq + 1))
            grad[sel] += (phase * E * E / TWO_PI) * d1[:, None] * rs
        if derivatives >= 2:
            # E_{q-1} with E_{-1}(x) := e^{-x}(x+1)/x^2 = -E_0'(x)
            em1 = np.exp(-x) * (x + 1.0) / (x * x)
            d2 = cq[0] * em1 + sum(cq[q] * en[q - 1] for q in range(1, nq + 1))
            eye = np.eye(2)[None, :, :]
            hess[sel] += (phase * E * E / TWO_PI) * (
                d1[:, None, None] * eye
                - 2.0 * E * E * d2[:, None, None] * rs[:, :, None] * rs[:, None, :])
    out = [g]
    if derivatives >= 1:
        out.append(grad)
    if derivatives >= 2:
        out.append(hess)
    return out


def _series_s(w):
    # S(w) = sum_{q>=1} w^q / (q q!)
    total, term, q = 0j, 1.0 + 0j, 0
    while True:
        q += 1
        term *= w / q
        inc = term / q
        total += inc
        if abs(inc) < 1e-18 * max(1.0, abs(total)) and q > abs(w):
            return total


def regular_part_at_origin(alpha, k, cfg=DEFAULT_CONFIG):
    """Value and gradient at r = 0 of G(r) - J0(k|r|) ln|r|^2 / (4 pi).

    Returns
    -------
    value : complex
    gradient : ndarray, shape (2,)
    """
    k = complex(k)
    E = effective_split(cfg, k)
    w = k * k / (4.0 * E * E)
    zero = np.zeros((1, 2))
    rest, rest_grad = ewald_sum(alpha, k, zero, cfg, derivatives=1, skip_origin=True)
    value = (2.0 * np.log(E) + EULER_GAMMA - _series_s(w)) / (4.0 * np.pi) + rest[0]
    return complex(value), rest_grad[0]


# ---------------------------------------------------------------------------
# spectral route (Fourier sum over one index, closed form over the other)


def _sqrt_upper(z):
    q = np.sqrt(z)
    return np.where(q.imag < 0, -q, q)


def _spectral_sum(av, k, r, tol, derivatives):
    k = complex(k)
    g = np.zeros(r.shape[0], dtype=complex)
    grad = np.zeros((r.shape[0], 2), dtype=complex)
    for i, ri in enumerate(r):
        # put the summed-in-closed-form direction on the axis farther from the lattice
        d = np.abs(_wrap(ri))
        swap = d[1] < d[0]
        perm = [1, 0] if swap else [0, 1]
        rr = ri[perm]
        aa = av[perm]
        shift = np.floor(rr[1])
        s = rr[1] - shift
        dist = min(s, 1.0 - s)
        if dist < 1e-9:
            raise SingularityError("spectral sum needs a nonzero offset")
        mmax = int(np.ceil((np.log(1.0 / tol) + 8.0) / (TWO_PI * dist))) + int(abs(k) / TWO_PI) + 2
        if mmax > 200000:
            raise DomainError("spectral sum would need more than 2e5 terms")
        m = np.arange(-mmax, mmax + 1)
        kap1 = aa[0] + TWO_PI * m
        q = _sqrt_upper(k * k - kap1 * kap1 + 0j)
        ea = np.exp(1j * aa[1])
        den_a = 1.0 - np.exp(1j * q) / ea
        den_b = 1.0 - np.exp(1j * q) * ea
        a_coef = np.exp(1j * q * s) / den_a
        b_coef = ea * np.exp(1j * q * (1.0 - s)) / den_b
        inner = (a_coef + b_coef) / (2j * q)
        dinner = (a_coef - b_coef) / 2.0
        ph = np.exp(1j * kap1 * rr[0]) * np.exp(1j * aa[1] * shift)
        val = np.sum(ph * inner)
        gv = np.array([np.sum(1j * kap1 * ph * inner), np.sum(ph * dinner)])
        g[i] = val
        grad[i] = gv[perm]
    return [g, grad] if derivatives >= 1 else [g]


# ---------------------------------------------------------------------------
# spatial route (absolutely convergent for Im k > 0)


def _spatial_radius(k, tol):
    b = k.imag
    R = 10.0
    for _ in range(60):
        tail = np.pi * np.sqrt(2.0 / (np.pi * abs(k))) * np.sqrt(R) * np.exp(-b * R) / b
        if tail < tol:
            return R
        R *= 1.15
    return R


def _spatial_sum(av, k, r, tol, derivatives, min_shells):
    k = complex(k)
    if k.imag < SPATIAL_MIN_IMAG:
        raise DomainError(f"spatial backend requires Im k >= {SPATIAL_MIN_IMAG}")
    R = max(_spatial_radius(k, tol), float(min_shells))
    nmax = int(np.ceil(R)) + 1
    n = np.arange(-nmax, nmax + 1)
    n1, n2 = np.meshgrid(n, n, indexing="ij")
    ns = np.stack([n1.ravel(), n2.ravel()], axis=1).astype(float)
    ns = ns[np.hypot(ns[:, 0], ns[:, 1]) <= R + 1.5]
    phase = np.exp(1j * (ns @ av))
    g = np.zeros(r.shape[0], dtype=complex)
    grad = np.zeros((r.shape[0], 2), dtype=complex)
    for i, ri in enumerate(r):
        rho = ri - ns
        dist = np.hypot(rho[:, 0], rho[:, 1])
        z = k * dist
        g[i] = -0.25j * np.sum(hankel1_any(0, z) * phase)
        if derivatives >= 1:
            h1 = hankel1_any(1, z)
            grad[i] = 0.25j * k * np.sum((h1 * phase / dist)[:, None] * rho, axis=0)
    return [g, grad] if derivatives >= 1 else [g]


# ---------------------------------------------------------------------------
# public evaluation


def _lattice(alpha, k, x, y, cfg, derivatives):
    cfg = cfg or DEFAULT_CONFIG
    alpha = QuasiMomentum.coerce(alpha)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r = np.broadcast_to(x - y, np.broadcast_shapes(x.shape, y.shape))
    shape = r.shape[:-1]
    r = r.reshape(-1, 2)
    _check_offset(r)
    check_wood_anomaly(alpha, k, cfg.truncation_radius)
    if cfg.backend == "ewald":
        out = ewald_sum(alpha, k, r, cfg, derivatives=derivatives)
    elif cfg.backend == "spectral":
        out = _spectral_sum(alpha.vector, k, r, cfg.tolerance, derivatives)
    else:
        out = _spatial_sum(alpha.vector, k, r, cfg.tolerance, derivatives, cfg.truncation_radius)
    g = out[0].reshape(shape)
    if derivatives == 0:
        return g[()] if g.ndim == 0 else g
    gr = out[1].reshape(shape + (2,))
    return g, gr


def green(alpha, k, x, y, cfg=None):
    """Quasi-periodic Green's function G(x, y).

    Parameters
    ----------
    alpha : QuasiMomentum or pair of floats
    k : complex
        Wave number with Im k >= 0, away from Wood anomalies.
    x, y : array_like, shape (..., 2)
        Points; broadcast against each other.
    cfg : SummationConfig, optional

    Returns
    -------
    complex or ndarray

    Raises
    ------
    WoodAnomalyError
        If k^2 is too close to |alpha + 2 pi n|^2 for some n.
    SingularityError
        If x - y is a lattice vector.

    Examples
    --------
    >>> from qpplasmon.quasi_green import green
    >>> g = green((1.0, 2.0), 0.5, (0.3, 0.1), (0.0, 0.0))
    """
    return _lattice(alpha, k, x, y, cfg, 0)


def grad_green(alpha, k, x, y, cfg=None):
    """Gradient of G with respect to x, shape (..., 2)."""
    return _lattice(alpha, k, x, y, cfg, 1)[1]


def green_laplace(alpha, x, y, cfg=None):
    """Quasi-periodic Laplace Green's function (k = 0).

    No zero Fourier mode exists because alpha is never a lattice vector
    of the dual lattice, so the Fourier series is well defined.
    """
    cfg = cfg or DEFAULT_CONFIG
    if cfg.backend == "spatial":
        raise DomainError("the spatial sum diverges at k = 0")
    return _lattice(alpha, 0.0, x, y, cfg, 0)


def hessian_green(alpha, k, x, y, cfg=None):
    """Hessian of G with respect to x (Ewald route), shape (..., 2, 2)."""
    cfg = cfg or DEFAULT_CONFIG
    alpha = QuasiMomentum.coerce(alpha)
    r = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    shape = r.shape[:-1]
    r = r.reshape(-1, 2)
    _check_offset(r)
    check_wood_anomaly(alpha, k, cfg.truncation_radius)
    h = ewald_sum(alpha, k, r, cfg, derivatives=2)[2]
    return h.reshape(shape + (2, 2))


def free_green(k, dist):
    """Free-space kernel -(i/4) H0(k d), or ln(d)/(2 pi) when k = 0."""
    dist = np.asarray(dist, dtype=float)
    if complex(k) == 0:
        return np.log(dist) / TWO_PI + 0j
    return -0.25j * hankel1_any(0, complex(k) * dist)


def free_green_grad(k, rho):
    """Gradient of the free-space kernel at offsets rho, shape (..., 2)."""
    rho = np.asarray(rho, dtype=float)
    dist = np.hypot(rho[..., 0], rho[..., 1])
    if complex(k) == 0:
        return (rho / (TWO_PI * dist[..., None] ** 2)) + 0j
    k = complex(k)
    return (0.25j * k * hankel1_any(1, k * dist) / dist)[..., None] * rho


def poisson_comb_value(alpha, cfg=DEFAULT_CONFIG):
    """Value assigned to the comb sum_n exp(i n . alpha) by the config."""
    if cfg.poisson_comb == "zero":
        return 0.0 + 0j
    av = QuasiMomentum.coerce(alpha).vector
    n = np.arange(-cfg.truncation_radius, cfg.truncation_radius + 1)
    return complex(np.sum(np.exp(1j * n * av[0])) * np.sum(np.exp(1j * n * av[1])))


def log_constant(k):
    """tau_k = (ln k + gamma - ln 2) / (2 pi) - i/4, the constant of the small-k expansion."""
    return (np.log(complex(k)) + EULER_GAMMA - np.log(2.0)) / TWO_PI - 0.25j


# ---------------------------------------------------------------------------
# low-frequency fitting


@dataclass
class LowFrequencyFit:
    """Least-squares blocks of X(k) ~ B_const + k^2 ln k B_klogk + k^2 B_k2.

    Attributes
    ----------
    const, klogk, k2 : ndarray
        Fitted coefficient blocks, same shape as the samples.
    residual : float
        Largest absolute fit residual over entries and samples.
    scale : float
        Largest |coefficient * basis| over blocks and samples.
    condition : float
        Condition number of the column-scaled design matrix.
    """

    const: np.ndarray
    klogk: np.ndarray
    k2: np.ndarray
    residual: float
    scale: float
    condition: float
    ks: np.ndarray = field(repr=False, default=None)

    @property
    def relative_residual(self):
        return self.residual / self.scale if self.scale > 0 else 0.0

    def evaluate(self, k):
        return self.const + k * k * np.log(k) * self.klogk + k * k * self.k2


def low_k_fit(alpha, kernel_samples, max_condition=1e12):
    """Fit samples X(k) on the basis {1, k^2 ln k, k^2}.

    Parameters
    ----------
    alpha : QuasiMomentum or pair
        Kept for provenance; the fit itself is entrywise.
    kernel_samples : list of (k, array_like)
        At least four real positive k, spanning a decade, all <= 0.05.
        The arrays may be OperatorMatrix instances (their ``entries`` are
        used), matrices or scalars.
    max_condition : float

    Returns
    -------
    LowFrequencyFit
    """
    QuasiMomentum.coerce(alpha)
    if len(kernel_samples) < 4:
        raise ValidationError("low_k_fit needs at least 4 samples")
    ks = np.array([float(np.real(s[0])) for s in kernel_samples])
    if np.any(ks <= 0):
        raise ValidationError("low_k_fit needs positive real sample wave numbers")
    if ks.max() > 0.05 + 1e-15:
        raise ValidationError("low_k_fit samples must satisfy k <= 0.05")
    if ks.max() / ks.min() < 10.0 * (1 - 1e-12):
        raise ValidationError("low_k_fit samples must span at least a decade")
    data = [np.asarray(getattr(s[1], "entries", s[1]), dtype=complex) for s in kernel_samples]
    shape = data[0].shape
    Y = np.stack([d.ravel() for d in data], axis=0)
    basis = np.stack([np.ones_like(ks), ks ** 2 * np.log(ks), ks ** 2], axis=1)
    colscale = np.max(np.abs(basis), axis=0)
    B = basis / colscale
    cond = np.linalg.cond(B)
    if not np.isfinite(cond) or cond > max_condition:
        raise FitError(f"low-frequency basis is ill-conditioned (cond={cond:.3e})", condition=cond)
    coef, *_ = np.linalg.lstsq(B, Y, rcond=None)
    coef = coef / colscale[:, None]
    resid = Y - basis @ coef
    contrib = np.abs(coef)[:, None, :] * np.abs(basis).T[:, :, None]
    return LowFrequencyFit(
        const=coef[0].reshape(shape), klogk=coef[1].reshape(shape), k2=coef[2].reshape(shape),
        residual=float(np.max(np.abs(resid))), scale=float(np.max(contrib)),
        condition=float(cond), ks=ks)
