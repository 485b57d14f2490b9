"""Bessel and Hankel functions of orders 0, 1, 2 for complex argument.

Small arguments use the ascending power series evaluated in extended
precision; large arguments use the Hankel asymptotic expansion with
optimal truncation.
"""

import numpy as np

from .errors import DomainError, SingularityError

EULER_GAMMA = 0.57721566490153286060651209008240243

#: Crossover radius between the ascending series and the asymptotic
#: expansion.  The smallest asymptotic term at |z| = 16 is ~2e-15.
SERIES_RADIUS = 16.0
MAX_ABS_ARG = 50.0

_LD = np.clongdouble
_RLD = np.longdouble
_PI_LD = np.longdouble("3.14159265358979323846264338327950288")
_GAMMA_LD = np.longdouble("0.57721566490153286060651209008240243")

#: In the series disc, J + iY loses about I0(|z|) / |H1(z)| ~ e^(|z| + Im z)
#: relative to long double epsilon.  Past this budget the Macdonald integral
#: is used instead.
SERIES_CANCELLATION_BUDGET = 14.0


def _as_complex(z):
    return np.asarray(z, dtype=complex)


def _check_order(order):
    if order not in (0, 1, 2):
        raise DomainError(f"order must be 0, 1 or 2, got {order!r}")


def _series_terms(zmax):
    # number of terms so the tail (|z|/2)^(2m)/(m!)^2 drops below 1e-20
    m, term = 0, 1.0
    half = max(zmax / 2.0, 1e-300)
    while True:
        m += 1
        term *= half * half / (m * m)
        if term < 1e-20 and m > half:
            return m + 2


def _series_jy(order, z, want_y=True):
    """Ascending series for J_order and Y_order in long double.

    Returns long double complex arrays so that J + iY can be formed
    before rounding.
    """
    zl = z.astype(_LD)
    half = zl / 2
    q = -half * half
    nterms = _series_terms(float(np.max(np.abs(z), initial=0.0)))

    # sum_m (-z^2/4)^m / (m! (m+order)!)  and the digamma-weighted companion
    term = np.ones_like(zl) / _RLD(np.prod(np.arange(1, order + 1)) if order else 1)
    s_j = term.copy()
    # psi(m+1) + psi(m+order+1) = -2 gamma + H_m + H_{m+order}
    h_m = _RLD(0)
    h_mn = _RLD(sum(1.0 / i for i in range(1, order + 1))) if order else _RLD(0)
    s_psi = term * (h_m + h_mn)
    for m in range(1, nterms):
        term = term * q / _RLD(m * (m + order))
        h_m += _RLD(1) / _RLD(m)
        h_mn += _RLD(1) / _RLD(m + order)
        s_j = s_j + term
        s_psi = s_psi + term * (h_m + h_mn)
    powz = half ** order if order else np.ones_like(zl)
    jv = s_j * powz
    if not want_y:
        return jv, None

    pi = _PI_LD
    gam = _GAMMA_LD
    with np.errstate(divide="ignore", invalid="ignore"):
        logpart = (2 / pi) * np.log(half) * jv
        # digamma sum: psi(m+1)+psi(m+order+1) = -2gamma + H_m + H_{m+order}
        digamma = (s_psi - 2 * gam * s_j) * powz
        finite = _RLD(0)
        if order >= 1:
            finite = np.zeros_like(zl)
            for m in range(order):
                fact = _RLD(np.prod(np.arange(1, order - m))) / _RLD(np.prod(np.arange(1, m + 1)))
                finite = finite + fact * half ** (2 * m - order)
        yv = logpart - digamma / pi - finite / pi
    return jv, yv


def _asymptotic_h1(order, z):
    """Hankel asymptotic expansion of H1_order(z), optimal truncation."""
    mu = 4.0 * order * order
    omega = z - (0.5 * order + 0.25) * np.pi
    total = np.ones_like(z)
    term = np.ones_like(z)
    last = np.full(z.shape, np.inf)
    active = np.ones(z.shape, dtype=bool)
    for k in range(1, 60):
        new = term * (mu - (2 * k - 1) ** 2) / (k * 8.0 * z) * 1j
        mag = np.abs(new)
        active &= mag < last
        if not active.any():
            break
        total = np.where(active, total + new, total)
        term = np.where(active, new, term)
        last = np.where(active, mag, last)
        active &= mag > 1e-17 * np.abs(total)
    return np.sqrt(2.0 / (np.pi * z)) * np.exp(1j * omega) * total


def _macdonald_h1(order, z):
    """H1 via K_n(w) = int_0^inf exp(-w cosh t) cosh(n t) dt, w = -iz.

    Used inside the series disc when |z| + Im z is large, where the
    integrand decays doubly exponentially and the trapezoid rule is
    spectrally accurate.
    """
    w = -1j * z
    tmax = np.arccosh(max(60.0 / float(np.min(w.real)), 1.0)) + 0.5
    # resolve the phase oscillation |Im w| sinh t
    nodes = int(np.ceil(tmax * (40.0 + 2.0 * float(np.max(np.abs(w))) * np.sinh(tmax)))) + 1
    t = np.linspace(0.0, tmax, nodes)
    h = t[1] - t[0]
    cosh_t = np.cosh(t)
    weight = np.cosh(order * t) * h
    weight[0] *= 0.5
    weight[-1] *= 0.5
    k = np.empty(w.shape, dtype=complex)
    for start in range(0, w.size, 64):
        chunk = w[start:start + 64]
        k[start:start + 64] = np.exp(-chunk[:, None] * cosh_t[None, :]) @ weight
    # H1_n(z) = (2 / (pi i)) i^(-n) K_n(-iz)
    return 2.0 / (np.pi * 1j) * (1j) ** (-order) * k


def _h1_unchecked(order, z):
    z = _as_complex(z)
    out = np.empty(z.shape, dtype=complex)
    big = np.abs(z) > SERIES_RADIUS
    lossy = ~big & (z.imag >= 2.0) & (np.abs(z) + z.imag > SERIES_CANCELLATION_BUDGET)
    small = ~big & ~lossy
    if small.any():
        jv, yv = _series_jy(order, z[small])
        out[small] = (jv + 1j * yv).astype(complex)
    if lossy.any():
        out[lossy] = _macdonald_h1(order, z[lossy])
    if big.any():
        out[big] = _asymptotic_h1(order, z[big])
    return out


def _j_unchecked(order, z):
    z = _as_complex(z)
    out = np.empty(z.shape, dtype=complex)
    small = np.abs(z) <= SERIES_RADIUS
    if small.any():
        out[small] = _series_jy(order, z[small], want_y=False)[0].astype(complex)
    if (~small).any():
        zb = z[~small]
        # reflect into Re z >= 0, away from the Stokes line of the expansion
        sign = np.where(zb.real < 0, (-1.0) ** order, 1.0)
        zb = np.where(zb.real < 0, -zb, zb)
        # J = (H1(z) + H2(z))/2 with H2(z) = conj(H1(conj z))
        out[~small] = sign * 0.5 * (_asymptotic_h1(order, zb)
                                    + np.conj(_asymptotic_h1(order, np.conj(zb))))
    return out


def bessel_j(order, z):
    """Bessel function of the first kind J_order(z).

    Parameters
    ----------
    order : {0, 1, 2}
    z : complex or array_like of complex
        Argument with ``|z| <= 50``.

    Returns
    -------
    complex or ndarray
    """
    _check_order(order)
    za = _as_complex(z)
    if np.any(np.abs(za) > MAX_ABS_ARG) or not np.all(np.isfinite(za)):
        raise DomainError("bessel_j: |z| must be finite and at most 50")
    out = _j_unchecked(order, za)
    return out[()] if out.ndim == 0 else out


def bessel_y(order, z):
    """Bessel function of the second kind Y_order(z) for ``z != 0``."""
    _check_order(order)
    za = _as_complex(z)
    _check_hankel_arg(za)
    h = _h1_unchecked(order, za)
    j = _j_unchecked(order, za)
    out = (h - j) / 1j
    return out[()] if out.ndim == 0 else out


def _check_hankel_arg(za):
    if not np.all(np.isfinite(za)):
        raise DomainError("hankel1: non-finite argument")
    if np.any(za == 0):
        raise SingularityError("hankel1: z = 0 is a logarithmic/pole singularity")
    if np.any(za.imag < 0):
        raise DomainError("hankel1: Im(z) must be non-negative")
    if np.any(np.abs(za) > MAX_ABS_ARG):
        raise DomainError("hankel1: |z| must be at most 50")


def hankel1(order, z):
    """Hankel function of the first kind H1_order(z) = J + iY.

    Parameters
    ----------
    order : {0, 1, 2}
    z : complex or array_like of complex
        Nonzero, ``Im z >= 0`` and ``|z| <= 50``.

    Returns
    -------
    complex or ndarray

    Raises
    ------
    SingularityError
        If any ``z == 0``.
    DomainError
        If ``Im z < 0`` or ``|z| > 50``.
    """
    _check_order(order)
    za = _as_complex(z)
    _check_hankel_arg(za)
    out = _h1_unchecked(order, za)
    return out[()] if out.ndim == 0 else out


def hankel1_any(order, z):
    """Unchecked H1_order for internal lattice sums that reach ``|z| > 50``."""
    return _h1_unchecked(order, _as_complex(z))


def j0_j1(z):
    """J_0 and J_1 together, used by the kernel splitting in assembly."""
    z = _as_complex(z)
    return _j_unchecked(0, z), _j_unchecked(1, z)
