"""Nystrom discretization of quasi-periodic layer potentials.

The kernels carry a logarithmic singularity only through the n = 0
lattice image.  Writing

    G(x, y) = J0(k |x - y|) ln|x - y|^2 / (4 pi) + G_smooth(x - y)

and parametrizing the curve by t in [0, 2 pi), each kernel becomes
A(t, s) ln(4 sin^2((t - s)/2)) + B(t, s) with smooth A, B.  The log part is
integrated with the trigonometric product rule (Kress), the rest with the
trapezoid rule.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import AccuracyError, GeometryError, SingularityError
from .geometry import BoundaryCurve
from .quasi_green import (DEFAULT_CONFIG, QuasiMomentum, SummationConfig,
                          check_wood_anomaly, ewald_sum, free_green,
                          free_green_grad, log_constant, low_k_fit,
                          poisson_comb_value, regular_part_at_origin)
from .special_functions import j0_j1

FOUR_PI = 4.0 * np.pi
KINDS = ("single_layer", "np_adjoint", "np_direct")
SOURCE_CLEARANCE = 0.02


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    """Dense Nystrom matrix of a boundary operator acting on node values.

    Attributes
    ----------
    entries : ndarray, shape (N, N)
    curve : BoundaryCurve
    kind : str
        'single_layer', 'np_adjoint', 'np_direct' or a derived label.
    wave_number : complex
    alpha : QuasiMomentum
    """

    entries: np.ndarray
    curve: BoundaryCurve
    kind: str
    wave_number: complex
    alpha: QuasiMomentum

    @property
    def weights(self):
        return self.curve.weights

    def __matmul__(self, other):
        if isinstance(other, OperatorMatrix):
            return self.entries @ other.entries
        return self.entries @ other

    def with_entries(self, entries, kind=None):
        return OperatorMatrix(entries, self.curve, kind or self.kind, self.wave_number, self.alpha)


@lru_cache(maxsize=8)
def kress_log_weights(N):
    """Product-quadrature weights R_ij for integral of ln(4 sin^2((t_i - s)/2)) f(s) ds."""
    n = N // 2
    t = 2 * np.pi * np.arange(N) / N
    diff = t[:, None] - t[None, :]
    m = np.arange(1, n)
    # sum_m cos(m d)/m evaluated on the N distinct differences only
    d = 2 * np.pi * np.arange(N) / N
    row = -(2 * np.pi / n) * (np.cos(np.outer(d, m)) @ (1.0 / m)) - (np.pi / n ** 2) * np.cos(n * d)
    idx = np.rint(diff / (2 * np.pi / N)).astype(int) % N
    out = row[idx]
    out.setflags(write=False)
    return out


@lru_cache(maxsize=12)
def _kernel_tables(alpha, k, curve, cfg):
    """Off-diagonal G and grad G between all node pairs, plus the smooth part at 0."""
    check_wood_anomaly(alpha, k, cfg.truncation_radius)
    N = curve.n
    x = curve.nodes
    r = x[:, None, :] - x[None, :, :]
    off = ~np.eye(N, dtype=bool)
    g = np.zeros((N, N), dtype=complex)
    gr = np.zeros((N, N, 2), dtype=complex)
    vals, grads = ewald_sum(alpha, k, r[off], cfg, derivatives=1)
    g[off] = vals
    gr[off] = grads
    s0, ds0 = regular_part_at_origin(alpha, k, cfg)
    dist = np.hypot(r[..., 0], r[..., 1])
    j0, j1 = j0_j1(complex(k) * dist)
    logs = np.zeros((N, N))
    dt = curve.param[:, None] - curve.param[None, :]
    logs[off] = np.log(4.0 * np.sin(dt[off] / 2.0) ** 2)
    for a in (g, gr, dist, j0, j1, logs):
        a.setflags(write=False)
    return g, gr, dist, j0, j1, logs, s0, ds0


def _tables(alpha, k, curve, cfg):
    cfg = cfg or DEFAULT_CONFIG
    return _kernel_tables(QuasiMomentum.coerce(alpha), complex(k), curve, cfg)


def assemble_single_layer(alpha, k, curve, cfg=None):
    """Nystrom matrix of the single-layer operator S at wave number k.

    Parameters
    ----------
    alpha : QuasiMomentum or pair
    k : complex
    curve : BoundaryCurve
    cfg : SummationConfig, optional

    Returns
    -------
    OperatorMatrix
        ``entries @ phi`` approximates S[phi] at the nodes.
    """
    g, _, _, j0, _, logs, s0, _ = _tables(alpha, k, curve, cfg)
    N = curve.n
    sp = curve.speeds
    m1 = j0 * sp[None, :] / FOUR_PI
    m2 = g * sp[None, :] - m1 * logs
    diag = (s0 + np.log(sp ** 2) / FOUR_PI) * sp
    m2[np.diag_indices(N)] = diag
    ent = kress_log_weights(N) * m1 + (2 * np.pi / N) * m2
    return OperatorMatrix(ent, curve, "single_layer", complex(k), QuasiMomentum.coerce(alpha))


def _double_layer(alpha, k, curve, cfg, adjoint):
    g, gr, dist, _, j1, logs, _, ds0 = _tables(alpha, k, curve, cfg)
    N = curve.n
    sp = curve.speeds
    x = curve.nodes
    r = x[:, None, :] - x[None, :, :]
    if adjoint:
        # nu(x) . grad_x G(x - y)
        nu = np.broadcast_to(curve.normals[:, None, :], r.shape)
        sign = 1.0
    else:
        # d/dnu(y) G(x - y) = -nu(y) . grad G(x - y)
        nu = np.broadcast_to(curve.normals[None, :, :], r.shape)
        sign = -1.0
    off = ~np.eye(N, dtype=bool)
    kern = sign * np.einsum("ijk,ijk->ij", gr, nu) * sp[None, :]
    rdotn = np.einsum("ijk,ijk->ij", r, nu)
    l1 = np.zeros((N, N), dtype=complex)
    kk = complex(k)
    l1[off] = -sign * kk * j1[off] * rdotn[off] / dist[off] / FOUR_PI * sp[None, :].repeat(N, 0)[off]
    m2 = kern - l1 * logs
    curv = -np.sum(curve.d2 * curve.normals, axis=1) / (FOUR_PI * sp ** 2)
    smooth = sign * (curve.normals @ ds0)
    m2[np.diag_indices(N)] = (curv + smooth) * sp
    return kress_log_weights(N) * l1 + (2 * np.pi / N) * m2


def assemble_np_adjoint(alpha, k, curve, cfg=None):
    """Nystrom matrix of the adjoint Neumann-Poincare operator K*.

    The kernel is nu(x) . grad_x G(x, y).  On the diagonal the continuous
    extension is the curvature term -(x'' . nu) / (4 pi |x'|^2) plus the
    normal derivative of the smooth part.
    """
    ent = _double_layer(alpha, k, curve, cfg, adjoint=True)
    return OperatorMatrix(ent, curve, "np_adjoint", complex(k), QuasiMomentum.coerce(alpha))


def assemble_np_direct(alpha, k, curve, cfg=None):
    """Nystrom matrix of the direct double-layer operator K, kernel dG(x, y)/dnu(y)."""
    ent = _double_layer(alpha, k, curve, cfg, adjoint=False)
    return OperatorMatrix(ent, curve, "np_direct", complex(k), QuasiMomentum.coerce(alpha))


def hat_single_layer(alpha, k, curve, cfg=None):
    """Low-frequency leading block S^0 + tau_k * comb * (1 w^T).

    With the default ``poisson_comb='zero'`` this is the k = 0 operator.
    """
    cfg = cfg or DEFAULT_CONFIG
    s0 = assemble_single_layer(alpha, 0.0, curve, cfg)
    comb = poisson_comb_value(alpha, cfg)
    if comb == 0:
        return s0.with_entries(s0.entries.copy(), kind="single_layer_hat")
    ent = s0.entries + log_constant(k) * comb * np.outer(np.ones(curve.n), curve.weights)
    return s0.with_entries(ent, kind="single_layer_hat")


def expansion_blocks(alpha, curve, ks=(0.005, 0.01, 0.02, 0.035, 0.05), cfg=None):
    """Fitted low-frequency blocks of S and K* on {1, k^2 ln k, k^2}.

    Returns
    -------
    dict
        ``{'single_layer': LowFrequencyFit, 'np_adjoint': LowFrequencyFit}``
    """
    s = [(k, assemble_single_layer(alpha, k, curve, cfg)) for k in ks]
    kst = [(k, assemble_np_adjoint(alpha, k, curve, cfg)) for k in ks]
    return {"single_layer": low_k_fit(alpha, s), "np_adjoint": low_k_fit(alpha, kst)}


# ---------------------------------------------------------------------------
# evaluation away from the boundary


def _trig_upsample(values, factor):
    """Trigonometric interpolation of periodic node values onto factor*N nodes."""
    N = values.shape[0]
    if factor == 1:
        return values
    coeffs = np.fft.fft(values)
    M = N * factor
    out = np.zeros(M, dtype=complex)
    half = N // 2
    out[:half] = coeffs[:half]
    out[-half + 1:] = coeffs[-half + 1:]
    # split the Nyquist mode evenly to keep real data real
    out[half] = 0.5 * coeffs[half]
    out[-half] = 0.5 * coeffs[half]
    return np.fft.ifft(out) * factor


def _shift_into_cell(curve, x):
    m = np.round(x - curve.center)
    return x - m, m


def eval_single_layer(alpha, k, curve, phi, x, cfg=None, gradient=False, upsample=1):
    """Evaluate S[phi](x) (and optionally its gradient) away from the curve.

    Parameters
    ----------
    alpha, k, curve
        As for :func:`assemble_single_layer`.
    phi : array_like, shape (N,)
        Density at the nodes.
    x : array_like, shape (2,) or (P, 2)
    gradient : bool
        Also return grad_x S[phi](x), shape (..., 2).
    upsample : int
        The principal (n = 0) image is integrated on ``upsample`` times
        more nodes, using the trigonometric interpolant of ``phi``; the
        other images are smooth and use the original nodes.  The distance
        threshold scales down accordingly.

    Raises
    ------
    AccuracyError
        If some point lies within two (refined) node spacings of the curve.
    """
    cfg = cfg or DEFAULT_CONFIG
    alpha = QuasiMomentum.coerce(alpha)
    phi = np.asarray(phi, dtype=complex)
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    xin, shifts = _shift_into_cell(curve, pts)
    if upsample < 1:
        raise ValueError("upsample must be >= 1")
    limit = 2.0 * curve.node_spacing / upsample
    d = curve.distance(xin, periodic=True)
    if np.any(d < limit):
        raise AccuracyError(
            f"evaluation point within {d.min():.2e} of the boundary (threshold {limit:.2e})")
    check_wood_anomaly(alpha, k, cfg.truncation_radius)
    w = curve.weights
    wphi = w * phi
    r = xin[:, None, :] - curve.nodes[None, :, :]
    P, N = r.shape[:2]
    if upsample == 1:
        out = ewald_sum(alpha, k, r.reshape(-1, 2), cfg, derivatives=1 if gradient else 0)
        val = out[0].reshape(P, N) @ wphi
        grad = np.einsum("pnk,n->pk", out[1].reshape(P, N, 2), wphi) if gradient else None
    else:
        # regular images on the coarse grid
        rr = r.reshape(-1, 2)
        out = ewald_sum(alpha, k, rr, cfg, derivatives=1 if gradient else 0)
        dist = np.hypot(rr[:, 0], rr[:, 1])
        reg = out[0] - free_green(k, dist)
        val = reg.reshape(P, N) @ wphi
        if gradient:
            regg = out[1] - free_green_grad(k, rr)
            grad = np.einsum("pnk,n->pk", regg.reshape(P, N, 2), wphi)
        # principal image on the fine grid
        fine = curve.resample(N * upsample)
        fphi = _trig_upsample(phi, upsample) * fine.weights
        for s in range(0, P, 64):
            rf = xin[s:s + 64, None, :] - fine.nodes[None, :, :]
            df = np.hypot(rf[..., 0], rf[..., 1])
            val[s:s + 64] += free_green(k, df) @ fphi
            if gradient:
                grad[s:s + 64] += np.einsum("pnk,n->pk", free_green_grad(k, rf), fphi)
    phase = np.exp(1j * (shifts @ alpha.vector))
    val = val * phase
    if gradient:
        grad = grad * phase[:, None]
    if single:
        return (val[0], grad[0]) if gradient else val[0]
    return (val, grad) if gradient else val


def eval_double_layer_normal(alpha, k, curve, phi, x, normal, cfg=None):
    """Normal derivative nu . grad S[phi](x) at an off-boundary point."""
    _, g = eval_single_layer(alpha, k, curve, phi, x, cfg=cfg, gradient=True)
    return np.sum(np.asarray(g) * np.asarray(normal), axis=-1)


def _cheb_points(p):
    return np.cos(np.pi * (np.arange(p) + 0.5) / p)


def _regular_interpolant(alpha, k, curve, wphi, cfg, lo, hi, tol=1e-12, max_degree=96):
    """Chebyshev coefficients of x -> sum_j (G - Phi)(x - y_j) wphi_j on a box.

    The n = 0 image is removed, so the function is smooth (Helmholtz) on
    the box; the degree doubles until the trailing coefficients are small.
    """
    # an uneven pad keeps the tensor Chebyshev points off the boundary nodes,
    # which on symmetric curves would otherwise coincide with some of them
    pad = (hi - lo) * np.array([0.0137, 0.0211])
    lo, hi = lo - pad, hi + pad * 1.31
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    p = 16
    while True:
        t = _cheb_points(p)
        X, Y = np.meshgrid(mid[0] + half[0] * t, mid[1] + half[1] * t, indexing="ij")
        pts = np.stack([X.ravel(), Y.ravel()], axis=1)
        r = (pts[:, None, :] - curve.nodes[None, :, :]).reshape(-1, 2)
        g = ewald_sum(alpha, k, r, cfg, derivatives=0)[0] - free_green(k, np.hypot(r[:, 0], r[:, 1]))
        vals = (g.reshape(pts.shape[0], -1) @ wphi).reshape(p, p)
        T = np.polynomial.chebyshev.chebvander(t, p - 1)
        C = np.linalg.solve(T, np.linalg.solve(T, vals).T).T
        top = np.max(np.abs(C))
        tail = max(np.max(np.abs(C[-2:, :])), np.max(np.abs(C[:, -2:])))
        if tail <= tol * max(top, 1e-300):
            return C, mid, half
        if p >= max_degree:
            raise AccuracyError(f"regular part not resolved by degree {p} Chebyshev interpolation "
                                f"(tail {tail / top:.2e})")
        p *= 2


def eval_single_layer_interior(alpha, k, curve, phi, x, cfg=None, gradient=False,
                               max_upsample=4096):
    """S[phi] (and gradient) at many points inside the inclusion.

    The lattice images n != 0 are smooth inside the cell and are taken from
    a tensor Chebyshev interpolant on the bounding box of the curve.  The
    principal image is summed directly, on a trigonometrically refined copy
    of the curve for points close to it.

    Raises
    ------
    AccuracyError
        If a point is too close to the boundary for ``max_upsample`` or the
        interpolant does not converge.
    """
    cfg = cfg or DEFAULT_CONFIG
    alpha = QuasiMomentum.coerce(alpha)
    check_wood_anomaly(alpha, k, cfg.truncation_radius)
    phi = np.asarray(phi, dtype=complex)
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    lo = np.min(curve.nodes, axis=0)
    hi = np.max(curve.nodes, axis=0)
    if np.any(pts < lo - 1e-12) or np.any(pts > hi + 1e-12):
        raise GeometryError("interior evaluation points must lie in the bounding box of the curve")
    wphi = curve.weights * phi
    C, mid, half = _regular_interpolant(alpha, k, curve, wphi, cfg, lo, hi)
    cheb = np.polynomial.chebyshev
    s = (pts - mid) / half
    p = C.shape[0]
    Vx = cheb.chebvander(s[:, 0], p - 1)
    Vy = cheb.chebvander(s[:, 1], p - 1)
    val = np.sum((Vx @ C) * Vy, axis=1)
    if gradient:
        Cx = np.vstack([cheb.chebder(C, axis=0), np.zeros((1, p))])
        Cy = np.hstack([cheb.chebder(C, axis=1), np.zeros((p, 1))])
        grad = np.stack([np.sum((Vx @ Cx) * Vy, axis=1) / half[0],
                         np.sum((Vx @ Cy) * Vy, axis=1) / half[1]], axis=1)
    # principal image, refined per point
    d = curve.distance(pts, periodic=False)
    need = np.maximum(1, np.ceil(3.0 * curve.node_spacing / np.maximum(d, 1e-300)))
    levels = 2 ** np.ceil(np.log2(need)).astype(int)
    if np.any(levels > max_upsample):
        raise AccuracyError(f"point within {d.min():.2e} of the boundary; refinement would exceed {max_upsample}x")
    for lev in np.unique(levels):
        idx = np.nonzero(levels == lev)[0]
        fine = curve.resample(curve.n * int(lev)) if lev > 1 else curve
        fphi = _trig_upsample(phi, int(lev)) * fine.weights
        step = max(1, 2 ** 20 // fine.n)
        for s0 in range(0, idx.size, step):
            sel = idx[s0:s0 + step]
            rf = pts[sel, None, :] - fine.nodes[None, :, :]
            df = np.hypot(rf[..., 0], rf[..., 1])
            val[sel] += free_green(k, df) @ fphi
            if gradient:
                grad[sel] += np.einsum("pnk,n->pk", free_green_grad(k, rf), fphi)
    return (val, grad) if gradient else val


# ---------------------------------------------------------------------------
# dipole source


def dipole_field(alpha, k_m, a, z, x, cfg=None):
    """Dipole field F_z(x) = a . grad_x G(x, z) and its gradient in x.

    Returns
    -------
    value : complex or ndarray
    gradient : ndarray, shape (..., 2)
    """
    cfg = cfg or DEFAULT_CONFIG
    alpha = QuasiMomentum.coerce(alpha)
    a = np.asarray(a, dtype=float)
    x = np.asarray(x, dtype=float)
    r = x - np.asarray(z, dtype=float)
    shape = r.shape[:-1]
    rr = r.reshape(-1, 2)
    if np.any(np.max(np.abs(rr - np.round(rr)), axis=1) < 1e-12):
        raise SingularityError("dipole field evaluated at the source location")
    check_wood_anomaly(alpha, k_m, cfg.truncation_radius)
    _, grad, hess = ewald_sum(alpha, k_m, rr, cfg, derivatives=2)
    val = grad @ a
    dval = hess @ a
    val = val.reshape(shape)
    dval = dval.reshape(shape + (2,))
    return (val[()] if val.ndim == 0 else val), dval


def check_source(curve, z):
    """Validate a dipole location: outside D with 0.02 clearance (modulo lattice)."""
    z = np.asarray(z, dtype=float)
    zin, _ = _shift_into_cell(curve, z[None, :])
    if curve.contains(zin)[0]:
        raise GeometryError(f"source {z.tolist()} lies inside the inclusion")
    d = float(curve.distance(zin)[0])
    if d < SOURCE_CLEARANCE:
        raise GeometryError(f"source {z.tolist()} is {d:.3e} from the boundary (need {SOURCE_CLEARANCE})")


def neumann_data(alpha, omega, materials, curve, a, z, cfg=None):
    """Boundary data f = -(1/mu_m) dF_z/dnu at the nodes, and f1 = f / omega.

    Returns
    -------
    f : ndarray, shape (N,)
    f1 : ndarray, shape (N,)
    """
    check_source(curve, z)
    k_m = materials.k_m(omega)
    _, grad = dipole_field(alpha, k_m, a, z, curve.nodes, cfg)
    dfdn = np.sum(grad * curve.normals, axis=1)
    f = -dfdn / materials.mu_m
    return f, f / omega


def dipole_trace(alpha, omega, materials, curve, a, z, cfg=None):
    """Dirichlet trace F_z on the nodes."""
    check_source(curve, z)
    val, _ = dipole_field(alpha, materials.k_m(omega), a, z, curve.nodes, cfg)
    return val


def inner(u, v, weights):
    """Boundary pairing (u, v) = integral of u conj(v) d sigma."""
    return np.sum(weights * u * np.conj(v))
