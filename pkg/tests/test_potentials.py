import numpy as np
import pytest
import scipy.special
from hypothesis import given, settings, strategies as st

from conftest import ALPHA, smooth_density
from qpplasmon.errors import AccuracyError, GeometryError
from qpplasmon.geometry import make_circle
from qpplasmon.materials import quiet_materials
from qpplasmon.potentials import (assemble_np_adjoint, assemble_np_direct, assemble_single_layer,
                                  dipole_field, eval_single_layer, eval_single_layer_interior,
                                  kress_log_weights, neumann_data)
from qpplasmon.quasi_green import green
from qpplasmon.verify import coercivity_margin, jump_residual


def dipole_oracle(alpha, k, a, z, x, reach=12):
    """a . grad_x G and its gradient from explicit H0/H1/H2 forms, image by image."""
    n = np.arange(-reach, reach + 1)
    n1, n2 = (v.ravel() for v in np.meshgrid(n, n, indexing="ij"))
    rho = np.stack([x[0] - z[0] - n1, x[1] - z[1] - n2], axis=1)
    d = np.hypot(rho[:, 0], rho[:, 1])
    u = rho / d[:, None]
    ph = np.exp(1j * (n1 * alpha[0] + n2 * alpha[1]))
    h0, h1, h2 = (scipy.special.hankel1(m, k * d) for m in range(3))
    # grad H0(k rho) = -k H1 u;  hess H0 = -(k^2/2)(H0 I - H2 (2 u u^T - I))
    val = -0.25j * np.sum(ph * (-k * h1) * (u @ a))
    hess = -0.5 * k * k * (h0[:, None, None] * np.eye(2)
                           - h2[:, None, None] * (2 * u[:, :, None] * u[:, None, :] - np.eye(2)))
    grad = -0.25j * np.einsum("n,nij,i->j", ph, hess, a)
    return val, grad


def test_kress_weights_integrate_log_kernel():
    # sum_j R_j(t_0) f(t_j) = int ln(4 sin^2(t/2)) f(t) dt; exact value -2 pi / m for cos(m t)
    N = 32
    R = kress_log_weights(N)
    t = 2 * np.pi * np.arange(N) / N
    for m in (1, 3, 7):
        row = R[0] if np.ndim(R) == 2 else R
        assert abs(row @ np.cos(m * t) + 2 * np.pi / m) < 1e-12


def test_kernel_samples_hermitian_for_real_k(circle64):
    nodes = circle64.nodes
    i, j = np.triu_indices(circle64.n, 1)
    g = green(ALPHA, 1.3, nodes[i], nodes[j])
    gt = green(ALPHA, 1.3, nodes[j], nodes[i])
    assert np.max(np.abs(g - np.conj(gt))) < 1e-9


def test_single_layer_self_convergence():
    c1 = make_circle((0.5, 0.5), 0.2, 128)
    c2 = c1.resample(256)
    phi1, phi2 = smooth_density(c1), smooth_density(c2)
    for k in (0.0, 0.5 + 0.2j):
        u1 = assemble_single_layer(ALPHA, k, c1) @ phi1
        u2 = assemble_single_layer(ALPHA, k, c2) @ phi2
        assert np.max(np.abs(u1 - u2[::2])) < 1e-8


def test_single_layer_field_solves_helmholtz(circle64):
    k = 1.2 + 0.1j
    phi = smooth_density(circle64)
    h = 1e-3
    for x in (np.array([0.5, 0.52]), np.array([0.85, 0.3])):
        pts = np.array([x, x + (h, 0), x - (h, 0), x + (0, h), x - (0, h)])
        u = eval_single_layer(ALPHA, k, circle64, phi, pts)
        lap = (u[1:].sum() - 4 * u[0]) / h ** 2
        assert abs(lap + k * k * u[0]) < 1e-4 * abs(u[0])


def test_jump_relation(ellipse128):
    phi = np.exp(np.cos(ellipse128.param)) * (1 + 0.3j * np.sin(2 * ellipse128.param))
    ext, inn = jump_residual(ALPHA, 1.0, ellipse128, phi, h=1e-4)
    assert ext < 1e-3 and inn < 1e-3


def test_constant_density_identity(circle128, ellipse128):
    for c in (circle128, ellipse128):
        K = assemble_np_direct(ALPHA, 0.0, c).entries
        assert np.max(np.abs(K @ np.ones(c.n) - 0.5)) < 1e-6


def test_direct_and_adjoint_are_weighted_adjoints(ellipse128):
    K = assemble_np_direct(ALPHA, 0.0, ellipse128).entries
    Ks = assemble_np_adjoint(ALPHA, 0.0, ellipse128).entries
    w = ellipse128.weights
    # K^{-alpha} is the weighted adjoint of (K^{-alpha})*
    assert np.max(np.abs(K - (Ks.conj().T * w[None, :]) / w[:, None])) < 1e-12


def test_np_adjoint_low_frequency_continuity(circle64):
    K0 = assemble_np_adjoint(ALPHA, 0.0, circle64).entries
    d = [np.linalg.norm(assemble_np_adjoint(ALPHA, k, circle64).entries - K0, 2) for k in (1e-2, 1e-3, 1e-4)]
    assert d[0] / d[1] > 50 and d[1] / d[2] > 50


def test_coercivity_and_invertibility(circle128):
    hi, lo = coercivity_margin(ALPHA, circle128)
    assert hi < -1e-6
    for k in (0.0, 0.01, 0.01 * np.sqrt(6 + 0j)):
        S = assemble_single_layer(ALPHA, k, circle128).entries
        assert np.linalg.cond(S) < 1e6


def test_eval_single_layer_basic(circle64):
    x = np.array([[0.5, 0.55], [0.9, 0.1]])
    k = 0.7
    assert np.all(eval_single_layer(ALPHA, k, circle64, np.zeros(64), x) == 0)
    p1, p2 = smooth_density(circle64, 1), smooth_density(circle64, 2)
    lhs = eval_single_layer(ALPHA, k, circle64, p1 + p2, x)
    rhs = eval_single_layer(ALPHA, k, circle64, p1, x) + eval_single_layer(ALPHA, k, circle64, p2, x)
    assert np.max(np.abs(lhs - rhs)) < 1e-12 * np.max(np.abs(lhs))


def test_eval_single_layer_bloch(circle64):
    p = smooth_density(circle64)
    x = np.array([0.9, 0.15])
    u0 = eval_single_layer(ALPHA, 0.7, circle64, p, x[None])[0]
    for m in ((1, 0), (0, 1), (-1, 2)):
        u1 = eval_single_layer(ALPHA, 0.7, circle64, p, (x + m)[None])[0]
        assert abs(u1 - np.exp(1j * np.dot(m, ALPHA)) * u0) < 1e-8 * abs(u0)


def test_eval_single_layer_refuses_near_boundary(circle64):
    x = circle64.nodes[:1] + 1e-3 * circle64.normals[:1]
    with pytest.raises(AccuracyError):
        eval_single_layer(ALPHA, 0.7, circle64, smooth_density(circle64), x)


def test_interior_evaluator_matches_direct(circle64):
    p = smooth_density(circle64)
    x = np.array([[0.5, 0.5], [0.42, 0.61], [0.55, 0.38]])
    k = 0.02 * (1 + 1j)
    v, g = eval_single_layer_interior(ALPHA, k, circle64, p, x, gradient=True)
    v0, g0 = eval_single_layer(ALPHA, k, circle64, p, x, gradient=True)
    assert np.max(np.abs(v - v0)) < 1e-10 * np.max(np.abs(v0))
    assert np.max(np.abs(g - g0)) < 1e-10 * np.max(np.abs(g0))


def test_dipole_field_against_hankel_oracle():
    k = 0.5 + 3j
    a, z = np.array([0.7, -0.4]), np.array([0.85, 0.2])
    x = np.array([0.45, 0.55])
    val, grad = dipole_field(ALPHA, k, a, z, x[None])
    ref_val, ref_grad = dipole_oracle(ALPHA, k, a, z, x)
    assert abs(val[0] - ref_val) < 1e-8 * abs(ref_val)
    assert np.max(np.abs(grad[0] - ref_grad)) < 1e-8 * np.max(np.abs(ref_grad))


def test_dipole_field_linear_in_moment():
    z = np.array([0.85, 0.2])
    x = np.array([[0.45, 0.55], [0.3, 0.9]])
    v0, g0 = dipole_field(ALPHA, 0.01, (0.0, 0.0), z, x)
    assert np.all(v0 == 0) and np.all(g0 == 0)
    v1, g1 = dipole_field(ALPHA, 0.01, (1.0, 0.0), z, x)
    v2, g2 = dipole_field(ALPHA, 0.01, (0.0, 1.0), z, x)
    v, g = dipole_field(ALPHA, 0.01, (1.0, 1.0), z, x)
    assert np.max(np.abs(v - v1 - v2)) < 1e-12 * np.max(np.abs(v))
    assert np.max(np.abs(g - g1 - g2)) < 1e-12 * np.max(np.abs(g))


MAT = quiet_materials(1.0, 1.0, -2 + 0.1j, -3 + 0.2j)


def test_neumann_data_zero_moment_and_clearance(circle64):
    f, f1 = neumann_data(ALPHA, 1e-2, MAT, circle64, (0.0, 0.0), (0.85, 0.2))
    assert np.all(f == 0) and np.all(f1 == 0)
    with pytest.raises(GeometryError):
        neumann_data(ALPHA, 1e-2, MAT, circle64, (1.0, 0.0), (0.71, 0.5))
    with pytest.raises(GeometryError):
        neumann_data(ALPHA, 1e-2, MAT, circle64, (1.0, 0.0), (0.5, 0.5))


def test_neumann_data_frequency_scaling(circle64):
    a, z = (1.0, 0.5), (0.85, 0.2)
    gaps = []
    for w in (1e-2, 1e-3):
        fa, f1a = neumann_data(ALPHA, w, MAT, circle64, a, z)
        fb, f1b = neumann_data(ALPHA, 2 * w, MAT, circle64, a, z)
        np.testing.assert_allclose(f1a * w, fa)
        gaps.append(np.max(np.abs(fa - fb)) / np.max(np.abs(fa)))
    # the static dipole dominates; corrections are O(w^2 ln w)
    assert gaps[1] < 1e-4 and gaps[0] / gaps[1] > 50


def test_neumann_data_reflection_equivariance():
    # alpha with equal components: the swap (x, y) -> (y, x) preserves the lattice sum
    al = (1.1, 1.1)
    c = make_circle((0.5, 0.5), 0.2, 64)
    a, z = np.array([1.0, 0.3]), np.array([0.85, 0.2])
    f = neumann_data(al, 1e-2, MAT, c, a, z)[0]
    g = neumann_data(al, 1e-2, MAT, c, a[::-1], z[::-1])[0]
    # node j at angle t maps to angle pi/2 - t, i.e. index N/4 - j
    perm = (16 - np.arange(64)) % 64
    assert np.max(np.abs(g[perm] - f)) < 1e-6 * np.max(np.abs(f))


def test_neumann_data_quarter_turn_equivariance():
    al = (np.pi, np.pi)
    c = make_circle((0.5, 0.5), 0.2, 64)
    a, z = np.array([1.0, 0.3]), np.array([0.85, 0.2])
    rot = np.array([[0.0, -1.0], [1.0, 0.0]])
    f = neumann_data(al, 1e-2, MAT, c, a, z)[0]
    g = neumann_data(al, 1e-2, MAT, c, rot @ a, 0.5 + rot @ (z - 0.5))[0]
    assert np.max(np.abs(np.roll(g, -16) - f)) < 1e-6 * np.max(np.abs(f))


@settings(max_examples=15, deadline=None)
@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(0.0, 2 * np.pi))
def test_single_layer_operator_linear(re, im, phase):
    c = make_circle((0.5, 0.5), 0.2, 32)
    S = assemble_single_layer(ALPHA, 0.3, c)
    p = smooth_density(c)
    s = complex(re, im) * np.exp(1j * phase)
    assert np.max(np.abs(S @ (s * p) - s * (S @ p))) <= 1e-13 * (1 + np.max(np.abs(S @ p)))
