import math

import numpy as np
import pytest
import scipy.special
from hypothesis import given, settings, strategies as st

from qpplasmon.errors import DomainError, FitError, SingularityError, ValidationError, WoodAnomalyError
from qpplasmon.potentials import assemble_single_layer
from qpplasmon.quasi_green import (QuasiMomentum, SummationConfig, free_green, grad_green, green,
                                   green_laplace, low_k_fit, poisson_comb_value, wave_number)

ALPHA = (math.pi / 2, math.pi / 3)
EWALD = SummationConfig(backend="ewald")
SPECTRAL = SummationConfig(backend="spectral")
SPATIAL = SummationConfig(backend="spatial")


def image_sum_oracle(alpha, k, r, reach=70):
    """-(i/4) sum_n H0(k |r - n|) e^{i n . alpha} with scipy's Hankel function."""
    n = np.arange(-reach, reach + 1)
    n1, n2 = np.meshgrid(n, n, indexing="ij")
    d = np.hypot(r[0] - n1, r[1] - n2)
    return -0.25j * np.sum(scipy.special.hankel1(0, k * d) * np.exp(1j * (n1 * alpha[0] + n2 * alpha[1])))


def grid_points():
    t = np.linspace(0.1, 0.9, 5)
    X, Y = np.meshgrid(t, t, indexing="ij")
    return np.stack([X.ravel(), Y.ravel()], axis=1)


def test_quasi_momentum_domain():
    with pytest.raises(DomainError):
        QuasiMomentum(0.0, 1.0)
    with pytest.raises(DomainError):
        QuasiMomentum(1.0, 2 * math.pi)
    assert QuasiMomentum.coerce(ALPHA).vector[1] == pytest.approx(math.pi / 3)


def test_config_validation():
    with pytest.raises(ValidationError):
        SummationConfig(backend="fmm")
    with pytest.raises(ValidationError):
        SummationConfig(tolerance=0)
    with pytest.raises(ValidationError):
        SummationConfig(truncation_radius=0)


def test_wave_number_branch():
    assert wave_number(0.1, -2 + 0.1j, -3 + 0.2j).imag >= 0
    assert wave_number(0.1, 1, 1) == pytest.approx(0.1)


@pytest.mark.parametrize("lattice_step", [(1, 0), (0, 1), (1, 1)])
@pytest.mark.parametrize("k", [0.2 + 0.5j, 1.0, 3.0 + 0.1j])
def test_quasi_periodicity(lattice_step, k):
    x, y = np.array([0.3, 0.4]), np.array([0.55, 0.6])
    m = np.array(lattice_step)
    g0 = green(ALPHA, k, x, y)
    g1 = green(ALPHA, k, x + m, y)
    assert abs(g1 - np.exp(1j * m @ np.array(ALPHA)) * g0) < 1e-10 * abs(g0)


def test_backends_against_image_sum_oracle():
    k = 0.2 + 0.5j
    r = np.array([0.3, 0.1])
    ref = image_sum_oracle(ALPHA, k, r)
    for cfg in (EWALD, SPECTRAL, SPATIAL):
        assert abs(green(ALPHA, k, r, (0.0, 0.0), cfg) - ref) < 1e-8


@pytest.mark.parametrize("alpha,k", [(ALPHA, 0.2 + 0.5j), ((1.0, 2.5), 2.0 + 0.4j), ((0.3, 5.9), 0.7 + 1.0j)])
def test_backend_triangle_on_grid(alpha, k):
    pts = grid_points()
    y = np.array([0.47, 0.52])
    e = green(alpha, k, pts, y, EWALD)
    s = green(alpha, k, pts, y, SPECTRAL)
    p = green(alpha, k, pts, y, SPATIAL)
    assert np.max(np.abs(e - s)) < 1e-8
    assert np.max(np.abs(e - p)) < 1e-8


def test_real_k_backends_agree():
    pts = grid_points()
    y = np.array([0.47, 0.52])
    e = green(ALPHA, 1.5, pts, y, EWALD)
    s = green(ALPHA, 1.5, pts, y, SPECTRAL)
    assert np.max(np.abs(e - s)) < 1e-8


def test_principal_image_dominates_for_strong_damping():
    x, y = np.array([0.5, 0.5]), np.array([0.45, 0.55])
    d = np.hypot(*(x - y))
    # at Im k = 8 the nearest images still contribute ~e^{-8 * 0.93}; the
    # deviation from the single term is exactly their sum
    k = 0.1 + 8j
    single = -0.25j * scipy.special.hankel1(0, k * d)
    g = green(ALPHA, k, x, y)
    assert abs(g - single) < 1e-3 * abs(single)
    assert abs(g - image_sum_oracle(ALPHA, k, x - y, reach=4)) < 1e-14 * abs(single)
    k = 0.1 + 20j
    single = -0.25j * scipy.special.hankel1(0, k * d)
    assert abs(green(ALPHA, k, x, y) - single) < 1e-6 * abs(single)


def test_ewald_large_wave_number():
    r = np.array([0.05, -0.05])
    for k in (0.1 + 20j, 15 + 3j):
        ref = image_sum_oracle(ALPHA, k, r, reach=8)
        assert abs(green(ALPHA, k, r, (0.0, 0.0), EWALD) - ref) < 1e-9 * abs(ref)


def test_wood_anomaly_detected():
    k = float(np.hypot(*ALPHA))
    with pytest.raises(WoodAnomalyError) as exc:
        green(ALPHA, k, (0.3, 0.2), (0.0, 0.0))
    assert exc.value.n == (0, 0)
    k1 = float(np.hypot(ALPHA[0] - 2 * np.pi, ALPHA[1]))
    with pytest.raises(WoodAnomalyError) as exc:
        green(ALPHA, k1, (0.3, 0.2), (0.0, 0.0))
    assert exc.value.n == (-1, 0)


def test_singularity_on_lattice_offset():
    with pytest.raises(SingularityError):
        green(ALPHA, 1.0, (0.3, 0.2), (1.3, 0.2))


@settings(max_examples=25, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(0.05, 0.95), st.floats(0.1, 3.0), st.floats(0.0, 1.0))
def test_gradient_matches_central_differences(x1, x2, kr, ki):
    x = np.array([x1, x2])
    y = np.array([0.5, 0.5])
    if np.min(np.abs(x - y)) < 0.05:
        return
    k = complex(kr, ki)
    h = 1e-6
    g = grad_green(ALPHA, k, x, y)
    fd = np.array([(green(ALPHA, k, x + h * e, y) - green(ALPHA, k, x - h * e, y)) / (2 * h) for e in np.eye(2)])
    assert np.max(np.abs(g - fd)) < 1e-6 * np.max(np.abs(g))
    fdy = np.array([(green(ALPHA, k, x, y + h * e) - green(ALPHA, k, x, y - h * e)) / (2 * h) for e in np.eye(2)])
    assert np.max(np.abs(g + fdy)) < 1e-6 * np.max(np.abs(g))


def test_zero_dipole_gradient_combination():
    g = grad_green(ALPHA, 1.0, (0.2, 0.3), (0.6, 0.6))
    assert np.all(np.array([0.0, 0.0]) @ g == 0)


def test_laplace_quasi_periodicity_and_hermitian_symmetry():
    x, y = np.array([0.2, 0.7]), np.array([0.6, 0.35])
    g = green_laplace(ALPHA, x, y)
    assert abs(green_laplace(ALPHA, x + (1, 0), y) - np.exp(1j * ALPHA[0]) * g) < 1e-10 * abs(g)
    assert abs(green_laplace(ALPHA, x, y) - np.conj(green_laplace(ALPHA, y, x))) < 1e-10
    with pytest.raises(DomainError):
        green_laplace(ALPHA, x, y, SPATIAL)


def test_helmholtz_to_laplace_limit():
    x, y = np.array([0.2, 0.7]), np.array([0.6, 0.35])
    g0 = green_laplace(ALPHA, x, y)
    errs = [abs(green(ALPHA, k, x, y) - g0) for k in (1e-2, 1e-3, 1e-4)]
    # at least the O(k^2 ln k) rate, i.e. more than 50x per decade
    assert errs[0] / errs[1] > 50 and errs[1] / errs[2] > 50
    assert errs[2] < 1e-7


def test_poisson_comb_switch():
    assert poisson_comb_value(ALPHA) == 0
    trunc = poisson_comb_value(ALPHA, SummationConfig(poisson_comb="truncated", truncation_radius=2))
    n = np.arange(-2, 3)
    assert trunc == pytest.approx(np.sum(np.exp(1j * n * ALPHA[0])) * np.sum(np.exp(1j * n * ALPHA[1])))


KS = (0.005, 0.01, 0.02, 0.035, 0.05)


def test_low_k_fit_free_kernel_log_coefficient():
    # free-space kernel -(i/4) H0(k r): k^2 ln k coefficient is b1 r^2 with b1 = -1/(8 pi)
    r = 0.37
    # remove the ln k / (2 pi) term, which is outside the fitted basis
    samples = [(k, np.array([free_green(k, r) - np.log(k) / (2 * np.pi)])) for k in KS]
    fit = low_k_fit(ALPHA, samples)
    # k^4 ln k terms outside the basis leave ~1e-4 relative error
    assert fit.klogk[0] == pytest.approx(-r * r / (8 * np.pi), rel=1e-3)
    assert fit.relative_residual < 1e-3


def test_low_k_fit_lattice_kernel_has_no_log_term():
    # the spectral form is analytic in k^2, so the lattice sum of the
    # b1 |x - y - n|^2 terms vanishes (Poisson summation); the fitted
    # k^2 ln k coefficient is only the k^4 remainder and shrinks with k_max^2
    x, y = np.array([0.3, 0.4]), np.array([0.6, 0.5])
    coarse = low_k_fit(ALPHA, [(k, np.array([green(ALPHA, k, x, y)])) for k in KS])
    fine = low_k_fit(ALPHA, [(k / 10, np.array([green(ALPHA, k / 10, x, y)])) for k in KS])
    assert abs(coarse.klogk[0]) < 1e-2 * abs(coarse.k2[0])
    assert abs(fine.klogk[0]) < 2e-2 * abs(coarse.klogk[0])
    assert abs(fine.k2[0] - coarse.k2[0]) < 1e-2 * abs(coarse.k2[0])
    assert abs(coarse.const[0] - green_laplace(ALPHA, x, y)) < 1e-7


def test_low_k_fit_constant_block_matches_static_assembly(circle64):
    samples = [(k, assemble_single_layer(ALPHA, k, circle64)) for k in KS]
    fit = low_k_fit(ALPHA, samples)
    S0 = assemble_single_layer(ALPHA, 0.0, circle64).entries
    assert np.max(np.abs(fit.const - S0)) < 1e-8 * np.max(np.abs(S0))
    assert fit.relative_residual < 1e-3


def test_low_k_fit_pure_constant_input():
    M = np.arange(6.0).reshape(2, 3) + 1j
    fit = low_k_fit(ALPHA, [(k, M) for k in KS])
    assert np.max(np.abs(fit.klogk)) < 1e-9 and np.max(np.abs(fit.k2)) < 1e-6
    assert np.allclose(fit.const, M)


def test_low_k_fit_preconditions():
    with pytest.raises(ValidationError):
        low_k_fit(ALPHA, [(k, 1.0) for k in KS[:3]])
    with pytest.raises(ValidationError):
        low_k_fit(ALPHA, [(k, 1.0) for k in (0.02, 0.03, 0.04, 0.05)])
    with pytest.raises(ValidationError):
        low_k_fit(ALPHA, [(k, 1.0) for k in (0.01, 0.05, 0.1, 0.2)])
    with pytest.raises(FitError):
        low_k_fit(ALPHA, [(k, 1.0) for k in KS], max_condition=1.0)
