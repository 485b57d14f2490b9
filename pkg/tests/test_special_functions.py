import cmath

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qpplasmon.errors import DomainError, SingularityError
from qpplasmon.special_functions import EULER_GAMMA, bessel_j, bessel_y, hankel1

mpmath.mp.dps = 40


def series_j(order, z, terms=60):
    """Power-series oracle in 40-digit arithmetic."""
    z = mpmath.mpc(z)
    return complex(mpmath.fsum((-1) ** m * (z / 2) ** (2 * m + order)
                               / (mpmath.factorial(m) * mpmath.factorial(m + order))
                               for m in range(terms)))


def mp_h1(order, z):
    return complex(mpmath.hankel1(order, mpmath.mpc(z)))


arguments = st.builds(complex, st.floats(-20, 20), st.floats(0, 20)).filter(lambda z: 1e-4 <= abs(z) <= 20)


def test_series_constant_terms():
    assert bessel_j(0, 0) == 1
    assert bessel_j(1, 0) == 0
    assert bessel_j(2, 0) == 0


def test_j0_at_one_matches_series_oracle():
    assert bessel_j(0, 1.0) == pytest.approx(0.765197686557967, abs=1e-15)
    assert abs(bessel_j(0, 1.0) - series_j(0, 1.0)) < 1e-15


@pytest.mark.parametrize("order", [0, 1, 2])
@pytest.mark.parametrize("z", [0.3, 2.5 + 1j, 7.0 + 0.2j, -4.0 + 3j, 11.9 + 0.5j, 15.0, 18.0 + 2j])
def test_bessel_j_relative_accuracy(order, z):
    ref = complex(mpmath.besselj(order, mpmath.mpc(z)))
    assert abs(bessel_j(order, z) - ref) <= 1e-12 * abs(ref)


@pytest.mark.parametrize("order", [0, 1, 2])
@pytest.mark.parametrize("z", [1e-3, 0.05 + 0.01j, 1.3, 3 + 4j, 12.0, 12.5 + 0.1j, 25.0 + 1j, 49.0])
def test_hankel_matches_mpmath(order, z):
    ref = mp_h1(order, z)
    assert abs(hankel1(order, z) - ref) <= 1e-11 * abs(ref)


def test_recurrence_at_07():
    z = 0.7
    res = hankel1(2, z) - (2 / z) * hankel1(1, z) + hankel1(0, z)
    assert abs(res) < 1e-12


def test_wronskian_at_13():
    z = 1.3
    w = bessel_j(0, z) * bessel_y(1, z) - bessel_j(1, z) * bessel_y(0, z)
    assert abs(w + 2 / (np.pi * z)) < 1e-12


def test_small_argument_remainder_scales_like_z2_log_z():
    def remainder(z):
        lead = 1 + (2j / np.pi) * (cmath.log(z / 2) + EULER_GAMMA)
        return abs(hankel1(0, z) - lead)

    def next_term(z):
        # -(z^2/4) [1 + (2i/pi)(ln(z/2) + gamma - 1)]: z^2 ln z up to a z^2 correction
        return abs(z * z / 4 * (1 + (2j / np.pi) * (cmath.log(z / 2) + EULER_GAMMA - 1)))

    for z in (1e-2, 1e-3):
        assert remainder(z) == pytest.approx(next_term(z), rel=1e-3)
        assert 0.05 < remainder(z) / (z * z * abs(np.log(z))) < 0.5
    # and against the oracle, the remainder itself is right
    lead = 1 + (2j / np.pi) * (cmath.log(5e-3) + EULER_GAMMA)
    assert abs((hankel1(0, 1e-2) - lead) - (mp_h1(0, 1e-2) - lead)) < 1e-14


@settings(max_examples=60, deadline=None)
@given(arguments)
def test_recurrence_property(z):
    h0, h1, h2 = hankel1(0, z), hankel1(1, z), hankel1(2, z)
    assert abs(h2 - (2 / z) * h1 + h0) < 1e-10 * abs(h1)


@settings(max_examples=40, deadline=None)
@given(st.floats(1e-3, 20), st.sampled_from([0, 1, 2]))
def test_real_argument_gives_real_j(x, order):
    assert abs(complex(bessel_j(order, x)).imag) < 1e-14


@settings(max_examples=40, deadline=None)
@given(arguments)
def test_derivative_identity(z):
    h = 1e-6
    d = (hankel1(0, z + h) - hankel1(0, z - h)) / (2 * h)
    ref = -hankel1(1, z)
    assert abs(d - ref) <= 1e-6 * max(abs(ref), 1e-3)


def test_decay_with_imaginary_part():
    vals = [abs(hankel1(0, 1 + 1j * y)) for y in (0.5, 1, 2, 4, 8)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_crossover_overlap():
    # both sides of the series/asymptotic switch agree with the oracle
    for r in (15.9, 16.0, 16.1):
        for z in (r, r * cmath.exp(0.3j)):
            assert abs(hankel1(1, z) - mp_h1(1, z)) < 1e-12 * abs(mp_h1(1, z))


def test_errors():
    with pytest.raises(SingularityError):
        hankel1(0, 0)
    with pytest.raises(DomainError):
        hankel1(0, 1 - 0.1j)
    with pytest.raises(DomainError):
        bessel_j(0, 60)
    with pytest.raises(DomainError):
        bessel_j(3, 1.0)
