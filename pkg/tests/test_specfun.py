import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from mietalbot.errors import DomainError
from mietalbot.specfun import (angular_functions, bessel_J, modified_bessel_I, riccati_psi_xi,
                               spherical_bessel_j, spherical_bessel_y)

# 60-term Taylor series of j_n(0.46 (5.656 + 2.952i)), 40-digit arithmetic
J_SI_046 = [
    0.0762850896903817 - 0.6383653776473524j, 0.6065668800656921 - 0.20328794782388507j,
    0.37724235107752574 + 0.1672543505583003j, 0.09504568167243234 + 0.1585251806801314j,
    -0.0013204092680727763 + 0.06305295739440382j, -0.009168448347694815 + 0.014766054435062483j,
]


def _mp_spherical_j(n, z):
    z = mp.mpc(z)
    return complex(mp.sqrt(mp.pi / (2 * z)) * mp.besselj(n + mp.mpf(1) / 2, z))


def test_j_at_origin():
    assert_allclose(spherical_bessel_j(1, 0), [1, 0])
    assert_allclose(spherical_bessel_j(4, 0), [1, 0, 0, 0, 0])


def test_j0_closed_form():
    assert_allclose(spherical_bessel_j(0, 1.0), [math.sin(1.0)], rtol=1e-14)


def test_j_complex_against_series():
    z = 0.46 * (5.656 + 2.952j)
    assert_allclose(spherical_bessel_j(5, z), J_SI_046, rtol=1e-10)


@pytest.mark.parametrize("z", [0.3, 2.0 + 1.5j, 7.5 - 0.2j, 15 + 9j, 20.0, 0.01 + 0.02j])
def test_j_recurrence_matches_mpmath(z):
    mp.mp.dps = 30
    ref = [_mp_spherical_j(n, z) for n in range(21)]
    assert_allclose(spherical_bessel_j(20, z), ref, rtol=1e-9, atol=1e-300)


def test_y_upward():
    mp.mp.dps = 30
    x = 3.7
    ref = [float(mp.sqrt(mp.pi / (2 * x)) * mp.bessely(n + 0.5, x)) for n in range(12)]
    assert_allclose(spherical_bessel_y(11, x), ref, rtol=1e-10)


def test_riccati_closed_forms():
    psi, dpsi, xi, dxi = riccati_psi_xi(1, math.pi)
    assert abs(psi[0]) < 1e-15
    psi, _, _, _ = riccati_psi_xi(1, 1.0)
    assert psi[1] == pytest.approx(math.sin(1) - math.cos(1), rel=1e-14)


def test_riccati_large_order():
    # arbitrary-precision closed forms at n = 10, x = 8.17
    psi, dpsi, xi, dxi = riccati_psi_xi(10, 8.17)
    assert psi[10] == pytest.approx(0.16705805029990853, rel=1e-10)
    assert dpsi[10] == pytest.approx(0.1566937911321604, rel=1e-10)
    assert xi[10].imag == pytest.approx(-3.848429259809545, rel=1e-10)


@pytest.mark.parametrize("x", [0.05, 0.46, 3.0, 8.17, 25.0])
def test_riccati_wronskian(x):
    psi, dpsi, xi, dxi = riccati_psi_xi(30, x)
    w = psi * dxi - dpsi * xi
    assert_allclose(w, 1j * np.ones_like(w), atol=1e-10)


def test_riccati_rejects_nonpositive():
    with pytest.raises(DomainError):
        riccati_psi_xi(3, 0.0)


def test_angular_trivial():
    t = angular_functions(1, math.pi / 2)
    assert t.pi[0] == pytest.approx(1.0)
    assert abs(t.tau[0]) < 1e-15
    t = angular_functions(2, 0.0)
    assert_allclose([t.pi[1], t.tau[1]], [3.0, 3.0])
    assert t.n_max == 2


def test_angular_table_symbolic():
    # Legendre derivatives from symbolic differentiation at theta = 1.1
    ref = [(1.0, 0.45359612142557737), (1.3607883642767322, -1.7655033517660372),
           (0.04312081029245359, -5.384475160202774), (-1.768745810332411, -3.4247890088803543)]
    t = angular_functions(4, 1.1)
    assert_allclose(np.column_stack((t.pi, t.tau)), ref, rtol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.0, math.pi))
def test_angular_recurrence_identity(theta):
    t = angular_functions(12, theta)
    n = np.arange(2, 13)
    lhs = t.tau[1:]
    rhs = n * math.cos(theta) * t.pi[1:] - (n + 1) * t.pi[:-1]
    assert_allclose(lhs, rhs, atol=1e-9 * max(1.0, np.abs(t.pi).max()))


def test_angular_vectorized_shape():
    t = angular_functions(5, np.linspace(0, math.pi, 7))
    assert t.pi.shape == (5, 7)


def test_bessel_origin_values():
    assert bessel_J(0, 0.0) == 1.0
    assert modified_bessel_I(0, 0.0) == 1.0
    assert bessel_J(1, 0.0) == 0.0


def test_I2_series():
    # sum (x/2)^(2k+2) / (k! (k+2)!) at x = 1.5
    assert modified_bessel_I(2, 1.5) == pytest.approx(0.33783461833568074, rel=1e-12)


@pytest.mark.parametrize("n", [0, 1, 2, 5, 12])
@pytest.mark.parametrize("x", [0.3, 4.0, 17.5, 49.0])
def test_bessel_integral_representation(n, x):
    mp.mp.dps = 30
    J = mp.quad(lambda t: mp.cos(n * t - x * mp.sin(t)), [0, mp.pi / 2, mp.pi]) / mp.pi
    I = mp.quad(lambda t: mp.exp(x * mp.cos(t)) * mp.cos(n * t), [0, mp.pi / 2, mp.pi]) / mp.pi
    assert bessel_J(n, x) == pytest.approx(float(J), rel=1e-10, abs=1e-300)
    assert modified_bessel_I(n, x) == pytest.approx(float(I), rel=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 30), st.floats(-50, 50))
def test_bessel_parity(n, x):
    assert bessel_J(n, -x) == pytest.approx((-1) ** n * bessel_J(n, x), abs=1e-15)
    assert bessel_J(-n, x) == pytest.approx((-1) ** n * bessel_J(n, x), abs=1e-15)
    assert modified_bessel_I(-n, x) == modified_bessel_I(n, x)
