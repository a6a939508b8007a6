import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from scipy.special import iv, jv

from mietalbot.decoherence import DecoherenceFns
from mietalbot.errors import DomainError
from mietalbot.talbot import (Channels, MaskValues, Mode, coherent_B, coherent_B_classical,
                              decoherence_R, decoherence_R_closed_form, generalized_B,
                              generalized_B_closed_form, generalized_B_graf,
                              talbot_coefficients, transmission_fourier)

# mpmath quadratures of the transmission exp(i phi0 cos^2(pi z / d))
B_K1_PHI2 = -0.37028979975208093 + 0.23776034617661312j
B2_07_PHI4 = 0.4818705042190025

N = np.arange(-8, 9)
MASK = MaskValues(a=0.3, b=-0.2, F=-0.4, c_abs=0.5, b_classical=-0.25)


def test_mode_and_channel_parsing():
    assert Mode.parse("Classical") is Mode.CLASSICAL
    assert Mode.parse(Mode.QUANTUM) is Mode.QUANTUM
    with pytest.raises(DomainError, match="quantum, classical"):
        Mode.parse("semi")
    assert Channels.parse("coherent-only").coherent_only
    assert Channels.parse("all") == Channels(True, True)
    assert Channels.parse("absorption+scattering").name == "scattering+absorption"
    assert Channels.parse("scattering").name == "scattering"
    with pytest.raises(DomainError):
        Channels.parse("photons")


def test_transmission_fourier():
    assert transmission_fourier(2.0, [1])[0] == pytest.approx(B_K1_PHI2, abs=1e-14)
    b = transmission_fourier(2.0, np.arange(-60, 61))
    assert np.sum(np.abs(b) ** 2) == pytest.approx(1.0, abs=1e-14)
    with pytest.raises(DomainError):
        transmission_fourier(150.0, [0])


@pytest.mark.parametrize("s", [0.0, 0.13, 0.5, 0.7, 1.4])
@pytest.mark.parametrize("phi0", [0.5, 4.0, 13.0])
def test_coherent_matches_bessel(s, phi0):
    assert_allclose(coherent_B(N, s, phi0), jv(N, phi0 * math.sin(math.pi * s)), atol=1e-13)
    assert_allclose(coherent_B_classical(N, s, phi0), jv(N, phi0 * math.pi * s), atol=1e-15)


def test_coherent_frozen_value():
    assert coherent_B(2, 0.7, 4.0) == pytest.approx(B2_07_PHI4, abs=1e-14)


def test_R_trivial_and_limits():
    assert_allclose(decoherence_R(N, 0.3, MaskValues()), (N == 0).astype(float), atol=1e-16)
    assert_allclose(decoherence_R(N, 0.3, MaskValues(a=0.8, F=-0.3)),
                    math.exp(-0.3) * iv(N, 0.8), atol=1e-15)
    assert_allclose(decoherence_R(N, 0.3, MaskValues(b=0.7)), jv(N, 0.7), atol=1e-15)
    assert_allclose(decoherence_R(N, 0.3, None), (N == 0).astype(float))


def test_R_without_absorption():
    no_abs = MaskValues(MASK.a, MASK.b, MASK.F)
    assert_allclose(decoherence_R(N, 0.3, MASK, include_absorption=False),
                    decoherence_R(N, 0.3, no_abs), atol=1e-16)


@settings(max_examples=20, deadline=None)
@given(a=st.floats(0.0, 3.0), frac=st.floats(-0.95, 0.95), F=st.floats(-3.0, 0.0),
       c=st.floats(0.0, 4.0))
def test_R_closed_form(a, frac, F, c):
    a_eff = a + c / 2
    m = MaskValues(a=a, b=frac * a_eff, F=F, c_abs=c)
    closed = decoherence_R_closed_form(N, m)
    if a_eff == 0:
        assert_allclose(closed, (N == 0) * math.exp(F - c / 2))
        return
    assert_allclose(decoherence_R(N, 0.3, m), closed, atol=1e-13)


def test_R_closed_form_undefined():
    assert decoherence_R_closed_form(N, MaskValues(a=0.1, b=0.5)) is None


def test_graf_and_closed_forms():
    s, phi0 = 0.37, 3.0
    direct = generalized_B(N, s, phi0, MASK)
    graf = np.array([generalized_B_graf(int(n), s, phi0, MASK) for n in N])
    closed = generalized_B_closed_form(N, s, phi0, MASK)
    assert_allclose(graf, direct, atol=1e-13)
    assert_allclose(closed, direct, atol=1e-13)


def test_classical_closed_forms():
    s, phi0 = 0.37, 3.0
    assert_allclose(generalized_B(N, s, phi0, MASK, mode="classical"),
                    generalized_B_closed_form(N, s, phi0, MASK, mode="classical"), atol=1e-13)
    assert_allclose(generalized_B(N, s, phi0, MASK, mode="classical-unmodified"),
                    generalized_B_closed_form(N, s, phi0, MASK, mode="classical-unmodified"),
                    atol=1e-13)


def test_classical_ignores_a_F_and_absorption():
    s, phi0 = 0.37, 3.0
    only_bc = MaskValues(b_classical=MASK.b_classical)
    assert_allclose(generalized_B(N, s, phi0, MASK, mode="classical"),
                    generalized_B(N, s, phi0, only_bc, mode="classical"), atol=1e-14)


@pytest.mark.parametrize("mode", list(Mode))
def test_coherent_only_channel(mode):
    coh = coherent_B_classical if mode is not Mode.QUANTUM else coherent_B
    assert_allclose(generalized_B(N, 0.37, 3.0, MASK, mode=mode, channels="coherent"),
                    coh(N, 0.37, 3.0), atol=1e-15)


@pytest.mark.parametrize("mode", list(Mode))
@pytest.mark.parametrize("channels", Channels.NAMES)
def test_identity_at_zero_separation(mode, channels):
    d = 1.0
    grid = np.linspace(0, 2, 21)
    fns = DecoherenceFns(grid, 0.2 * np.sin(grid) ** 2, 0.1 * np.sin(grid),
                         -0.3 * np.sin(grid) ** 2, 1.5, 1.0, d, 0.1 * grid)
    vals = generalized_B(N, 0.0, 4.0, fns, mode=mode, channels=channels)
    assert_allclose(vals, (N == 0).astype(float), atol=1e-14)


def test_off_grid_separation():
    fns = DecoherenceFns.zeros(np.linspace(0, 1, 5), 1.0)
    with pytest.raises(DomainError):
        generalized_B(1, 0.33, 2.0, fns)


@pytest.mark.parametrize("mode", list(Mode))
def test_conjugate_symmetry(mode):
    mirrored = MaskValues(MASK.a, -MASK.b, MASK.F, MASK.c_abs, -MASK.b_classical)
    fwd = generalized_B(N, 0.3, 2.0, MASK, mode=mode)
    back = generalized_B(-N, -0.3, 2.0, mirrored, mode=mode)
    assert_allclose(back, np.conj(fwd), atol=1e-14)


def test_absorption_damps_monotonically():
    n = np.arange(-40, 41)
    norms = [np.sum(np.abs(generalized_B(n, 0.3, 2.0, MaskValues(0.3, -0.2, -0.4, c))) ** 2)
             for c in (0.0, 0.5, 1.0, 2.0, 4.0)]
    assert np.all(np.diff(norms) < 0)


def test_coefficient_set_adapts():
    small = talbot_coefficients(0.4, 2.0, MASK, n_max=2)
    lo, hi = small.n_range
    assert hi > 2 and lo == -hi
    assert small[0] == pytest.approx(generalized_B(0, 0.4, 2.0, MASK), abs=1e-15)
    edge = abs(small.values[0]) + abs(small.values[-1])
    assert edge < 1e-12 * np.abs(small.values).sum()
    with pytest.raises(IndexError):
        small[hi + 1]
    big = talbot_coefficients(0.4, 40.0, MASK, n_max=4)
    assert big.n_range[1] >= 32
