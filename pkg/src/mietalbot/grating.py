"""Coherent action of the standing-wave grating on a Mie sphere.

The longitudinal force is evaluated from the multipole series of the
standing wave. Mie coefficients enter with the opposite sign to the
Bohren-Huffman a_n, b_n (the scattered-field convention of the series); with
that choice the same routine reproduces the plane-wave radiation pressure
exactly and the standing-wave result tends to the dipole force for kR -> 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import constants

from .errors import ConvergenceError, DomainError
from .mie import MieSolution, ParticleSpec, mie_coefficients, wiscombe_n_max

__all__ = [
    "GratingPhase",
    "GratingSpec",
    "SensitivityBand",
    "beam_force",
    "extract_F0",
    "F0_curve",
    "index_sensitivity_band",
    "longitudinal_force",
    "phase_from_F0",
    "rayleigh_F0",
    "standing_wave_coefficients",
    "standing_wave_zeta",
]

HBAR = constants.hbar
C = constants.c
EPS0 = constants.epsilon_0

_L_MAX_CAP = 200
_FORCE_RTOL = 1e-10


@dataclass(frozen=True)
class GratingSpec:
    """Retro-reflected pulsed laser forming a standing wave of period lambda/2.

    Parameters
    ----------
    wavelength : float
        Laser wavelength in m.
    pulse_energy : float
        Pulse energy E_L in J (0 switches the grating off).
    spot_area : float
        Spot area a_L in m^2.
    intensity : float, optional
        Intensity parameter I_0 = c eps0 |E_0|^2 / 2 in W/m^2. It only fixes
        the pulse duration and drops out of every phase and photon number.
    """

    wavelength: float
    pulse_energy: float = 0.0
    spot_area: float = 1e-6
    intensity: float | None = None

    def __post_init__(self):
        if not self.wavelength > 0:
            raise DomainError(f"wavelength must be > 0, got {self.wavelength}")
        if not self.pulse_energy >= 0:
            raise DomainError(f"pulse_energy must be >= 0, got {self.pulse_energy}")
        if not self.spot_area > 0:
            raise DomainError(f"spot_area must be > 0, got {self.spot_area}")
        if self.intensity is not None and not self.intensity > 0:
            raise DomainError(f"intensity must be > 0, got {self.intensity}")

    @property
    def period(self) -> float:
        return self.wavelength / 2

    @property
    def k(self) -> float:
        return 2 * math.pi / self.wavelength

    @property
    def omega(self) -> float:
        return C * self.k

    @property
    def field_amplitude(self) -> float | None:
        if self.intensity is None:
            return None
        return math.sqrt(2 * self.intensity / (C * EPS0))

    @property
    def pulse_duration(self) -> float | None:
        """Rectangular-pulse duration tau = 8 E_L / (c eps0 |E_0|^2 a_L)."""
        if self.intensity is None:
            return None
        return 4 * self.pulse_energy / (self.intensity * self.spot_area)

    def with_pulse_energy(self, pulse_energy: float) -> "GratingSpec":
        return GratingSpec(self.wavelength, pulse_energy, self.spot_area, self.intensity)


@dataclass(frozen=True)
class GratingPhase:
    """F_0 in units of I_0/(c k^2) and the eikonal phase phi_0 it produces."""

    F0_dimensionless: float
    phi0: float


def standing_wave_zeta(l, kz):
    """zeta(l) = [(-1)^l exp(-i k z) + exp(i k z)] / 2."""
    sign = np.where(np.asarray(l) % 2 == 0, 1.0, -1.0)
    return 0.5 * (sign * np.exp(-1j * kz) + np.exp(1j * kz))


def _norm(l):
    return math.sqrt(4 * math.pi * (2 * l + 1) / (l * (l + 1))) / 2


def standing_wave_coefficients(l: int, m: int, z, k: float, x: float):
    """Beam coefficients A_lm, B_lm (m = +-1) of the standing wave at sphere centre z.

    The length scale of the expansion is the size parameter x = kR.
    """
    if l < 1:
        raise DomainError(f"l must be >= 1, got {l}")
    if m not in (1, -1):
        raise DomainError(f"m must be +1 or -1, got {m}")
    kz = k * np.asarray(z, dtype=float)
    c = _norm(l) / x**2
    A = 1j ** (l + 1) * c * m * standing_wave_zeta(l + 1, kz)
    B = 1j**l * c * standing_wave_zeta(l, kz)
    return A, B


def beam_force(sol: MieSolution, zeta, l_max: int | None = None):
    """Longitudinal force series for an arbitrary on-axis beam, units I_0/(c k^2).

    ``zeta(l)`` returns the beam-shape factor of order l (array over
    positions). For the standing wave it is :func:`standing_wave_zeta`;
    ``zeta(l) = 1`` describes a single plane wave along +z.
    """
    x = sol.size_parameter
    l_max = sol.n_max - 1 if l_max is None else l_max
    if l_max + 1 > sol.n_max:
        raise DomainError(f"l_max={l_max} needs Mie coefficients up to {l_max + 1}")
    a = -np.asarray(sol.a)
    b = -np.asarray(sol.b)
    total = 0.0
    zeta_cache = {}

    def zt(l):
        if l not in zeta_cache:
            zeta_cache[l] = np.asarray(zeta(l), dtype=complex)
        return zeta_cache[l]

    for l in range(1, l_max + 1):
        c_l, c_l1 = _norm(l) / x**2, _norm(l + 1) / x**2
        for m in (1, -1):
            A = 1j ** (l + 1) * c_l * m * zt(l + 1)
            B = 1j**l * c_l * zt(l)
            A1 = 1j ** (l + 2) * c_l1 * m * zt(l + 2)
            B1 = 1j ** (l + 1) * c_l1 * zt(l + 1)
            alm, blm = a[l - 1] * A, b[l - 1] * B
            al1, bl1 = a[l] * A1, b[l] * B1
            geom = l * (l + 2) * math.sqrt((l - m + 1) * (l + m + 1) / ((2 * l + 3) * (2 * l + 1)))
            term = geom * (2 * al1 * np.conj(alm) + al1 * np.conj(A) + A1 * np.conj(alm)
                           + 2 * bl1 * np.conj(blm) + bl1 * np.conj(B) + B1 * np.conj(blm))
            term = term + m * (2 * alm * np.conj(blm) + alm * np.conj(B) + A * np.conj(blm))
            total = total + np.imag(term)
    return -(x**4) * total


def default_l_max(x: float) -> int:
    return max(10, wiscombe_n_max(x) + 5)


def longitudinal_force(particle: ParticleSpec, grating: GratingSpec, z,
                       l_max: int | None = None, *, refractive_index=None):
    """Force F_z(z) on the sphere in the standing wave, in units of I_0/(c k^2).

    The series is summed to ``l_max`` (default ``max(10, n_Wiscombe + 5)``)
    and grown until adding five more orders changes it by < 1e-10 relative.
    """
    if refractive_index is not None:
        particle = particle.with_index(refractive_index)
    if l_max is not None and l_max < 2:
        raise DomainError(f"l_max must be >= 2, got {l_max}")
    k = grating.k
    kz = k * np.asarray(z, dtype=float)
    x = particle.size_parameter(grating.wavelength)
    order = default_l_max(x) if l_max is None else l_max
    while True:
        sol = mie_coefficients(particle, grating.wavelength, n_max=order + 6)
        zeta = lambda l: standing_wave_zeta(l, kz)
        f = beam_force(sol, zeta, order)
        f_more = beam_force(sol, zeta, order + 5)
        scale = max(float(np.max(np.abs(f_more))), 1e-300)
        err = float(np.max(np.abs(f_more - f))) / scale
        if err < _FORCE_RTOL:
            return f_more
        if order >= _L_MAX_CAP:
            raise ConvergenceError(
                f"force series not converged at l_max={order} (rel. change {err:.2e})", err)
        order = min(2 * order, _L_MAX_CAP)


def phase_from_F0(F0_dimensionless: float, grating: GratingSpec) -> float:
    """phi_0 = 8 F_0 E_L / (hbar c eps0 a_L k |E_0|^2) with F_0 = F0_dim I_0/(c k^2).

    The field amplitude cancels: phi_0 = 4 F0_dim E_L / (hbar c a_L k^3).
    """
    k = grating.k
    return 4 * F0_dimensionless * grating.pulse_energy / (HBAR * C * grating.spot_area * k**3)


def pulse_energy_for_phase(phi0: float, F0_dimensionless: float, grating: GratingSpec) -> float:
    """Pulse energy that produces eikonal phase ``phi0`` (inverse of phase_from_F0)."""
    if F0_dimensionless == 0:
        raise DomainError("F0 vanishes: no pulse energy produces a nonzero phase")
    k = grating.k
    return phi0 * HBAR * C * grating.spot_area * k**3 / (4 * F0_dimensionless)


def extract_F0(particle: ParticleSpec, grating: GratingSpec) -> GratingPhase:
    """F_0 from F_z(-lambda/8) under F_z(z) = -F_0 sin(2kz), and the phase phi_0."""
    z = -grating.wavelength / 8
    fz = float(longitudinal_force(particle, grating, z))
    F0 = -fz / math.sin(2 * grating.k * z)
    return GratingPhase(F0, phase_from_F0(F0, grating))


def rayleigh_F0(particle: ParticleSpec, wavelength: float) -> float:
    """Dipole-limit F_0 = Re(chi) |E_0|^2 k / 4 in units of I_0/(c k^2)."""
    k = 2 * math.pi / wavelength
    return 0.5 * particle.clausius_mossotti.real * particle.volume * k**3


def rayleigh_phase(particle: ParticleSpec, grating: GratingSpec) -> GratingPhase:
    """phi_0 = 2 Re(chi) E_L / (hbar c eps0 a_L) for a point dipole."""
    F0 = rayleigh_F0(particle, grating.wavelength)
    chi_re = EPS0 * particle.clausius_mossotti.real * particle.volume
    phi0 = 2 * chi_re * grating.pulse_energy / (HBAR * C * EPS0 * grating.spot_area)
    return GratingPhase(F0, phi0)


def F0_curve(refractive_index: complex, kR_grid, wavelength: float = 1.0,
             density: float = 1.0) -> np.ndarray:
    """F_0 (units I_0/(c k^2)) over a grid of size parameters.

    F_0 in these units depends only on kR and the index; ``wavelength`` and
    ``density`` only set the bookkeeping particle.
    """
    grating = GratingSpec(wavelength)
    out = []
    for x in np.asarray(kR_grid, dtype=float):
        p = ParticleSpec.from_size_parameter(x, wavelength, density, refractive_index)
        out.append(extract_F0(p, grating).F0_dimensionless)
    return np.array(out)


@dataclass(frozen=True)
class SensitivityBand:
    kR: np.ndarray
    nominal: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def relative_spread(self) -> np.ndarray:
        """Full width of the three curves divided by |nominal|, per grid point."""
        stack = np.vstack((self.nominal, self.lower, self.upper))
        width = stack.max(axis=0) - stack.min(axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.nominal != 0, width / np.abs(self.nominal), np.inf)

    def spread_at_maxima(self) -> np.ndarray:
        """Relative spread at the interior local maxima of |nominal|."""
        mag = np.abs(self.nominal)
        peaks = np.nonzero((mag[1:-1] > mag[:-2]) & (mag[1:-1] >= mag[2:]))[0] + 1
        return self.relative_spread()[peaks]


def index_sensitivity_band(particle: ParticleSpec, grating: GratingSpec, perturbation: float,
                           part: str, kR_grid) -> SensitivityBand:
    """F_0(kR) at n and at n scaled by (1 -+ perturbation) on its real or imaginary part."""
    if not 0 <= perturbation < 1:
        raise DomainError(f"perturbation must lie in [0, 1), got {perturbation}")
    if part not in ("real", "imag"):
        raise DomainError(f"part must be 'real' or 'imag', got {part!r}")
    n = particle.refractive_index
    if part == "real":
        lo, hi = complex(n.real * (1 - perturbation), n.imag), complex(n.real * (1 + perturbation), n.imag)
    else:
        lo, hi = complex(n.real, n.imag * (1 - perturbation)), complex(n.real, n.imag * (1 + perturbation))
    kR = np.asarray(kR_grid, dtype=float)
    args = dict(wavelength=grating.wavelength, density=particle.density)
    return SensitivityBand(kR, F0_curve(n, kR, **args), F0_curve(lo, kR, **args),
                           F0_curve(hi, kR, **args))
