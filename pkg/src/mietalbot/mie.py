"""Mie coefficients, amplitude matrix and cross-sections of a homogeneous sphere.

Conventions follow Bohren & Huffman: time dependence exp(-i omega t), incident
plane wave along +z polarised along x, xi_n built from h^(1)_n so that in the
Rayleigh limit a_1 ~ -(2i/3) x^3 (eps - 1)/(eps + 2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import constants

from .errors import DegeneratePermittivityError, DomainError
from .specfun import angular_functions, riccati_psi_complex, riccati_psi_xi

__all__ = [
    "AMU",
    "CrossSections",
    "MieSolution",
    "ParticleSpec",
    "amplitude_matrix",
    "cross_sections",
    "mie_coefficients",
    "rayleigh_solution",
    "scattering_amplitude",
    "wiscombe_n_max",
]

AMU = constants.physical_constants["atomic mass constant"][0]

_TAIL_TOL = 1e-12
_MAX_ORDER = 200


@dataclass(frozen=True)
class ParticleSpec:
    """Homogeneous dielectric sphere.

    Parameters
    ----------
    mass : float
        Mass in kg.
    density : float
        Mass density in kg/m^3.
    refractive_index : complex
        Complex refractive index, ``Im >= 0`` (absorbing).
    """

    mass: float
    density: float
    refractive_index: complex

    def __post_init__(self):
        if not self.mass > 0:
            raise DomainError(f"mass must be > 0, got {self.mass}")
        if not self.density > 0:
            raise DomainError(f"density must be > 0, got {self.density}")
        n = complex(self.refractive_index)
        if n.imag < 0:
            raise DomainError(f"refractive index must have Im >= 0, got {n}")
        object.__setattr__(self, "refractive_index", n)

    @classmethod
    def from_amu(cls, mass_amu: float, density: float, refractive_index: complex):
        return cls(mass_amu * AMU, density, refractive_index)

    @classmethod
    def from_size_parameter(cls, x: float, wavelength: float, density: float,
                            refractive_index: complex):
        """Sphere whose radius gives ``k R = x`` at ``wavelength``."""
        radius = x * wavelength / (2 * math.pi)
        return cls(4 * math.pi * radius**3 * density / 3, density, refractive_index)

    @property
    def radius(self) -> float:
        return (3 * self.mass / (4 * math.pi * self.density)) ** (1 / 3)

    @property
    def volume(self) -> float:
        return 4 * math.pi * self.radius**3 / 3

    @property
    def permittivity(self) -> complex:
        return self.refractive_index**2

    @property
    def clausius_mossotti(self) -> complex:
        """eps_c = 3 (eps - 1) / (eps + 2)."""
        eps = self.permittivity
        if abs(eps + 2) < 1e-12:
            raise DegeneratePermittivityError(f"eps + 2 vanishes for eps = {eps}")
        return 3 * (eps - 1) / (eps + 2)

    def size_parameter(self, wavelength: float) -> float:
        return 2 * math.pi * self.radius / wavelength

    def with_index(self, refractive_index: complex) -> "ParticleSpec":
        return ParticleSpec(self.mass, self.density, refractive_index)


@dataclass(frozen=True)
class MieSolution:
    """Truncated Mie coefficients; ``a[n-1]`` holds a_n."""

    size_parameter: float
    a: np.ndarray
    b: np.ndarray
    wavelength: float | None = None

    def __post_init__(self):
        a = np.array(self.a, dtype=complex)
        b = np.array(self.b, dtype=complex)
        a.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def n_max(self) -> int:
        return len(self.a)


@dataclass(frozen=True)
class CrossSections:
    """Scattering, extinction and absorption cross-sections in m^2."""

    sigma_sca: float
    sigma_ext: float
    sigma_abs: float


def wiscombe_n_max(x: float) -> int:
    return max(1, math.ceil(x + 4 * x ** (1 / 3) + 2))


def _coefficients(m: complex, x: float, n_max: int):
    n = np.arange(1, n_max + 1)
    psi, dpsi, xi, dxi = riccati_psi_xi(n_max, x)
    psim, dpsim = riccati_psi_complex(n_max, m * x)
    psi, dpsi, xi, dxi, psim, dpsim = (v[n] for v in (psi, dpsi, xi, dxi, psim, dpsim))
    a = (m * psim * dpsi - psi * dpsim) / (m * psim * dxi - xi * dpsim)
    b = (psim * dpsi - m * psi * dpsim) / (psim * dxi - m * xi * dpsim)
    return a, b


def mie_coefficients(particle: ParticleSpec, wavelength: float,
                     n_max: int | None = None) -> MieSolution:
    """Mie coefficients a_n, b_n of ``particle`` at vacuum ``wavelength``.

    Without an explicit ``n_max`` the series starts at the Wiscombe order
    ``ceil(x + 4 x^(1/3) + 2)`` and is extended until the last retained
    coefficients drop below 1e-12.
    """
    if not wavelength > 0:
        raise DomainError(f"wavelength must be > 0, got {wavelength}")
    eps = particle.permittivity
    if abs(eps + 2) < 1e-12:
        raise DegeneratePermittivityError(f"eps + 2 vanishes for eps = {eps}")
    x = particle.size_parameter(wavelength)
    # principal sqrt of eps = n**2 gives back n (Im n >= 0)
    m = complex(np.sqrt(eps))
    if n_max is not None:
        a, b = _coefficients(m, x, n_max)
        return MieSolution(x, a, b, wavelength)

    order = wiscombe_n_max(x)
    while True:
        a, b = _coefficients(m, x, order)
        if max(abs(a[-1]), abs(b[-1])) < _TAIL_TOL or order >= _MAX_ORDER:
            break
        order += 5
    return MieSolution(x, a, b, wavelength)


def rayleigh_solution(particle: ParticleSpec, wavelength: float) -> MieSolution:
    """Point-dipole limit: a_1 = -(2i/3) x^3 (eps - 1)/(eps + 2), all else zero."""
    x = particle.size_parameter(wavelength)
    a1 = -2j * x**3 / 3 * particle.clausius_mossotti / 3
    return MieSolution(x, [a1], [0.0], wavelength)


def amplitude_matrix(sol: MieSolution, theta):
    """Amplitude scattering matrix elements S1(theta), S2(theta).

    ``theta`` may be a scalar or an array; the outputs have its shape.
    """
    theta = np.asarray(theta, dtype=float)
    table = angular_functions(sol.n_max, theta)
    n = np.arange(1, sol.n_max + 1)
    w = ((2 * n + 1) / (n * (n + 1))).reshape((-1,) + (1,) * theta.ndim)
    a = sol.a.reshape(w.shape)
    b = sol.b.reshape(w.shape)
    s1 = np.sum(w * (a * table.pi + b * table.tau), axis=0)
    s2 = np.sum(w * (a * table.tau + b * table.pi), axis=0)
    return s1, s2


def track_sqrt(g: np.ndarray, anchor: complex) -> np.ndarray:
    """Square root of samples ``g`` continuous along the sample order.

    ``g`` must be sampled finely enough that consecutive phase increments
    stay well below pi. The branch at index 0 is the one closest to ``anchor``.
    """
    g = np.asarray(g, dtype=complex)
    dphase = np.angle(g[1:] / np.where(g[:-1] == 0, 1, g[:-1]))
    phase = np.angle(g[0]) + np.concatenate(([0.0], np.cumsum(dphase)))
    root = np.sqrt(np.abs(g)) * np.exp(0.5j * phase)
    if abs(root[0] + anchor) < abs(root[0] - anchor):
        root = -root
    return root


def _tracked_amplitude(sol: MieSolution, theta: np.ndarray, phi: float,
                       max_levels: int = 40) -> np.ndarray:
    """Branch-tracked f(theta, phi) evaluated at sorted ``theta`` (0 .. pi)."""
    c2, s2phi = math.cos(phi) ** 2, math.sin(phi) ** 2
    grid = np.union1d(np.linspace(0.0, math.pi, 257), theta)
    S1, S2 = amplitude_matrix(sol, grid)
    g = S2**2 * c2 + S1**2 * s2phi
    for _ in range(max_levels):
        dphase = np.abs(np.angle(g[1:] / np.where(g[:-1] == 0, 1, g[:-1])))
        bad = np.nonzero(dphase > 0.3)[0]
        if bad.size == 0:
            break
        mids = 0.5 * (grid[bad] + grid[bad + 1])
        m1, m2 = amplitude_matrix(sol, mids)
        grid = np.concatenate((grid, mids))
        g = np.concatenate((g, m2**2 * c2 + m1**2 * s2phi))
        order = np.argsort(grid, kind="stable")
        grid, g = grid[order], g[order]
    S1_0, _ = amplitude_matrix(sol, 0.0)
    root = track_sqrt(g, complex(S1_0))
    return root[np.searchsorted(grid, theta)]


def scattering_amplitude(sol: MieSolution, theta, phi: float, backward: bool = False):
    """Scalar amplitude f = sqrt(S2^2 cos^2 phi + S1^2 sin^2 phi).

    The square-root branch is continuous in theta at fixed phi and equals
    S1(0) in the forward direction. With ``backward=True`` the amplitude for
    the counter-propagating incident wave is returned, using
    f(-k, k n) = f(k, -k n): theta -> pi - theta, phi -> phi + pi.

    Dimensionless (Bohren-Huffman normalisation); the physical amplitude
    is f / k up to a phase.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if np.any(theta < 0) or np.any(theta > math.pi):
        raise DomainError("theta must lie in [0, pi]")
    if backward:
        theta_eval, phi_eval = math.pi - theta, phi + math.pi
    else:
        theta_eval, phi_eval = theta, phi
    ordered = np.unique(theta_eval)
    values = _tracked_amplitude(sol, ordered, phi_eval)
    out = values[np.searchsorted(ordered, theta_eval)]
    return out if out.size > 1 else complex(out[0])


def cross_sections(sol: MieSolution, wavelength: float | None = None) -> CrossSections:
    """Series cross-sections with (2n+1) inside the sums."""
    wavelength = wavelength if wavelength is not None else sol.wavelength
    if wavelength is None:
        raise DomainError("wavelength is required")
    k = 2 * math.pi / wavelength
    n = np.arange(1, sol.n_max + 1)
    ext = 2 * math.pi / k**2 * float(np.sum((2 * n + 1) * np.real(sol.a + sol.b)))
    sca = 2 * math.pi / k**2 * float(
        np.sum((2 * n + 1) * (np.abs(sol.a) ** 2 + np.abs(sol.b) ** 2)))
    return CrossSections(sigma_sca=sca, sigma_ext=ext, sigma_abs=ext - sca)
