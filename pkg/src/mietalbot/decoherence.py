"""Incoherent grating action: photon scattering and absorption masks.

The scattering mask is exp(F(s) + a(s) cos 2kz + i b(s) sin 2kz), with a, b, F
solid-angle integrals over products of the forward and backward scalar
amplitudes. The azimuthal integral is taken first, leaving one-dimensional
tables in u = cos(theta) that are reused for every separation s.

Normalisation: the photon weight 8 pi E_L / (hbar omega a_L) carries an extra
factor 1/(4 pi) (``SCATTERING_NORMALIZATION``) so that in the point-dipole
limit the mask decays at large separation to exp(-n_sca/2), with n_sca the
mean number of photons scattered at an antinode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import constants, optimize

from .errors import ConvergenceError, DomainError
from .grating import GratingPhase, GratingSpec
from .mie import MieSolution, _tracked_amplitude, amplitude_matrix, cross_sections

__all__ = [
    "SCATTERING_NORMALIZATION",
    "DecoherenceFns",
    "ScatteringKernel",
    "absorption_quantities",
    "c_abs",
    "classical_scattering_b",
    "photon_number_weight",
    "scattering_functions",
]

HBAR = constants.hbar
SCATTERING_NORMALIZATION = 1 / (4 * math.pi)

_QUAD_ATOL = 1e-8
_MAX_ORDER = 1024


def photon_number_weight(grating: GratingSpec) -> float:
    """2 pi c / V_0 times the integrated photon number 4 V_0 E_L / (hbar c omega a_L).

    The mode volume cancels; the result is 8 pi E_L / (hbar omega a_L) in m^-2.
    """
    return 8 * math.pi * grating.pulse_energy / (HBAR * grating.omega * grating.spot_area)


def _gauss_nodes(edges, order):
    x, w = np.polynomial.legendre.leggauss(order)
    nodes, weights = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        half = 0.5 * (hi - lo)
        nodes.append(lo + half * (x + 1))
        weights.append(half * w)
    return np.concatenate(nodes), np.concatenate(weights)


def _branch_points(sol: MieSolution, samples: int = 4001):
    """(theta_c, phi_c) pairs with theta_c in (0, pi), phi_c in (0, pi/2) where g vanishes.

    g = S2^2 cos^2 phi + S1^2 sin^2 phi = 0 requires (S2/S1)^2 = -tan^2 phi.
    """
    theta = np.linspace(1e-6, math.pi - 1e-6, samples)

    def ratio2(t):
        s1, s2 = amplitude_matrix(sol, t)
        return (s2 / s1) ** 2

    with np.errstate(divide="ignore", invalid="ignore"):
        r2 = ratio2(theta)
    im = r2.imag
    found = []
    idx = np.nonzero((np.sign(im[:-1]) * np.sign(im[1:]) < 0))[0]
    for i in idx:
        if not (np.isfinite(im[i]) and np.isfinite(im[i + 1])):
            continue
        try:
            tc = optimize.brentq(lambda t: ratio2(t).imag, theta[i], theta[i + 1], xtol=1e-14)
        except ValueError:
            continue
        re = ratio2(tc).real
        if re < 0:
            phic = math.atan(math.sqrt(-re))
            if 1e-12 < phic < math.pi / 2 - 1e-12:
                found.append((tc, phic))
    return found


class ScatteringKernel:
    """Azimuth-integrated amplitude products of one Mie solution.

    Attributes (after :meth:`tables`) are arrays on Gauss-Legendre nodes in
    u = cos(theta):

    - ``re`` : integral over phi of Re(f*(k, kn) f(-k, kn))
    - ``im`` : integral over phi of Im(f*(k, kn) f(-k, kn))
    - ``mag`` : integral over phi of |f(k, kn)|^2

    The quadrature domain is split at the branch points of the square
    root, in u as well as in phi, so each panel has a smooth integrand.
    """

    def __init__(self, sol: MieSolution):
        if sol.wavelength is None:
            raise DomainError("ScatteringKernel needs a MieSolution with a wavelength")
        self.sol = sol
        self.k = 2 * math.pi / sol.wavelength
        self._cache = {}

    @cached_property
    def branch_points(self):
        return _branch_points(self.sol)

    @cached_property
    def _edges(self):
        u_c = sorted({abs(math.cos(t)) for t, _ in self.branch_points} - {0.0, 1.0})
        u_edges = np.array([0.0] + u_c + [1.0])
        phi_c = sorted({p for _, p in self.branch_points})
        phi_edges = np.array([0.0] + phi_c + [math.pi / 2])
        return u_edges, phi_edges

    def tables(self, u_order: int, phi_order: int):
        key = (u_order, phi_order)
        if key in self._cache:
            return self._cache[key]
        u_edges, phi_edges = self._edges
        u_pos, w_pos = _gauss_nodes(u_edges, u_order)
        theta_pos = np.arccos(u_pos)
        # node set symmetric under u -> -u: theta -> pi - theta
        theta_all = np.concatenate((theta_pos, math.pi - theta_pos))
        ordered = np.unique(theta_all)
        pos_idx = np.searchsorted(ordered, theta_pos)
        neg_idx = np.searchsorted(ordered, math.pi - theta_pos)
        phis, wphi = _gauss_nodes(phi_edges, phi_order)
        re_pos = np.zeros_like(u_pos)
        im_pos = np.zeros_like(u_pos)
        mag_pos = np.zeros_like(u_pos)
        mag_neg = np.zeros_like(u_pos)
        for phi, w in zip(phis, wphi):
            f = _tracked_amplitude(self.sol, ordered, phi)
            f_fwd, f_mirror = f[pos_idx], f[neg_idx]
            prod = np.conj(f_fwd) * f_mirror
            re_pos += w * prod.real
            im_pos += w * prod.imag
            mag_pos += w * np.abs(f_fwd) ** 2
            mag_neg += w * np.abs(f_mirror) ** 2
        # four quadrants in phi: the integrands depend on cos^2 phi, sin^2 phi only
        u = np.concatenate((-u_pos[::-1], u_pos))
        wu = np.concatenate((w_pos[::-1], w_pos))
        re = 4 * np.concatenate((re_pos[::-1], re_pos))
        im = 4 * np.concatenate((-im_pos[::-1], im_pos))
        mag = 4 * np.concatenate((mag_neg[::-1], mag_pos))
        out = (u, wu, re, im, mag)
        self._cache[key] = out
        return out

    def _functions_at(self, s, order):
        u, wu, re, im, mag = self.tables(*order)
        ks = self.k * np.asarray(s, dtype=float)[..., None]
        cu = np.cos(ks * u)
        a = np.sum(wu * re * (cu - np.cos(ks)), axis=-1)
        b = np.sum(wu * im * np.sin(ks * u), axis=-1)
        F = np.sum(wu * mag * (np.cos(ks * (1 - u)) - 1), axis=-1)
        return a, b, F

    def unit_functions(self, s, atol: float = _QUAD_ATOL, start=(64, 32)):
        """a, b, F per unit weight (weight = 1 m^2 / k^2 dimensionless), adaptively converged.

        ``atol`` applies to the unit-weight values.
        """
        order = start
        prev = self._functions_at(s, order)
        while True:
            order = (2 * order[0], 2 * order[1])
            cur = self._functions_at(s, order)
            err = max(float(np.max(np.abs(c - p))) for c, p in zip(cur, prev))
            if err < atol:
                return cur
            if order[0] >= _MAX_ORDER:
                raise ConvergenceError(
                    f"solid-angle quadrature not converged (achieved {err:.2e})", err)
            prev = cur

    def classical_b_slope(self) -> float:
        """d b / d s at s = 0 per unit weight: integral of Im(f* f-) k u."""
        u, wu, re, im, mag = self.tables(128, 64)
        return float(np.sum(wu * im * self.k * u))

    def integrated_magnitude(self) -> float:
        """Integral of |f(k, kn)|^2 over the full solid angle (dimensionless)."""
        u, wu, re, im, mag = self.tables(128, 64)
        return float(np.sum(wu * mag))


def _weight(grating: GratingSpec) -> float:
    return SCATTERING_NORMALIZATION * photon_number_weight(grating) / grating.k**2


def scattering_functions(sol: MieSolution, grating: GratingSpec, s, *,
                         kernel: ScatteringKernel | None = None):
    """a(s), b(s), F(s) of the scattering mask for the laser pulse in ``grating``."""
    kernel = kernel or ScatteringKernel(sol)
    w = _weight(grating)
    if w == 0:
        zero = np.zeros_like(np.asarray(s, dtype=float))
        return zero, zero.copy(), zero.copy()
    a, b, F = kernel.unit_functions(s, atol=_QUAD_ATOL / w)
    return w * a, w * b, w * F


def classical_scattering_b(sol: MieSolution, grating: GratingSpec, s, *,
                           kernel: ScatteringKernel | None = None):
    """First-order-in-s part of b(s), the only scattering term left as hbar -> 0."""
    kernel = kernel or ScatteringKernel(sol)
    return _weight(grating) * kernel.classical_b_slope() * np.asarray(s, dtype=float)


def absorption_quantities(sol: MieSolution, grating: GratingSpec,
                          phase: GratingPhase | None = None, *,
                          sigma_abs: float | None = None) -> float:
    """Mean number n_0 of photons absorbed at an antinode, 4 sigma_abs E_L lambda / (h c a_L).

    ``sigma_abs`` defaults to sigma_ext - sigma_sca of ``sol``. When ``phase``
    is given the equivalent form (I_0 / c F_0) sigma_abs phi_0 is checked
    against it.
    """
    if sigma_abs is None:
        sigma_abs = cross_sections(sol, grating.wavelength).sigma_abs
    if sigma_abs < 0:
        sigma_abs = 0.0
    n0 = 4 * sigma_abs * grating.pulse_energy * grating.wavelength / (
        constants.h * constants.c * grating.spot_area)
    if phase is not None and phase.F0_dimensionless != 0:
        alt = grating.k**2 * sigma_abs * phase.phi0 / phase.F0_dimensionless
        if not math.isclose(n0, alt, rel_tol=1e-8, abs_tol=1e-300):
            raise DomainError(f"n0 mismatch: {n0} vs {alt} from phi0")
    return n0


def c_abs(n0: float, s, period: float):
    """c_abs(s) = n0 (1 - cos(pi s / d))."""
    return n0 * (1 - np.cos(math.pi * np.asarray(s, dtype=float) / period))


@dataclass(frozen=True)
class DecoherenceFns:
    """Tabulated decoherence functions of one configuration.

    ``a``, ``b``, ``F`` are aligned with ``s_grid`` (metres). ``photon_weight``
    is the normalised weight multiplying the azimuth-integrated amplitude
    products, in units of 1/k^2.
    """

    s_grid: np.ndarray
    a: np.ndarray
    b: np.ndarray
    F: np.ndarray
    n0: float
    photon_weight: float
    period: float
    b_classical: np.ndarray | None = None

    @property
    def c_abs(self) -> np.ndarray:
        return c_abs(self.n0, self.s_grid, self.period)

    @classmethod
    def zeros(cls, s_grid, period: float) -> "DecoherenceFns":
        s = np.asarray(s_grid, dtype=float)
        z = np.zeros_like(s)
        return cls(s, z, z.copy(), z.copy(), 0.0, 0.0, period, z.copy())

    @classmethod
    def compute(cls, sol: MieSolution, grating: GratingSpec, s_grid,
                phase: GratingPhase | None = None,
                kernel: ScatteringKernel | None = None) -> "DecoherenceFns":
        kernel = kernel or ScatteringKernel(sol)
        s = np.asarray(s_grid, dtype=float)
        a, b, F = scattering_functions(sol, grating, s, kernel=kernel)
        n0 = absorption_quantities(sol, grating, phase)
        bc = classical_scattering_b(sol, grating, s, kernel=kernel)
        return cls(s, a, b, F, n0, _weight(grating), grating.period, bc)
