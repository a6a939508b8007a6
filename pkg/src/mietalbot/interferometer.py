"""Experiment-level quantities: Talbot time, source spread, fringe pattern, visibility.

The interference pattern is a Fourier synthesis over generalised Talbot
coefficients evaluated at the harmonic separations ``n * s_arg * d`` with
``s_arg = t1 t2 / (t_T (t1 + t2))``, each damped by the Gaussian source
envelope ``exp(-2 pi^2 n^2 sigma_z^2 t2^2 / (d^2 (t1 + t2)^2))``.

Two optics models are available: ``"mie"`` uses the full multipole series
for the grating force, scattering amplitudes and absorption; ``"rayleigh"``
uses the point-dipole expressions throughout.

By default ``phi0`` labels the laser pulse through the point-dipole phase
formula (``phase_reference="rayleigh"``), so both optics models see the same
pulse energy and the Mie grating phase differs from the label by F0_mie /
F0_rayleigh. With ``phase_reference="optics"`` the label is the phase of the
selected optics model itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import constants

from .decoherence import (DecoherenceFns, ScatteringKernel, _weight, absorption_quantities,
                          c_abs as _c_abs)
from .errors import DomainError, MieTalbotError
from .grating import (GratingPhase, GratingSpec, extract_F0, pulse_energy_for_phase,
                      rayleigh_F0)
from .mie import (MieSolution, ParticleSpec, cross_sections, mie_coefficients,
                  rayleigh_solution)
from .talbot import Channels, MaskValues, Mode, _row

__all__ = [
    "ExperimentConfig",
    "FringePattern",
    "InternalConsistencyError",
    "OpticsModel",
    "SweepResult",
    "default_z_grid",
    "derive_config",
    "fringe_pattern",
    "harmonic_limit",
    "sinusoidal_visibility",
    "sweep",
]

OPTICS = ("mie", "rayleigh")
PHASE_REFERENCES = ("rayleigh", "optics")
_ENVELOPE_FLOOR = 1e-16
_UNIT_ATOL = 1e-8


class InternalConsistencyError(MieTalbotError, RuntimeError):
    """A computed result violates a symmetry it must satisfy by construction."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Talbot-Lau setup: particle, grating laser, source and flight times (SI)."""

    particle: ParticleSpec
    grating: GratingSpec
    temperature: float
    trap_frequency: float
    t1: float
    t2: float

    def __post_init__(self):
        for name in ("temperature", "trap_frequency", "t1", "t2"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be > 0, got {getattr(self, name)}")

    @property
    def period(self) -> float:
        return self.grating.period

    @property
    def talbot_time(self) -> float:
        return self.period**2 * self.particle.mass / constants.h

    @property
    def sigma_z(self) -> float:
        m, nu = self.particle.mass, self.trap_frequency
        return math.sqrt(constants.k * self.temperature / (4 * math.pi**2 * m * nu**2))

    @property
    def magnification(self) -> float:
        return self.period * (self.t1 + self.t2) / self.t1

    @property
    def s_argument(self) -> float:
        return self.t1 * self.t2 / (self.talbot_time * (self.t1 + self.t2))

    @property
    def envelope_exponent(self) -> float:
        """Coefficient of n^2 in the log of the source envelope."""
        t = self.t2 / (self.t1 + self.t2)
        return 2 * math.pi**2 * self.sigma_z**2 * t**2 / self.period**2

    def envelope(self, n) -> np.ndarray:
        return np.exp(-self.envelope_exponent * np.asarray(n, dtype=float) ** 2)

    @property
    def size_parameter(self) -> float:
        return self.particle.size_parameter(self.grating.wavelength)


def derive_config(*, mass: float, density: float, refractive_index: complex, wavelength: float,
                  temperature: float, trap_frequency: float, t1: float | None = None,
                  t2: float | None = None, t1_talbot: float | None = None,
                  t2_talbot: float | None = None, spot_area: float = 1e-6) -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from raw SI values.

    Flight times are given either in seconds (``t1``, ``t2``) or in units of
    the Talbot time (``t1_talbot``, ``t2_talbot``).
    """
    for name, v in (("mass", mass), ("density", density), ("wavelength", wavelength),
                    ("temperature", temperature), ("trap_frequency", trap_frequency),
                    ("spot_area", spot_area)):
        if not v > 0:
            raise DomainError(f"{name} must be > 0, got {v}")
    particle = ParticleSpec(mass, density, refractive_index)
    grating = GratingSpec(wavelength, 0.0, spot_area)
    t_T = (wavelength / 2) ** 2 * mass / constants.h

    def flight(abs_t, rel_t, name):
        if (abs_t is None) == (rel_t is None):
            raise DomainError(f"give exactly one of {name} or {name}_talbot")
        if rel_t is not None:
            if not rel_t > 0:
                raise DomainError(f"{name}_talbot must be > 0, got {rel_t}")
            return rel_t * t_T
        return abs_t

    return ExperimentConfig(particle, grating, temperature, trap_frequency,
                            flight(t1, t1_talbot, "t1"), flight(t2, t2_talbot, "t2"))


class OpticsModel:
    """Grating force, scattering amplitude and absorption of one configuration.

    Abbreviated pipeline state shared by visibilities and patterns; the
    separation-dependent solid-angle integrals are cached per unit photon
    weight, so sweeps over phi0 reuse them.
    """

    def __init__(self, config: ExperimentConfig, optics: str = "mie"):
        if optics not in OPTICS:
            raise DomainError(f"unknown optics {optics!r}; expected one of: {', '.join(OPTICS)}")
        self.config = config
        self.optics = optics
        particle, grating = config.particle, config.grating
        self.F0_rayleigh = rayleigh_F0(particle, grating.wavelength)
        if optics == "mie":
            self.solution: MieSolution = mie_coefficients(particle, grating.wavelength)
            self.F0 = extract_F0(particle, grating).F0_dimensionless
            self.sigma_abs = max(cross_sections(self.solution).sigma_abs, 0.0)
        else:
            self.solution = rayleigh_solution(particle, grating.wavelength)
            self.F0 = self.F0_rayleigh
            self.sigma_abs = max(
                grating.k * particle.volume * particle.clausius_mossotti.imag, 0.0)
        if self.F0 == 0:
            raise DomainError("grating force amplitude vanishes; phi0 cannot be reached")
        self.kernel = ScatteringKernel(self.solution)
        self._unit_cache: dict = {}

    def effective_phase(self, phi0: float, phase_reference: str = "rayleigh") -> float:
        """Grating phase of this optics model for the pulse labelled ``phi0``."""
        if phase_reference not in PHASE_REFERENCES:
            raise DomainError(f"unknown phase reference {phase_reference!r}; expected one of: "
                              f"{', '.join(PHASE_REFERENCES)}")
        if phase_reference == "optics" or self.optics == "rayleigh":
            return phi0
        if self.F0_rayleigh == 0:
            raise DomainError("point-dipole force vanishes; use phase_reference='optics'")
        return phi0 * self.F0 / self.F0_rayleigh

    def grating_for(self, phi0: float) -> GratingSpec:
        g = self.config.grating
        return g.with_pulse_energy(pulse_energy_for_phase(phi0, self.F0, g))

    def phase(self, phi0: float) -> GratingPhase:
        return GratingPhase(self.F0, phi0)

    def _unit(self, s: np.ndarray, atol: float):
        key = tuple(np.round(s / self.config.period, 12))
        hit = self._unit_cache.get(key)
        if hit is None or hit[0] > atol:
            vals = self.kernel.unit_functions(s, atol=atol)
            hit = (atol, vals)
            self._unit_cache[key] = hit
        return hit[1]

    def decoherence(self, phi0: float, s_grid, channels: Channels, mode: Mode) -> DecoherenceFns:
        """Decoherence functions on ``s_grid`` (m) for the pulse that produces ``phi0``."""
        s = np.asarray(s_grid, dtype=float)
        grating = self.grating_for(phi0)
        w = _weight(grating)
        zero = np.zeros_like(s)
        if w == 0:
            return DecoherenceFns.zeros(s, grating.period)
        bc = w * self.kernel.classical_b_slope() * s
        n0 = absorption_quantities(self.solution, grating, self.phase(phi0),
                                   sigma_abs=self.sigma_abs)
        need_full = channels.scattering and mode is not Mode.CLASSICAL
        if need_full:
            ua, ub, uF = self._unit(s, min(_UNIT_ATOL, _UNIT_ATOL / w))
            a, b, F = w * ua, w * ub, w * uF
        else:
            a, b, F = zero, zero.copy(), zero.copy()
        return DecoherenceFns(s, a, b, F, n0, w, grating.period, bc)


def _mask_at(fns: DecoherenceFns, i: int, channels: Channels) -> MaskValues:
    vals = {}
    if channels.scattering:
        vals.update(a=float(fns.a[i]), b=float(fns.b[i]), F=float(fns.F[i]),
                    b_classical=float(fns.b_classical[i]))
    if channels.absorption:
        vals["c_abs"] = float(_c_abs(fns.n0, fns.s_grid[i], fns.period))
    return MaskValues(**vals)


def _harmonic_coefficients(model: OpticsModel, phi0: float, harmonics: np.ndarray,
                           mode: Mode, channels: Channels) -> np.ndarray:
    """B~_n(n s_arg) for each harmonic n."""
    cfg = model.config
    s_over_d = harmonics * cfg.s_argument
    fns = model.decoherence(phi0, s_over_d * cfg.period, channels, mode)
    out = np.empty(len(harmonics), dtype=complex)
    for i, n in enumerate(harmonics):
        m = _mask_at(fns, i, channels)
        out[i] = _row(np.array([n]), float(s_over_d[i]), phi0, m, mode, channels)[0]
    return out


def _model(config: ExperimentConfig, optics: str, model: OpticsModel | None) -> OpticsModel:
    if model is not None:
        if model.config != config or model.optics != optics:
            raise DomainError("model was built for a different configuration or optics")
        return model
    return OpticsModel(config, optics)


def sinusoidal_visibility(config: ExperimentConfig, phi0: float, mode="quantum",
                          channels="scattering+absorption", optics: str = "mie", *,
                          phase_reference: str = "rayleigh",
                          model: OpticsModel | None = None) -> float:
    """V_sin = 2 |B~_1(s_arg)| times the n = 1 source envelope."""
    if phi0 < 0:
        raise DomainError(f"phi0 must be >= 0, got {phi0}")
    mode, channels = Mode.parse(mode), Channels.parse(channels)
    model = _model(config, optics, model)
    phi = model.effective_phase(phi0, phase_reference)
    b1 = _harmonic_coefficients(model, phi, np.array([1]), mode, channels)[0]
    return float(2 * abs(b1) * config.envelope(1))


@dataclass(frozen=True)
class FringePattern:
    """Mean-normalised fringe intensity on ``z_grid``.

    ``harmonics`` and ``coefficients`` hold the retained Fourier terms
    (envelope included); ``imag_residual`` is the largest imaginary part
    discarded when the synthesis was made real, relative to its scale.
    """

    z_grid: np.ndarray
    intensity: np.ndarray
    mode: Mode
    channels: Channels
    harmonics: np.ndarray = field(repr=False)
    coefficients: np.ndarray = field(repr=False)
    imag_residual: float = 0.0
    symmetry_error: float = 0.0

    @property
    def visibility(self) -> float:
        """2 |c_1|, the first-harmonic contrast."""
        i = np.nonzero(self.harmonics == 1)[0]
        return float(2 * abs(self.coefficients[i[0]])) if i.size else 0.0


def default_z_grid(config: ExperimentConfig, points: int | None = None, periods: float = 4.0):
    """Uniform grid over ``periods`` fringe periods centred on z = 0, endpoint excluded.

    With ``points=None`` the grid resolves every harmonic the synthesis may
    retain: the smallest power of two, at least 512, above 2 periods n_max.
    """
    if points is None:
        need = 2 * periods * harmonic_limit(config) + 1
        points = max(512, 1 << int(math.ceil(math.log2(need))))
    if points < 2 or not periods > 0:
        raise DomainError("z grid needs points >= 2 and periods > 0")
    D = config.magnification
    return np.linspace(-0.5 * periods * D, 0.5 * periods * D, points, endpoint=False)


def harmonic_limit(config: ExperimentConfig) -> int:
    """Smallest |n| whose source envelope is below 1e-16 (capped at 4096)."""
    alpha = config.envelope_exponent
    if alpha == 0:
        return 4096
    return min(4096, int(math.ceil(math.sqrt(-math.log(_ENVELOPE_FLOOR) / alpha))))


def fringe_pattern(config: ExperimentConfig, phi0: float, z_grid=None, mode="quantum",
                   channels="scattering+absorption", optics: str = "mie", *,
                   phase_reference: str = "rayleigh", model: OpticsModel | None = None,
                   max_harmonic: int | None = None,
                   block: int = 32) -> FringePattern:
    """Interference pattern sum_n B~_n(n s_arg) e^{2 pi i n z / D} envelope_n.

    Harmonics are added in blocks until the envelope falls below 1e-16 or a
    whole block of terms is below 1e-16. ``max_harmonic`` restricts the
    synthesis to |n| <= max_harmonic.
    """
    if phi0 < 0:
        raise DomainError(f"phi0 must be >= 0, got {phi0}")
    mode, channels = Mode.parse(mode), Channels.parse(channels)
    model = _model(config, optics, model)
    phi = model.effective_phase(phi0, phase_reference)
    z = default_z_grid(config) if z_grid is None else np.asarray(z_grid, dtype=float).ravel()
    D = config.magnification
    # a uniform grid of N points with endpoint excluded covers ptp * N / (N - 1)
    if z.size < 2 or np.ptp(z) * z.size / (z.size - 1) < 2 * D * (1 - 1e-9):
        raise DomainError("z_grid must span at least two fringe periods")
    limit = harmonic_limit(config) if max_harmonic is None else int(max_harmonic)

    pos, neg = [], []
    n_lo = 1
    while n_lo <= limit:
        n = np.arange(n_lo, min(limit, n_lo + block - 1) + 1)
        env = config.envelope(n)
        cp = _harmonic_coefficients(model, phi, n, mode, channels) * env
        cn = _harmonic_coefficients(model, phi, -n, mode, channels) * env
        pos.append(cp)
        neg.append(cn)
        n_lo = n[-1] + 1
        if max_harmonic is None and max(np.abs(cp).max(), np.abs(cn).max()) < _ENVELOPE_FLOOR:
            break
    cp = np.concatenate(pos) if pos else np.zeros(0, complex)
    cn = np.concatenate(neg) if neg else np.zeros(0, complex)
    c0 = _harmonic_coefficients(model, phi, np.array([0]), mode, channels)[0]

    scale = max(abs(c0), np.abs(cp).max(initial=0.0))
    sym = float(np.abs(cn - np.conj(cp)).max(initial=0.0)) / scale
    if sym > 1e-6 or abs(c0.imag) > 1e-6 * scale:
        raise InternalConsistencyError(
            f"conjugate symmetry violated by {sym:.3e} (relative); pattern would not be real")

    harmonics = np.concatenate((-np.arange(len(cn), 0, -1), [0], np.arange(1, len(cp) + 1)))
    coeffs = np.concatenate((cn[::-1], [c0], cp))
    phase = np.exp(2j * math.pi * np.outer(z, harmonics) / D)
    total = phase @ coeffs
    imag_res = float(np.abs(total.imag).max() / max(np.abs(total).max(), 1e-300))
    intensity = total.real / c0.real
    return FringePattern(z, intensity, mode, channels, harmonics, coeffs / c0.real,
                         imag_res, sym)


@dataclass(frozen=True)
class SweepResult:
    """Row-per-phi0 results; ``values`` is 1-D for visibilities, 2-D for patterns."""

    phi0: np.ndarray
    values: np.ndarray
    quantity: str
    mode: Mode
    channels: Channels
    optics: str
    z_grid: np.ndarray | None = None


def sweep(config: ExperimentConfig, phi0_grid, mode="quantum", channels="scattering+absorption",
          optics: str = "mie", quantity: str = "visibility", z_grid=None, *,
          phase_reference: str = "rayleigh", model: OpticsModel | None = None) -> SweepResult:
    """Visibilities (or patterns) for each phi0 in ``phi0_grid`` in the given order."""
    phi = np.asarray(phi0_grid, dtype=float).ravel()
    if phi.size == 0:
        raise DomainError("phi0 grid is empty")
    if quantity not in ("visibility", "pattern"):
        raise DomainError(f"unknown quantity {quantity!r}; expected visibility or pattern")
    mode, channels = Mode.parse(mode), Channels.parse(channels)
    model = _model(config, optics, model)
    if quantity == "visibility":
        vals = np.array([sinusoidal_visibility(config, p, mode, channels, optics,
                                               phase_reference=phase_reference, model=model)
                         for p in phi])
        return SweepResult(phi, vals, quantity, mode, channels, optics)
    z = default_z_grid(config) if z_grid is None else np.asarray(z_grid, dtype=float)
    rows = np.array([fringe_pattern(config, p, z, mode, channels, optics,
                                    phase_reference=phase_reference, model=model).intensity
                     for p in phi])
    return SweepResult(phi, rows, quantity, mode, channels, optics, z)
