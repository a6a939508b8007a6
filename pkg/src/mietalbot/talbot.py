"""Fourier machinery of the grating kernel: b_k, B_n, R_n and generalised B_n.

Fourier coefficients use the series convention
``g(z) = sum_n g_n exp(2 pi i n z / d)``, i.e. ``g_n = (1/d) int exp(-2 pi i n z / d) g``,
so that the generalised Talbot coefficients are the convolution
``sum_j B_{n-j} R_j`` of the coherent and decoherence coefficients.

The decoherence coefficients R_n are always taken from a periodic
trapezoid (FFT) quadrature of the mask; the Bessel closed forms are kept as
independent checks that are only defined when their square-root argument is
positive.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .decoherence import DecoherenceFns
from .errors import DomainError
from .specfun import bessel_J, modified_bessel_I

__all__ = [
    "Channels",
    "MaskValues",
    "Mode",
    "TalbotCoefficientSet",
    "coherent_B",
    "coherent_B_classical",
    "decoherence_R",
    "decoherence_R_closed_form",
    "generalized_B",
    "generalized_B_closed_form",
    "generalized_B_graf",
    "talbot_coefficients",
    "transmission_fourier",
]

_TAIL = 1e-16


class Mode(str, enum.Enum):
    QUANTUM = "quantum"
    CLASSICAL = "classical"
    # classical coherent kernel, decoherence kernels kept in quantum form
    CLASSICAL_UNMODIFIED = "classical-unmodified"

    @classmethod
    def parse(cls, value) -> "Mode":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            known = ", ".join(m.value for m in cls)
            raise DomainError(f"unknown mode {value!r}; expected one of: {known}") from None


@dataclass(frozen=True)
class Channels:
    """Incoherent channels switched on in addition to the coherent grating."""

    scattering: bool = False
    absorption: bool = False

    NAMES = ("coherent", "scattering", "absorption", "scattering+absorption", "all")

    @classmethod
    def parse(cls, value) -> "Channels":
        if isinstance(value, cls):
            return value
        text = str(value).strip().lower()
        if text in ("coherent", "coherent-only", "none", ""):
            return cls()
        if text == "all":
            return cls(True, True)
        parts = {p.strip() for p in text.replace(",", "+").split("+")}
        unknown = parts - {"scattering", "absorption", "coherent"}
        if unknown:
            raise DomainError(
                f"unknown channel(s) {sorted(unknown)}; expected one of: {', '.join(cls.NAMES)}")
        return cls("scattering" in parts, "absorption" in parts)

    @property
    def name(self) -> str:
        on = [n for n, f in (("scattering", self.scattering), ("absorption", self.absorption)) if f]
        return "+".join(on) if on else "coherent"

    @property
    def coherent_only(self) -> bool:
        return not (self.scattering or self.absorption)


@dataclass(frozen=True)
class MaskValues:
    """Decoherence-mask parameters at one separation s (disabled channels zeroed)."""

    a: float = 0.0
    b: float = 0.0
    F: float = 0.0
    c_abs: float = 0.0
    b_classical: float = 0.0

    @classmethod
    def from_fns(cls, fns: DecoherenceFns | None, s_over_d: float,
                 channels: Channels = Channels(True, True)) -> "MaskValues":
        if fns is None:
            return cls()
        s = s_over_d * fns.period
        hits = np.nonzero(np.isclose(fns.s_grid, s, rtol=1e-12, atol=1e-12 * fns.period))[0]
        if hits.size == 0:
            raise DomainError(f"s/d = {s_over_d} is not on the DecoherenceFns grid")
        i = hits[0]
        vals = {}
        if channels.scattering:
            vals.update(a=float(fns.a[i]), b=float(fns.b[i]), F=float(fns.F[i]))
            if fns.b_classical is not None:
                vals["b_classical"] = float(fns.b_classical[i])
        if channels.absorption:
            vals["c_abs"] = float(fns.c_abs[i])
        return cls(**vals)


def _phi(phase) -> float:
    return float(getattr(phase, "phi0", phase))


def transmission_fourier(phi0: float, k_range) -> np.ndarray:
    """b_k = exp(i phi0/2) i^k J_k(phi0/2) of t(z) = exp(i phi0 cos^2(pi z / d)).

    ``k_range`` is an iterable of integers (e.g. ``range(-5, 6)``).
    """
    if abs(phi0) >= 100:
        raise DomainError(f"|phi0| must be < 100, got {phi0}")
    k = np.asarray(list(k_range), dtype=int)
    return np.exp(0.5j * phi0) * (1j ** (k % 4)) * bessel_J(k, 0.5 * phi0)


def _b_support(phi0: float) -> int:
    x = 0.5 * abs(phi0)
    return int(math.ceil(x + 10 * x ** (1 / 3) + 25))


def coherent_B(n, s_over_d: float, phi0) -> np.ndarray | complex:
    """Coherent Talbot coefficients B_n(s/d) = sum_k b_k b*_{k-n} exp(i pi (n - 2k) s/d)."""
    phi0 = _phi(phi0)
    scalar = np.ndim(n) == 0
    n_arr = np.atleast_1d(np.asarray(n, dtype=int))
    K = _b_support(phi0)
    lo = min(-K, int(n_arr.min()) - K)
    hi = max(K, int(n_arr.max()) + K)
    k = np.arange(lo, hi + 1)
    bk = transmission_fourier(phi0, k)
    out = np.empty(n_arr.shape, dtype=complex)
    for i, nn in enumerate(n_arr):
        shifted = transmission_fourier(phi0, k - nn)
        terms = bk * np.conj(shifted) * np.exp(1j * math.pi * (nn - 2 * k) * s_over_d)
        terms[np.abs(terms) < 1e-14 * _TAIL] = 0.0
        out[i] = terms.sum()
    return complex(out[0]) if scalar else out


def coherent_B_classical(n, s_over_d: float, phi0):
    """hbar -> 0 limit of B_n: J_n(phi0 pi s/d)."""
    phi0 = _phi(phi0)
    return bessel_J(np.asarray(n), phi0 * math.pi * s_over_d) + 0j


def _mask_samples(m: MaskValues, theta: np.ndarray, classical: bool) -> np.ndarray:
    if classical:
        return np.exp(1j * m.b_classical * np.sin(theta))
    a_eff = m.a + 0.5 * m.c_abs
    return np.exp(m.F - 0.5 * m.c_abs + a_eff * np.cos(theta) + 1j * m.b * np.sin(theta))


def _mask_coefficients(m: MaskValues, classical: bool = False):
    """All R_j of the mask by FFT, returned as (j, R_j) with negligible tails trimmed."""
    strength = abs(m.b_classical) if classical else abs(m.a) + 0.5 * abs(m.c_abs) + abs(m.b)
    size = 32
    while size < 4 * strength + 64:
        size *= 2
    prev = None
    while True:
        theta = 2 * math.pi * np.arange(size) / size
        coeffs = np.fft.fft(_mask_samples(m, theta, classical)) / size
        j = np.fft.fftfreq(size, 1 / size).astype(int)
        order = np.argsort(j)
        j, coeffs = j[order], coeffs[order]
        if prev is not None:
            common = np.isin(j, prev[0])
            ref = dict(zip(prev[0], prev[1]))
            diff = max(abs(c - ref[jj]) for jj, c in zip(j[common], coeffs[common]))
            if diff < 1e-15 * max(1.0, np.abs(coeffs).max()) or size >= 1 << 16:
                break
        prev = (j, coeffs)
        size *= 2
    scale = np.abs(coeffs).max()
    keep = np.abs(coeffs) > _TAIL * scale
    if not keep.any():
        return np.array([0]), np.array([0j])
    lo, hi = np.nonzero(keep)[0][[0, -1]]
    return j[lo:hi + 1], coeffs[lo:hi + 1]


def decoherence_R(n, s_over_d: float, fns: DecoherenceFns | MaskValues | None,
                  include_absorption: bool = True, *, classical: bool = False):
    """Fourier coefficients R_n of the decoherence mask at separation s.

    ``fns`` may be tabulated :class:`DecoherenceFns` (s must lie on its
    grid) or the mask values at this s directly.
    """
    if isinstance(fns, MaskValues):
        m = fns
        if not include_absorption:
            m = MaskValues(m.a, m.b, m.F, 0.0, m.b_classical)
    else:
        m = MaskValues.from_fns(fns, s_over_d, Channels(True, include_absorption))
    j, R = _mask_coefficients(m, classical)
    lookup = dict(zip(j.tolist(), R))
    scalar = np.ndim(n) == 0
    vals = np.array([lookup.get(int(nn), 0j) for nn in np.atleast_1d(n)])
    return complex(vals[0]) if scalar else vals


def decoherence_R_closed_form(n, m: MaskValues):
    """e^{F - c/2} ((a'+b)/(a'-b))^{n/2} I_n(sign(a'-b) sqrt(a'^2 - b^2)), a' = a + c/2.

    Returns None where a'^2 <= b^2 (square-root argument not positive),
    except for the trivial mask a' = b = 0.
    """
    a_eff = m.a + 0.5 * m.c_abs
    pref = math.exp(m.F - 0.5 * m.c_abs)
    n = np.asarray(n)
    if a_eff == 0 and m.b == 0:
        return pref * (n == 0).astype(complex)
    disc = a_eff**2 - m.b**2
    if disc <= 0:
        return None
    ratio = (a_eff + m.b) / (a_eff - m.b)
    arg = math.copysign(math.sqrt(disc), a_eff - m.b)
    return pref * ratio ** (n / 2) * modified_bessel_I(n, arg) + 0j


def _graf_ratio_arg(zeta: float, a_eff: float):
    disc = zeta**2 - a_eff**2
    if disc <= 0:
        return None
    return (zeta + a_eff) / (zeta - a_eff), math.copysign(math.sqrt(disc), zeta - a_eff)


def generalized_B_graf(n: int, s_over_d: float, phi0, m: MaskValues):
    """Addition-theorem form of the quantum generalised coefficient.

    e^{F - c/2} sum_k J_k(b) L^{(n-k)/2} J_{n-k}(sign(zeta - a') sqrt(zeta^2 - a'^2)),
    L = (zeta + a')/(zeta - a'), zeta = phi0 sin(pi s/d). None where zeta^2 <= a'^2.
    """
    zeta = _phi(phi0) * math.sin(math.pi * s_over_d)
    a_eff = m.a + 0.5 * m.c_abs
    ra = _graf_ratio_arg(zeta, a_eff)
    if ra is None:
        return None
    ratio, arg = ra
    K = int(abs(m.b) + 10 * abs(m.b) ** (1 / 3) + 25)
    k = np.arange(-K, K + 1)
    terms = bessel_J(k, m.b) * ratio ** ((n - k) / 2) * bessel_J(n - k, arg)
    return complex(math.exp(m.F - 0.5 * m.c_abs) * terms.sum())


def generalized_B_closed_form(n, s_over_d: float, phi0, m: MaskValues, mode="quantum"):
    """Single-Bessel form: the full kernel is exp(F - c/2 + a' cos + i (zeta + b) sin).

    Returns None where the square-root argument (zeta + b)^2 - a'^2 is not positive.
    """
    mode = Mode.parse(mode)
    phi0 = _phi(phi0)
    if mode is Mode.CLASSICAL:
        return bessel_J(np.asarray(n), phi0 * math.pi * s_over_d + m.b_classical) + 0j
    if mode is Mode.CLASSICAL_UNMODIFIED:
        zeta = phi0 * math.pi * s_over_d
    else:
        zeta = phi0 * math.sin(math.pi * s_over_d)
    beta = zeta + m.b
    a_eff = m.a + 0.5 * m.c_abs
    ra = _graf_ratio_arg(beta, a_eff)
    if ra is None:
        if a_eff == 0 and beta == 0:
            return math.exp(m.F - 0.5 * m.c_abs) * (np.asarray(n) == 0).astype(complex)
        return None
    ratio, arg = ra
    n = np.asarray(n)
    return math.exp(m.F - 0.5 * m.c_abs) * ratio ** (n / 2) * bessel_J(n, arg) + 0j


def _row(n_values: np.ndarray, s_over_d: float, phi0: float, m: MaskValues, mode: Mode,
         channels: Channels) -> np.ndarray:
    classical_coherent = mode in (Mode.CLASSICAL, Mode.CLASSICAL_UNMODIFIED)

    def B(idx):
        if classical_coherent:
            return coherent_B_classical(idx, s_over_d, phi0)
        return coherent_B(idx, s_over_d, phi0)

    if channels.coherent_only:
        return np.asarray(B(n_values), dtype=complex)
    if not channels.scattering:
        m = MaskValues(0.0, 0.0, 0.0, m.c_abs, 0.0)
    if not channels.absorption:
        m = MaskValues(m.a, m.b, m.F, 0.0, m.b_classical)
    if mode is Mode.CLASSICAL:
        if not channels.scattering or m.b_classical == 0:
            return np.asarray(B(n_values), dtype=complex)
        j, R = _mask_coefficients(m, classical=True)
    else:
        j, R = _mask_coefficients(m, classical=False)
    out = np.empty(len(n_values), dtype=complex)
    for i, nn in enumerate(n_values):
        out[i] = np.sum(B(nn - j) * R)
    return out


def generalized_B(n, s_over_d: float, phase, fns: DecoherenceFns | MaskValues | None = None,
                  mode="quantum", channels="scattering+absorption"):
    """Generalised Talbot coefficients sum_j B_{n-j}(s/d) R_j(s/d).

    ``mode='classical'`` replaces the coherent kernel by its hbar -> 0 limit,
    drops a, F and absorption, and keeps only the part of b linear in s.
    ``mode='classical-unmodified'`` takes the classical coherent kernel with
    the quantum decoherence kernels.
    """
    mode = Mode.parse(mode)
    channels = Channels.parse(channels)
    phi0 = _phi(phase)
    if isinstance(fns, MaskValues):
        m = fns
    else:
        m = MaskValues.from_fns(fns, s_over_d, channels) if fns is not None else MaskValues()
    scalar = np.ndim(n) == 0
    vals = _row(np.atleast_1d(np.asarray(n, dtype=int)), s_over_d, phi0, m, mode, channels)
    return complex(vals[0]) if scalar else vals


@dataclass(frozen=True)
class TalbotCoefficientSet:
    s_over_d: float
    n_range: tuple
    values: np.ndarray
    mode: Mode
    channels: Channels

    def __getitem__(self, n: int) -> complex:
        lo, hi = self.n_range
        if not lo <= n <= hi:
            raise IndexError(n)
        return complex(self.values[n - lo])


def talbot_coefficients(s_over_d: float, phase, fns=None, mode="quantum",
                        channels="scattering+absorption", n_max: int = 25) -> TalbotCoefficientSet:
    """B~_n for n = -n_max .. n_max at one separation.

    ``n_max`` grows until the dropped tail is below 1e-12 of the l1 mass.
    """
    mode = Mode.parse(mode)
    channels = Channels.parse(channels)
    while True:
        n = np.arange(-n_max, n_max + 1)
        vals = generalized_B(n, s_over_d, phase, fns, mode, channels)
        mass = np.abs(vals).sum()
        edge = np.abs(vals[:3]).sum() + np.abs(vals[-3:]).sum()
        if mass == 0 or edge < 1e-12 * mass or n_max >= 4096:
            return TalbotCoefficientSet(s_over_d, (-n_max, n_max), vals, mode, channels)
        n_max *= 2
