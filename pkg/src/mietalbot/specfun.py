"""Special functions used by the Mie, force and Talbot-coefficient code.

Spherical Bessel functions of complex argument come from a downward (Miller)
recurrence; the angular functions pi_n, tau_n from the usual upward recurrence.
Integer-order cylindrical Bessel functions are thin wrappers over scipy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DomainError

__all__ = [
    "AngularFunctionTable",
    "angular_functions",
    "bessel_J",
    "modified_bessel_I",
    "riccati_psi_xi",
    "spherical_bessel_j",
    "spherical_bessel_y",
]

_RESCALE_LIMIT = 1e200


def spherical_bessel_j(n_max: int, z: complex) -> np.ndarray:
    """Spherical Bessel functions j_0(z) .. j_{n_max}(z).

    Uses Miller's downward recurrence started well above ``max(n_max, |z|)``
    and normalised against whichever of j_0, j_1 is larger in modulus, so
    the result is accurate also near the zeros of sin z.

    Parameters
    ----------
    n_max : int
        Highest order returned (``n_max >= 0``).
    z : complex
        Argument. ``z = 0`` returns the exact limit ``[1, 0, ..., 0]``.

    Returns
    -------
    numpy.ndarray
        Complex array of length ``n_max + 1``.
    """
    if n_max < 0:
        raise DomainError(f"n_max must be >= 0, got {n_max}")
    z = complex(z)
    out = np.zeros(n_max + 1, dtype=complex)
    if z == 0:
        out[0] = 1.0
        return out

    az = abs(z)
    start = max(n_max, int(az)) + 20 + int(np.sqrt(40.0 * max(n_max, az)))
    vals = np.zeros(start + 2, dtype=complex)
    vals[start + 1] = 0.0
    vals[start] = 1e-30
    for n in range(start, 0, -1):
        vals[n - 1] = (2 * n + 1) / z * vals[n] - vals[n + 1]
        if abs(vals[n - 1]) > _RESCALE_LIMIT:
            vals[n - 1 :] /= _RESCALE_LIMIT

    j0 = np.sin(z) / z
    j1 = np.sin(z) / z**2 - np.cos(z) / z
    if abs(j0) >= abs(j1) or az < 0.5:
        scale = j0 / vals[0]
    else:
        scale = j1 / vals[1]
    out[:] = vals[: n_max + 1] * scale
    return out


def spherical_bessel_y(n_max: int, x: float) -> np.ndarray:
    """Spherical Bessel functions of the second kind y_0(x) .. y_{n_max}(x), x > 0.

    Upward recurrence, which is stable for y_n.
    """
    if x <= 0:
        raise DomainError(f"spherical_bessel_y needs x > 0, got {x}")
    out = np.empty(n_max + 1)
    out[0] = -np.cos(x) / x
    if n_max >= 1:
        out[1] = -np.cos(x) / x**2 - np.sin(x) / x
    for n in range(1, n_max):
        out[n + 1] = (2 * n + 1) / x * out[n] - out[n - 1]
    return out


def riccati_psi_xi(n_max: int, x: float):
    """Riccati-Bessel functions psi_n = x j_n(x), xi_n = x h1_n(x) and derivatives.

    Returns
    -------
    psi, dpsi, xi, dxi : numpy.ndarray
        Arrays indexed by ``n = 0 .. n_max``. ``psi``/``dpsi`` are real,
        ``xi``/``dxi`` complex.
    """
    x = float(x)
    if not x > 0:
        raise DomainError(f"riccati_psi_xi needs x > 0, got {x}")
    j = spherical_bessel_j(n_max + 1, x).real
    y = spherical_bessel_y(n_max + 1, x)
    h = j + 1j * y
    n = np.arange(n_max + 1)
    psi = x * j[: n_max + 1]
    xi = x * h[: n_max + 1]
    # f_n' = x f_{n-1} - n f_n, with f_{-1}(x) = cos x / x (j) and sin x / x (y)
    j_prev = np.concatenate(([np.cos(x) / x], j[:n_max]))
    y_prev = np.concatenate(([np.sin(x) / x], y[:n_max]))
    dpsi = x * j_prev - n * j[: n_max + 1]
    dxi = x * (j_prev + 1j * y_prev) - n * h[: n_max + 1]
    return psi, dpsi, xi, dxi


def riccati_psi_complex(n_max: int, z: complex):
    """psi_n(z) = z j_n(z) and psi_n'(z) for complex z, n = 0 .. n_max."""
    z = complex(z)
    j = spherical_bessel_j(n_max, z)
    n = np.arange(n_max + 1)
    j_prev = np.concatenate(([np.cos(z) / z], j[:n_max]))
    return z * j, z * j_prev - n * j


@dataclass(frozen=True)
class AngularFunctionTable:
    """pi_n(theta) and tau_n(theta) for n = 1 .. n_max.

    ``pi`` and ``tau`` have shape ``(n_max,)`` for scalar theta or
    ``(n_max,) + theta.shape`` for array theta.
    """

    theta: np.ndarray
    pi: np.ndarray
    tau: np.ndarray

    @property
    def n_max(self) -> int:
        return self.pi.shape[0]


def angular_functions(n_max: int, theta) -> AngularFunctionTable:
    """Angular functions pi_n = P_n^1 / sin(theta) and tau_n = dP_n^1/dtheta.

    Computed by upward recurrence in mu = cos(theta); the endpoints 0 and pi
    need no special handling because the recurrence never divides by sin.
    """
    if n_max < 1:
        raise DomainError(f"n_max must be >= 1, got {n_max}")
    theta = np.asarray(theta, dtype=float)
    mu = np.cos(theta)
    pi = np.zeros((n_max,) + theta.shape)
    tau = np.zeros((n_max,) + theta.shape)
    p_prev = np.zeros_like(mu)
    p = np.ones_like(mu)
    for n in range(1, n_max + 1):
        if n > 1:
            p, p_prev = ((2 * n - 1) * mu * p - n * p_prev) / (n - 1), p
        pi[n - 1] = p
        tau[n - 1] = n * mu * p - (n + 1) * p_prev
    return AngularFunctionTable(theta=theta, pi=pi, tau=tau)


def bessel_J(n, x):
    """Bessel function of the first kind J_n(x) for integer n (any sign).

    Negative arguments go through J_n(-x) = (-1)^n J_n(x).
    """
    n = np.asarray(n)
    x = np.asarray(x, dtype=float)
    sign = np.where((x < 0) & (n % 2 != 0), -1.0, 1.0)
    out = sign * special.jv(n, np.abs(x))
    return out if out.ndim else float(out)


def modified_bessel_I(n, x):
    """Modified Bessel function of the first kind I_n(x) for integer n."""
    n = np.abs(np.asarray(n))
    x = np.asarray(x, dtype=float)
    # scipy's iv loses subnormal arguments; the leading series term is exact there
    tiny = np.abs(x) < 1e-150
    out = np.where(tiny, np.where(n == 0, 1.0, 0.0), special.iv(n, np.where(tiny, 1.0, x)))
    return out if out.ndim else float(out)
