"""Bessel and Hankel functions (orders 0, 1) and the outgoing 2D Helmholtz
Green function with its first and second spatial derivatives.

Everything here is self contained (no external special-function library):
the ascending power series is used for arguments below ``CROSSOVER`` and the
large-argument Hankel expansion above it.  Coefficient counts are chosen so
that both branches agree to better than 1e-9 at the crossover and the overall
accuracy is at the 1e-10 level relative to the oscillation envelope
``sqrt(2/(pi x))``.

Conventions
-----------
* ``hankel1_0/1`` are the outgoing Hankel functions ``H_n^(1) = J_n + i Y_n``.
* ``green0(omega, x, z)`` evaluates ``G(x, z) = (i/4) H_0^(1)(omega |x-z|)``,
  the outgoing solution of ``(Laplacian + omega^2) G = -delta_z``.
  ``gradient`` and ``hessian`` are derivatives with respect to the *first*
  argument ``x``.  Since the kernel is radial, ``G(x, z) = G(z, x)`` exactly,
  and derivatives in ``z`` are obtained by swapping the arguments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError, SingularityError
from .geometry import as_point

CROSSOVER = 12.0
EULER_GAMMA = 0.5772156649015328606

_SERIES_TERMS = 42
_ASYM_TERMS = 40


def _as_array(x, positive: bool, name: str):
    a = np.asarray(x, dtype=float)
    if positive:
        if np.any(a <= 0.0):
            raise DomainError(f"{name} requires a strictly positive argument")
    else:
        if np.any(a < 0.0):
            raise DomainError(f"{name} requires a non-negative argument")
    return a


def _series_j0(x):
    # J0(x) = sum_k (-1)^k (x^2/4)^k / (k!)^2
    q = 0.25 * x * x
    term = np.ones_like(x)
    total = np.ones_like(x)
    for k in range(1, _SERIES_TERMS):
        term = term * (-q) / (k * k)
        total = total + term
    return total


def _series_j1(x):
    # J1(x) = (x/2) sum_k (-1)^k (x^2/4)^k / (k! (k+1)!)
    q = 0.25 * x * x
    term = np.ones_like(x)
    total = np.ones_like(x)
    for k in range(1, _SERIES_TERMS):
        term = term * (-q) / (k * (k + 1))
        total = total + term
    return 0.5 * x * total


def _series_y0(x, j0x):
    # Y0(x) = (2/pi)[(ln(x/2)+gamma) J0(x) + sum_{k>=1} (-1)^{k+1} H_k (x^2/4)^k/(k!)^2]
    q = 0.25 * x * x
    term = np.ones_like(x)
    total = np.zeros_like(x)
    hk = 0.0
    for k in range(1, _SERIES_TERMS):
        term = term * (-q) / (k * k)
        hk += 1.0 / k
        total = total - hk * term  # (-1)^{k+1} absorbed: term carries (-1)^k
    return (2.0 / math.pi) * ((np.log(0.5 * x) + EULER_GAMMA) * j0x + total)


def _series_y1(x, j1x):
    # Y1(x) = (2/pi)(ln(x/2)+gamma) J1(x) - 2/(pi x)
    #         - (x/(2 pi)) sum_k (-1)^k (H_k + H_{k+1}) (x^2/4)^k/(k!(k+1)!)
    q = 0.25 * x * x
    term = np.ones_like(x)
    total = np.ones_like(x)  # k = 0: (H_0 + H_1) = 1
    hk = 0.0
    hk1 = 1.0
    for k in range(1, _SERIES_TERMS):
        term = term * (-q) / (k * (k + 1))
        hk += 1.0 / k
        hk1 += 1.0 / (k + 1)
        total = total + (hk + hk1) * term
    return (
        (2.0 / math.pi) * (np.log(0.5 * x) + EULER_GAMMA) * j1x
        - 2.0 / (math.pi * x)
        - (x / (2.0 * math.pi)) * total
    )


def _hankel_asym(nu: int, x):
    """Large-argument expansion of H_nu^(1)(x), truncated at the smallest term.

    Valid for x >= CROSSOVER where the optimally truncated remainder is below
    the 1e-10 envelope-relative target.
    """
    mu4 = 4.0 * nu * nu
    inv = 1.0 / x
    term = np.ones(x.shape, dtype=np.complex128)
    total = np.ones(x.shape, dtype=np.complex128)
    mag = np.ones(x.shape)
    active = np.ones(x.shape, dtype=bool)
    for k in range(1, _ASYM_TERMS):
        term = term * ((1j * (mu4 - (2 * k - 1) ** 2) / (8.0 * k)) * inv)
        m = np.abs(term)
        active &= m < mag
        total = np.where(active, total + term, total)
        mag = np.where(active, m, mag)
    phase = x - (0.5 * nu + 0.25) * math.pi
    return np.sqrt(2.0 / (math.pi * x)) * np.exp(1j * phase) * total


def _hankel0_raw(x):
    out = np.empty(x.shape, dtype=np.complex128)
    lo = x < CROSSOVER
    if np.any(lo):
        xs = x[lo]
        j0 = _series_j0(xs)
        out[lo] = j0 + 1j * _series_y0(xs, j0)
    hi = ~lo
    if np.any(hi):
        out[hi] = _hankel_asym(0, x[hi])
    return out


def _hankel1_raw(x):
    out = np.empty(x.shape, dtype=np.complex128)
    lo = x < CROSSOVER
    if np.any(lo):
        xs = x[lo]
        j1 = _series_j1(xs)
        out[lo] = j1 + 1j * _series_y1(xs, j1)
    hi = ~lo
    if np.any(hi):
        out[hi] = _hankel_asym(1, x[hi])
    return out


def _scalarize(result, x):
    return result[()] if np.isscalar(x) or np.ndim(x) == 0 else result


def bessel_j0(x):
    """Bessel function of the first kind, order 0, for x >= 0."""
    a = _as_array(x, positive=False, name="bessel_j0")
    out = np.empty(a.shape)
    lo = a < CROSSOVER
    if np.any(lo):
        out[lo] = _series_j0(a[lo])
    hi = ~lo
    if np.any(hi):
        out[hi] = _hankel_asym(0, a[hi]).real
    return _scalarize(out, x)


def bessel_j1(x):
    """Bessel function of the first kind, order 1, for x >= 0.

    Satisfies J1 = -d/dx J0.
    """
    a = _as_array(x, positive=False, name="bessel_j1")
    out = np.empty(a.shape)
    lo = a < CROSSOVER
    if np.any(lo):
        out[lo] = _series_j1(a[lo])
    hi = ~lo
    if np.any(hi):
        out[hi] = _hankel_asym(1, a[hi]).real
    return _scalarize(out, x)


def bessel_y0(x):
    """Bessel function of the second kind, order 0, for x > 0."""
    a = _as_array(x, positive=True, name="bessel_y0")
    return _scalarize(_hankel0_raw(a).imag, x)


def bessel_y1(x):
    """Bessel function of the second kind, order 1, for x > 0."""
    a = _as_array(x, positive=True, name="bessel_y1")
    return _scalarize(_hankel1_raw(a).imag, x)


def hankel1_0(x):
    """Outgoing Hankel function H_0^(1)(x) = J0(x) + i Y0(x), x > 0."""
    a = _as_array(x, positive=True, name="hankel1_0")
    return _scalarize(_hankel0_raw(a), x)


def hankel1_1(x):
    """Outgoing Hankel function H_1^(1)(x) = J1(x) + i Y1(x), x > 0."""
    a = _as_array(x, positive=True, name="hankel1_1")
    return _scalarize(_hankel1_raw(a), x)


def crossover_jumps() -> dict:
    """|series - asymptotic| for J0, J1, Y0, Y1 at the branch crossover.

    Used by the self test; all four jumps must stay below 1e-9.
    """
    x = np.array([CROSSOVER])
    j0 = _series_j0(x)
    j1 = _series_j1(x)
    h0 = _hankel_asym(0, x)
    h1 = _hankel_asym(1, x)
    return {
        "j0": float(abs(j0 - h0.real)[0]),
        "j1": float(abs(j1 - h1.real)[0]),
        "y0": float(abs(_series_y0(x, j0) - h0.imag)[0]),
        "y1": float(abs(_series_y1(x, j1) - h1.imag)[0]),
    }


# ----------------------------------------------------------------------------
# Outgoing Helmholtz Green function
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class GreenEval:
    """Green function value with derivatives in the first spatial argument.

    ``hessian`` may be None when a caller did not request second derivatives
    (the Born-corrected evaluation only populates value and gradient).
    """

    value: complex
    gradient: np.ndarray
    hessian: Optional[np.ndarray]


def _check_separation(omega: float, r) -> None:
    if omega <= 0.0:
        raise DomainError("omega must be positive")
    if np.any(np.asarray(r) < 1e-12 / omega):
        raise SingularityError(
            "Green function evaluated at (nearly) coincident points; "
            "handle the self cell explicitly"
        )


def green0_value(omega: float, dx, dy):
    """G(omega; d) = (i/4) H_0^(1)(omega |d|) for separation d = x - z."""
    r = np.hypot(np.asarray(dx, dtype=float), np.asarray(dy, dtype=float))
    _check_separation(omega, r)
    return 0.25j * _hankel0_raw(omega * r)


def green0_gradient(omega: float, dx, dy):
    """Gradient of G in the first argument, as a pair of arrays (gx, gy)."""
    dx = np.asarray(dx, dtype=float)
    dy = np.asarray(dy, dtype=float)
    r = np.hypot(dx, dy)
    _check_separation(omega, r)
    coef = (-0.25j * omega) * _hankel1_raw(omega * r) / r
    return coef * dx, coef * dy


def green0_hessian(omega: float, dx, dy):
    """Second derivatives of G in the first argument: (hxx, hxy, hyy).

    Assembled from H0' = -H1 and H0'' = H1/x - H0; for a radial kernel the
    Hessian in x equals the Hessian in z and is even in the separation.
    """
    dx = np.asarray(dx, dtype=float)
    dy = np.asarray(dy, dtype=float)
    r = np.hypot(dx, dy)
    _check_separation(omega, r)
    kr = omega * r
    h0 = _hankel0_raw(kr)
    h1 = _hankel1_raw(kr)
    # radial second derivative and slope/r
    a = 0.25j * omega * omega * (h1 / kr - h0)   # g''(r)
    b = -0.25j * omega * h1 / r                  # g'(r)/r
    ux, uy = dx / r, dy / r
    hxx = a * ux * ux + b * uy * uy
    hyy = a * uy * uy + b * ux * ux
    hxy = (a - b) * ux * uy
    return hxx, hxy, hyy


def green0(omega: float, x, z) -> GreenEval:
    """Evaluate the outgoing Green function between two points.

    Returns value, gradient and Hessian with respect to ``x``.  The imaginary
    part of the value is J0(omega |x-z|)/4 and the Hessian trace satisfies
    trace + omega^2 value = 0 away from the source.
    """
    x = as_point(x)
    z = as_point(z)
    d = x - z
    val = green0_value(omega, d[0], d[1])[()]
    gx, gy = green0_gradient(omega, d[0], d[1])
    hxx, hxy, hyy = green0_hessian(omega, d[0], d[1])
    grad = np.array([gx, gy], dtype=np.complex128)
    hess = np.array([[hxx, hxy], [hxy, hyy]], dtype=np.complex128)
    return GreenEval(value=complex(val), gradient=grad, hessian=hess)
