r"""Cylinder functions on the two branches used by the waveguide modes.

Every radial function in the package is a Bessel-type function of
:math:`k_m r`, where the axial wavenumber :math:`k_m` is either real and
positive (propagating) or purely imaginary with positive imaginary part
(evanescent). On the evanescent branch

.. math::
    H_n^{(1)}(\mathrm{i}t) = \frac{2}{\pi} e^{-\mathrm{i}(n+1)\pi/2} K_n(t),
    \qquad J_n(\mathrm{i}t) = \mathrm{i}^n I_n(t),

so only real-argument kernels are ever evaluated. Values of :math:`J`,
:math:`Y`, :math:`K` and :math:`I` come from the AMOS routines in
:mod:`scipy.special`; the logarithmic derivatives and order ratios that the
Calderón symbol needs are computed here by ratio recurrences and never form
the (possibly overflowing) Hankel values themselves.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import special as sp

__all__ = [
    "CylValue",
    "SpecialFunctionError",
    "DomainError",
    "BesselOverflowError",
    "BesselUnderflowError",
    "bessel_j",
    "bessel_y",
    "hankel1",
    "bessel_k",
    "bessel_i",
    "is_evanescent",
    "hankel1_axial",
    "bessel_j_axial",
    "hankel1_logderiv",
    "hankel1_order_ratios",
    "bessel_k_ratio",
]

#: Orders and arguments inside which the 1e-12 relative accuracy target holds.
ACCURATE_MAX_ORDER = 64
ACCURATE_ARG_RANGE = (1e-3, 1e3)

_TINY = np.finfo(float).tiny
_HUGE = np.finfo(float).max


class SpecialFunctionError(ArithmeticError):
    """Base class for cylinder-function evaluation failures."""


class DomainError(SpecialFunctionError, ValueError):
    """Argument outside the supported branch (non-positive or non-finite)."""


class BesselOverflowError(SpecialFunctionError, OverflowError):
    """The requested value is not representable in double precision."""


class BesselUnderflowError(SpecialFunctionError):
    """An unscaled modified Bessel value fell below the smallest normal double."""


@dataclass(frozen=True)
class CylValue:
    """A cylinder function value together with its derivative in the argument."""

    value: complex
    derivative: complex

    def __post_init__(self):
        for v in (self.value, self.derivative):
            if not (math.isfinite(v.real) and math.isfinite(v.imag)):
                raise BesselOverflowError("non-finite cylinder function value")


def _check_arg(x: float, name: str = "x") -> float:
    x = float(x)
    if not math.isfinite(x) or x <= 0.0:
        raise DomainError(f"{name} must be a finite positive real, got {x!r}")
    return x


def _check_order(n) -> int:
    if int(n) != n:
        raise DomainError(f"order must be an integer, got {n!r}")
    return int(n)


def _accuracy_warning(n: int, x: float) -> None:
    lo, hi = ACCURATE_ARG_RANGE
    if abs(n) > ACCURATE_MAX_ORDER or not lo <= x <= hi:
        warnings.warn(
            f"cylinder function at order {n}, argument {x:g} is outside the "
            "calibrated accuracy range",
            RuntimeWarning,
            stacklevel=3,
        )


def _finite(z: complex, what: str) -> complex:
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise BesselOverflowError(f"{what} overflows double precision")
    return z


def _h1(n, x):
    # J + iY from the real-argument routines: the complex Hankel routine
    # carries an error relative to |H|, which swamps J when |Y| is huge
    return sp.jv(n, x) + 1j * sp.yv(n, x)


def bessel_j(n: int, x: float) -> CylValue:
    """Bessel function of the first kind ``J_n(x)`` and ``J_n'(x)``."""
    n = _check_order(n)
    x = _check_arg(x)
    _accuracy_warning(n, x)
    v = float(sp.jv(n, x))
    d = 0.5 * (float(sp.jv(n - 1, x)) - float(sp.jv(n + 1, x)))
    return CylValue(complex(v), complex(d))


def bessel_y(n: int, x: float) -> CylValue:
    """Bessel function of the second kind ``Y_n(x)`` and ``Y_n'(x)``."""
    n = _check_order(n)
    x = _check_arg(x)
    _accuracy_warning(n, x)
    v = float(sp.yv(n, x))
    vm = float(sp.yv(n - 1, x))
    if not (math.isfinite(v) and math.isfinite(vm)):
        raise BesselOverflowError(f"Y_{n}({x}) overflows double precision")
    return CylValue(complex(v), complex(vm - n / x * v))


def hankel1(n: int, x: float) -> CylValue:
    """Hankel function ``H_n^{(1)}(x)`` with ``H' = H_{n-1} - (n/x) H_n``.

    Raises :class:`BesselOverflowError` for large ``n`` and small ``x``; use
    :func:`hankel1_logderiv` or :func:`hankel1_order_ratios` there.
    """
    n = _check_order(n)
    x = _check_arg(x)
    _accuracy_warning(n, x)
    h = _finite(complex(_h1(n, x)), f"H_{n}({x})")
    hm = _finite(complex(_h1(n - 1, x)), f"H_{n - 1}({x})")
    if abs(h) > 1e300:
        raise BesselOverflowError(f"H_{n}({x}) too close to the floating range")
    return CylValue(h, _finite(hm - n / x * h, f"H'_{n}({x})"))


def bessel_k(n: int, t: float, scaled: bool = False) -> CylValue:
    """Modified Bessel ``K_n(t)`` and ``K_n'(t)``.

    With ``scaled=True`` both entries are multiplied by ``e^t``; this is the
    form used internally on the evanescent branch.
    """
    n = abs(_check_order(n))
    t = _check_arg(t, "t")
    _accuracy_warning(n, t)
    k0 = float(sp.kve(n, t))
    k1 = float(sp.kve(n + 1, t))
    if not (math.isfinite(k0) and math.isfinite(k1)):
        raise BesselOverflowError(f"K_{n}({t}) overflows double precision")
    # K_n' = (n/t) K_n - K_{n+1}
    d = n / t * k0 - k1
    if not scaled:
        s = math.exp(-t)
        if k0 * s < _TINY:
            raise BesselUnderflowError(f"K_{n}({t}) underflows; use scaled=True")
        k0, d = k0 * s, d * s
    return CylValue(complex(k0), complex(d))


def bessel_i(n: int, t: float, scaled: bool = False) -> CylValue:
    """Modified Bessel ``I_n(t)`` and ``I_n'(t)``; ``scaled`` multiplies by ``e^{-t}``."""
    n = abs(_check_order(n))
    t = _check_arg(t, "t")
    _accuracy_warning(n, t)
    if scaled:
        i0 = float(sp.ive(n, t))
        d = 0.5 * (float(sp.ive(n - 1, t)) + float(sp.ive(n + 1, t)))
    else:
        i0 = float(sp.iv(n, t))
        d = 0.5 * (float(sp.iv(n - 1, t)) + float(sp.iv(n + 1, t)))
    if not (math.isfinite(i0) and math.isfinite(d)):
        raise BesselOverflowError(f"I_{n}({t}) overflows double precision")
    return CylValue(complex(i0), complex(d))


def is_evanescent(km: complex) -> bool:
    """True when ``km`` sits on the imaginary branch."""
    km = complex(km)
    if km.real > 0.0 and km.imag == 0.0:
        return False
    if km.real == 0.0 and km.imag > 0.0:
        return True
    raise DomainError(f"axial wavenumber {km!r} is on neither admissible branch")


def _ipow(p: int) -> complex:
    return (1.0, 1j, -1.0, -1j)[p % 4]


def hankel1_axial(n: int, km: complex, r: float) -> CylValue:
    """``H_n^{(1)}(k_m r)`` and its derivative in the argument, on either branch."""
    n = _check_order(n)
    r = _check_arg(r, "r")
    if not is_evanescent(km):
        return hankel1(n, complex(km).real * r)
    t = complex(km).imag * r
    kv = bessel_k(n, t, scaled=True)
    log_scale = -t
    if abs(kv.value) > 0 and math.log(abs(kv.value)) + log_scale > 690:
        raise BesselOverflowError(f"H_{n}(i{t}) overflows double precision")
    s = math.exp(log_scale)
    c = 2.0 / math.pi * _ipow(-(n + 1))
    return CylValue(c * kv.value * s, -1j * c * kv.derivative * s)


def bessel_j_axial(n: int, km: complex, r: float) -> CylValue:
    """``J_n(k_m r)`` and its derivative in the argument, on either branch."""
    n = _check_order(n)
    r = _check_arg(r, "r")
    if not is_evanescent(km):
        return bessel_j(n, complex(km).real * r)
    t = complex(km).imag * r
    iv = bessel_i(n, t)
    return CylValue(_ipow(n) * iv.value, _ipow(n - 1) * iv.derivative)


def bessel_k_ratio(n: int, t: float) -> float:
    """``K_{n+1}(t) / K_n(t)`` for ``n >= 0`` by forward ratio recurrence.

    ``s_n = 1/s_{n-1} + 2n/t`` is the ratio form of the (stable, dominant)
    forward recurrence for ``K``; the seed comes from the scaled pair
    ``K_1/K_0`` so no value can under- or overflow.
    """
    n = abs(_check_order(n))
    t = _check_arg(t, "t")
    s = float(sp.kve(1, t)) / float(sp.kve(0, t))
    for j in range(1, n + 1):
        s = 1.0 / s + 2.0 * j / t
    return s


def _hankel_ratio_down(n: int, x: float) -> complex:
    """``H_{n-1}(x) / H_n(x)`` for ``n >= 1`` (real ``x``)."""
    try:
        h = complex(_h1(n, x))
        hm = complex(_h1(n - 1, x))
        if math.isfinite(abs(h)) and math.isfinite(abs(hm)) and abs(h) < 1e300:
            return hm / h
    except (OverflowError, FloatingPointError):  # pragma: no cover
        pass
    # 1/rho_{j+1} = H_{j+1}/H_j = 2j/x - rho_j, forward direction is stable for H
    rho = complex(_h1(0, x)) / complex(_h1(1, x))
    for j in range(1, n):
        rho = 1.0 / (2.0 * j / x - rho)
    return rho


def hankel1_logderiv(n: int, km: complex, R: float) -> complex:
    """``H_n^{(1)'}(k_m R) / H_n^{(1)}(k_m R)`` without forming either factor.

    Propagating branch: real part from ``H_{|n|-1}/H_{|n|} - |n|/x`` (order
    ratio from direct values when representable, forward ratio recurrence
    otherwise); imaginary part ``2/(pi x |H_n|^2)`` from the Wronskian, which
    keeps full relative accuracy when it is far below the real part.
    Evanescent branch (``x = i t``): ``-i K_n'(t)/K_n(t)``, which is purely
    imaginary; ``i`` times the result is the real quantity ``K_n'/K_n``.
    """
    n = abs(_check_order(n))
    R = _check_arg(R, "R")
    if not is_evanescent(km):
        x = complex(km).real * R
        if n == 0:
            re = (-complex(_h1(1, x)) / complex(_h1(0, x))).real
        else:
            re = (_hankel_ratio_down(n, x) - n / x).real
        # Im part is tiny against Re for large n; take it from the Wronskian
        mod = abs(complex(_h1(n, x)))
        im = 2.0 / (math.pi * x) / mod / mod if math.isfinite(mod) else 0.0
        return complex(re, im)
    t = complex(km).imag * R
    if n == 0:
        kp_over_k = -bessel_k_ratio(0, t)
    else:
        kp_over_k = -1.0 / bessel_k_ratio(n - 1, t) - n / t
    return complex(0.0, -kp_over_k)


def hankel1_order_ratios(n: int, km: complex, R: float) -> tuple[complex, complex, complex]:
    """Return ``(L, H_{n-1}/H_n, H_{n+1}/H_n)`` at ``x = k_m R``, ``L = H_n'/H_n``.

    Valid for signed ``n``; uses ``H_n' = H_{n-1} - (n/x)H_n = (n/x)H_n - H_{n+1}``.
    """
    n = _check_order(n)
    x = complex(km) * R
    L = hankel1_logderiv(n, km, R)
    return L, L + n / x, n / x - L
