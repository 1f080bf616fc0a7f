r"""Coefficient-level norms and duality on the cylinder ``r = R``.

Traces are :class:`~ppwg.waveguide.TangentialTrace` objects holding the four
coefficient families ``(theta_s, theta_c, z_s, z_c)`` against the
unnormalized basis ``e^{i n theta} sin/cos(m pi z / Z)``. Throughout,
``alpha = i n / R`` (so ``alpha^2 = -n^2/R^2``) and ``beta = m pi / Z``.

Besides the literal norm sums this module provides the per-mode Gram
matrices of the ``Div``/``Curl`` norms, from which the sharp constants of the
pairing bound and of the norm equivalences are computed as generalized
eigenvalue problems.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .waveguide import TangentialTrace

__all__ = [
    "NormReport",
    "hs_norm",
    "l2_norm",
    "div_norm",
    "curl_norm",
    "pairing",
    "pairing_equivalent",
    "cal_C",
    "cal_D",
    "cal_matrices",
    "equiv_div_norm",
    "equiv_curl_norm",
    "gram_div",
    "gram_curl",
    "pairing_constant",
    "equivalence_interval",
]


@dataclass(frozen=True)
class NormReport:
    """A norm value with its per-mode squared contributions ``[n + N, m]``."""

    value: float
    family_breakdown: np.ndarray

    def to_text(self) -> str:
        lines = [f"value: {self.value:.16e}", f"squared: {self.value ** 2:.16e}"]
        N = (self.family_breakdown.shape[0] - 1) // 2
        for m in range(self.family_breakdown.shape[1]):
            for n in range(-N, N + 1):
                c = self.family_breakdown[n + N, m]
                if c:
                    lines.append(f"mode ({n},{m}): {c:.16e}")
        return "\n".join(lines) + "\n"


def _report(contrib: np.ndarray) -> NormReport:
    contrib = np.asarray(contrib, float)
    return NormReport(math.sqrt(math.fsum(contrib.ravel())), contrib)


def _grids(N: int, M: int, R: float, Z: float):
    n = np.arange(-N, N + 1)[:, None].astype(float)
    m = np.arange(M + 1)[None, :].astype(float)
    return n, m, 1j * n / R, m * np.pi / Z


def _split(trace: TangentialTrace):
    c = trace.coeffs
    return c[..., 0], c[..., 1], c[..., 2], c[..., 3]


def hs_norm(v, s: float) -> NormReport:
    """``H^s`` norm with weights ``(1+n^2+m^2)^s``.

    ``v`` is a :class:`TangentialTrace` (all four families summed) or a
    scalar coefficient array of shape ``(2N+1, M+1, 2)`` holding ``(c, s)``.
    """
    c = v.coeffs if isinstance(v, TangentialTrace) else np.asarray(v, complex)
    N = (c.shape[0] - 1) // 2
    n = np.arange(-N, N + 1)[:, None]
    m = np.arange(c.shape[1])[None, :]
    w = (1.0 + n * n + m * m) ** float(s)
    return _report(w * np.sum(np.abs(c) ** 2, axis=-1))


def l2_norm(v) -> NormReport:
    return hs_norm(v, 0.0)


def div_norm(trace: TangentialTrace, R: float, Z: float) -> NormReport:
    """``H^{-1/2}(Div)`` norm by the six-term coefficient sum."""
    N, M = trace.N_max, trace.M_max
    n, m, a, b = _grids(N, M, R, Z)
    ts, tc, zs, zc = _split(trace)
    w = (1.0 + n * n + m * m) ** -0.5
    body = (
        abs(ts) ** 2 + abs(tc) ** 2 + abs(zs) ** 2 + abs(zc) ** 2
        + abs(a * ts - b * zc) ** 2 + abs(a * tc + b * zs) ** 2
    )
    return _report(w * body)


def curl_norm(trace: TangentialTrace, R: float, Z: float) -> NormReport:
    """``H^{-1/2}(Curl)`` norm by the six-term coefficient sum."""
    N, M = trace.N_max, trace.M_max
    n, m, a, b = _grids(N, M, R, Z)
    ts, tc, zs, zc = _split(trace)
    w = (1.0 + n * n + m * m) ** -0.5
    body = (
        abs(ts) ** 2 + abs(tc) ** 2 + abs(zs) ** 2 + abs(zc) ** 2
        + abs(a * zs + b * tc) ** 2 + abs(a * zc - b * ts) ** 2
    )
    return _report(w * body)


def _csum(x: np.ndarray) -> complex:
    x = np.ravel(x)
    return complex(math.fsum(x.real), math.fsum(x.imag))


def _check_same(u: TangentialTrace, v: TangentialTrace) -> None:
    if u.coeffs.shape != v.coeffs.shape:
        raise ValueError("traces must share the truncation")
    if not math.isclose(u.radius, v.radius, rel_tol=1e-12):
        raise ValueError("traces live on different cylinders")


def pairing(u: TangentialTrace, v: TangentialTrace, Z: float) -> complex:
    """``pi R Z sum u . conj(v)`` over all four families (linear in ``u``)."""
    _check_same(u, v)
    return math.pi * u.radius * Z * _csum(u.coeffs * np.conj(v.coeffs))


def _xy(c: np.ndarray, a, b):
    ts, tc, zs, zc = c[..., 0], c[..., 1], c[..., 2], c[..., 3]
    return (
        a * ts - (b - 1j) * zc,
        a * zc - (b + 1j) * ts,
        a * tc + (b + 1j) * zs,
        a * zs + (b - 1j) * tc,
    )


def pairing_equivalent(u: TangentialTrace, v: TangentialTrace, Z: float) -> complex:
    """The pairing rewritten through the four combinations ``alpha u -/+ (beta -/+ i) u``."""
    _check_same(u, v)
    N, M = u.N_max, u.M_max
    _, _, a, b = _grids(N, M, u.radius, Z)
    rho = 1.0 + abs(a) ** 2 + b * b
    xu, xv = _xy(u.coeffs, a, b), _xy(v.coeffs, a, b)
    tot = sum(p * np.conj(q) for p, q in zip(xu, xv)) / rho
    return math.pi * u.radius * Z * _csum(tot)


def _equiv(trace: TangentialTrace, Z: float, curl: bool) -> NormReport:
    _, _, a, b = _grids(trace.N_max, trace.M_max, trace.radius, Z)
    rho = 1.0 + abs(a) ** 2 + b * b
    x1, x2, x3, x4 = (abs(t) ** 2 for t in _xy(trace.coeffs, a, b))
    lo, hi = rho**-0.5, rho**-1.5
    if curl:
        lo, hi = hi, lo
    return _report(lo * x1 + hi * x2 + lo * x3 + hi * x4)


def equiv_div_norm(trace: TangentialTrace, Z: float) -> NormReport:
    """Equivalent ``Div`` norm: weights ``rho^{-1/2}, rho^{-3/2}`` with ``rho = 1+|alpha|^2+beta^2``."""
    return _equiv(trace, Z, curl=False)


def equiv_curl_norm(trace: TangentialTrace, Z: float) -> NormReport:
    """Equivalent ``Curl`` norm: the ``Div`` weights swapped."""
    return _equiv(trace, Z, curl=True)


def cal_matrices(n: int, m: int, R: float, Z: float) -> tuple[np.ndarray, np.ndarray]:
    """4x4 matrices of ``C`` and ``D`` on ``(theta_s, theta_c, z_s, z_c)`` for one mode."""
    a = 1j * n / R
    b = m * math.pi / Z
    rho = 1.0 + abs(a) ** 2 + b * b
    p, q = rho**-0.5, rho**-1.5
    a2 = a * a
    C = np.zeros((4, 4), complex)
    D = np.zeros((4, 4), complex)
    TS, TC, ZS, ZC = range(4)
    C[TS, TS] = (b * b + 1) * q - a2 * p
    C[TS, ZC] = a * (b - 1j) * (p - q)
    C[ZC, TS] = a * (b + 1j) * (q - p)
    C[ZC, ZC] = (b * b + 1) * p - a2 * q
    C[TC, TC] = (b * b + 1) * q - a2 * p
    C[TC, ZS] = a * (b + 1j) * (q - p)
    C[ZS, TC] = a * (b - 1j) * (p - q)
    C[ZS, ZS] = (b * b + 1) * p - a2 * q
    D[TS, TS] = (b * b + 1) * p - a2 * q
    D[TS, ZC] = a * (b - 1j) * (q - p)
    D[ZC, TS] = a * (b + 1j) * (p - q)
    D[ZC, ZC] = (b * b + 1) * q - a2 * p
    D[TC, TC] = (b * b + 1) * p - a2 * q
    D[TC, ZS] = a * (b + 1j) * (p - q)
    D[ZS, TC] = a * (b - 1j) * (q - p)
    D[ZS, ZS] = (b * b + 1) * q - a2 * p
    return C, D


def _apply(trace: TangentialTrace, Z: float, which: int) -> TangentialTrace:
    N, M = trace.N_max, trace.M_max
    out = np.empty_like(trace.coeffs)
    for m in range(M + 1):
        for n in range(-N, N + 1):
            mat = cal_matrices(n, m, trace.radius, Z)[which]
            out[n + N, m] = mat @ trace.coeffs[n + N, m]
    return TangentialTrace(out, trace.radius)


def cal_C(u: TangentialTrace, Z: float) -> TangentialTrace:
    """The operator ``C``: ``H^{-1/2}(Div) -> H^{-1/2}(Curl)``."""
    return _apply(u, Z, 0)


def cal_D(v: TangentialTrace, Z: float) -> TangentialTrace:
    """The operator ``D``: ``H^{-1/2}(Curl) -> H^{-1/2}(Div)``."""
    return _apply(v, Z, 1)


def gram_div(n: int, m: int, R: float, Z: float) -> np.ndarray:
    """Hermitian ``G`` with ``div_norm^2 = sum_modes c^H G c``."""
    a, b = 1j * n / R, m * math.pi / Z
    e1 = np.array([a, 0, 0, -b])  # theta_s, z_c coupling
    e2 = np.array([0, a, b, 0])
    G = np.eye(4) + np.outer(e1.conj(), e1) + np.outer(e2.conj(), e2)
    return G * (1.0 + n * n + m * m) ** -0.5


def gram_curl(n: int, m: int, R: float, Z: float) -> np.ndarray:
    a, b = 1j * n / R, m * math.pi / Z
    e1 = np.array([0, b, a, 0])
    e2 = np.array([-b, 0, 0, a])
    G = np.eye(4) + np.outer(e1.conj(), e1) + np.outer(e2.conj(), e2)
    return G * (1.0 + n * n + m * m) ** -0.5


def _inv_sqrt(G: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(G)
    return (V / np.sqrt(w)) @ V.conj().T


def pairing_constant(N_max: int, M_max: int, R: float, Z: float) -> float:
    """Smallest ``C`` with ``|<u,v>| <= C div_norm(u) curl_norm(v)`` on the truncation."""
    worst = 0.0
    for m in range(M_max + 1):
        for n in range(-N_max, N_max + 1):
            A = _inv_sqrt(gram_div(n, m, R, Z)) @ _inv_sqrt(gram_curl(n, m, R, Z))
            worst = max(worst, float(np.linalg.norm(A, 2)))
    return math.pi * R * Z * worst


def equivalence_interval(N_max: int, M_max: int, R: float, Z: float, which: str = "C") -> tuple[float, float]:
    """Range of ``curl_norm(C u)/div_norm(u)`` (``which='C'``) or ``div_norm(D v)/curl_norm(v)``.

    Also accepts ``'div-equiv'`` and ``'curl-equiv'`` for the ratio of the
    literal norm to its equivalent form. Returned as ``(c1, c2)``.
    """
    lo, hi = math.inf, 0.0
    for m in range(M_max + 1):
        for n in range(-N_max, N_max + 1):
            C, D = cal_matrices(n, m, R, Z)
            Gd, Gc = gram_div(n, m, R, Z), gram_curl(n, m, R, Z)
            if which == "C":
                num, den = C.conj().T @ Gc @ C, Gd
            elif which == "D":
                num, den = D.conj().T @ Gd @ D, Gc
            elif which in ("div-equiv", "curl-equiv"):
                num = Gd if which == "div-equiv" else Gc
                den = _equiv_gram(n, m, R, Z, curl=which == "curl-equiv")
            else:
                raise ValueError(f"unknown interval {which!r}")
            ev = linalg.eigh(num, den, eigvals_only=True)
            lo, hi = min(lo, float(ev[0])), max(hi, float(ev[-1]))
    return math.sqrt(lo), math.sqrt(hi)


def _equiv_gram(n: int, m: int, R: float, Z: float, curl: bool) -> np.ndarray:
    a, b = 1j * n / R, m * math.pi / Z
    rho = 1.0 + abs(a) ** 2 + b * b
    rows = [
        np.array([a, 0, 0, -(b - 1j)]),
        np.array([-(b + 1j), 0, 0, a]),
        np.array([0, a, b + 1j, 0]),
        np.array([0, b - 1j, a, 0]),
    ]
    lo, hi = rho**-0.5, rho**-1.5
    ws = (hi, lo, hi, lo) if curl else (lo, hi, lo, hi)
    return sum(w * np.outer(r.conj(), r) for w, r in zip(ws, rows))
