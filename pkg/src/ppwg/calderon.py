r"""Per-mode Calderón (electric-to-magnetic) symbol on the cylinder ``r = R``.

For an outgoing mode with coefficients ``c = (A+, A-, B)`` the traces on the
cylinder are linear in ``c``:

* ``Q c = (nu x E | z, nu x E | theta, div E)``
* ``P c = (nu x curl E | theta, nu x curl E | z)``

so ``nu x curl E = W (nu x E)`` with ``W`` the first two columns of
``P Q^{-1}``. With ``h = H_n / (k_m H_n')``, ``alpha = i n / R`` and signed
``beta`` (``+m pi/Z`` for the physical parity, ``-m pi/Z`` for the mirrored
one)

.. math::
    W = \begin{pmatrix} k_m^2 h & -\alpha\beta h \\
        -\alpha\beta h & \alpha^2\beta^2 h / k_m^2 + k^2/(k_m^2 h) \end{pmatrix}.

Only the logarithmic derivative ``H_n'/H_n`` enters ``W``, so the symbol is
finite for any order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .special_fn import hankel1_logderiv, is_evanescent
from .waveguide import (
    ModeIndex,
    OutgoingCoefficients,
    TangentialTrace,
    WaveguideConfig,
    axial_wavenumber,
    family_slots,
    mode_basis,
    signed_beta,
)

__all__ = [
    "ModeMatrices",
    "CalderonSymbol",
    "SplitSymbols",
    "mode_matrices",
    "q_inverse",
    "w_symbol",
    "w_tilde",
    "symbol_table",
    "apply_calderon",
    "split_symbols",
    "continuity_diagnostic",
    "smoothing_diagnostic",
    "r_coefficient",
    "mode_flux",
    "boundary_flux",
    "surface_div",
    "surface_curl",
]


@dataclass(frozen=True)
class ModeMatrices:
    mode: ModeIndex
    parity: int
    P: np.ndarray
    Q: np.ndarray
    Q_inv: np.ndarray
    W: np.ndarray
    W_tilde: np.ndarray
    det_Q: complex


@dataclass(frozen=True)
class CalderonSymbol:
    mode: ModeIndex
    parity: int
    W: np.ndarray

    @property
    def W_tilde(self) -> np.ndarray:
        return w_tilde(self.W)


@dataclass(frozen=True)
class SplitSymbols:
    """``T_A``, ``T_B`` and ``T_C`` as 2x2 maps from ``(g_z, g_theta)`` to ``(out_theta, out_z)``.

    ``T_A + T_C`` equals the full symbol for every mode except ``(0, 0)``,
    where both projections have zero numerators and all three parts vanish.
    ``T_B`` is the principal part of ``T_A`` and ``T_A - T_B`` is the
    smoothing remainder.
    """

    TA: np.ndarray
    TB: np.ndarray
    TC: np.ndarray

    @property
    def remainder(self) -> np.ndarray:
        return self.TA - self.TB


def w_tilde(W: np.ndarray) -> np.ndarray:
    """Flip the second column: the symbol seen from ``(U_theta, U_z)`` rather than ``nu x U``."""
    return np.array([[W[0, 0], -W[0, 1]], [W[1, 0], -W[1, 1]]])


def _h_ratio(n: int, m: int, cfg: WaveguideConfig, radius: float) -> tuple[complex, complex]:
    km = axial_wavenumber(m, cfg).value
    L = hankel1_logderiv(n, km, radius)
    return km, 1.0 / (km * L)


def _w_from_h(n: int, m: int, km: complex, h: complex, cfg: WaveguideConfig, radius: float,
              parity: int) -> np.ndarray:
    alpha = 1j * n / radius
    beta = signed_beta(m, cfg, parity)
    k2 = cfg.k * cfg.k
    w11 = km * km * h
    w12 = -alpha * beta * h
    w22 = alpha**2 * beta**2 / (km * km) * h + k2 / (km * km * h)
    return np.array([[w11, w12], [w12, w22]], dtype=complex)


def w_symbol(mode, cfg: WaveguideConfig, parity: int = 1, radius: float | None = None,
             perturb_w11: float = 0.0) -> CalderonSymbol:
    """Explicit symbol ``W_nm`` from the logarithmic derivative of ``H_n``.

    ``perturb_w11`` scales ``W11`` by ``1 + perturb_w11`` (fault injection).
    """
    n, m = mode
    radius = cfg.R if radius is None else radius
    km, h = _h_ratio(n, m, cfg, radius)
    W = _w_from_h(n, m, km, h, cfg, radius, parity)
    if perturb_w11:
        W[0, 0] *= 1.0 + perturb_w11
    return CalderonSymbol(ModeIndex(n, m), parity, W)


def q_inverse(n: int, m: int, cfg: WaveguideConfig, radius: float | None = None, parity: int = 1) -> np.ndarray:
    """Closed-form ``Q^{-1}``; rows give ``A+``, ``A-``, ``B`` from ``(g_z, g_theta, div)``."""
    radius = cfg.R if radius is None else radius
    mb = mode_basis(n, m, radius, cfg, "h", parity)
    fm, f0, fp = mb.f
    km, beta = mb.km, mb.beta
    L = hankel1_logderiv(n, km, radius)
    rm, rp = L + n / (km * radius), n / (km * radius) - L  # H_{n-1}/H_n, H_{n+1}/H_n
    d0 = f0 * L
    s = 1.0 / (km * f0 * L)
    return np.array(
        [
            [-1j / d0, -beta * rm * s, rm * s],
            [-1j / d0, -beta * rp * s, rp * s],
            [0.0, -1.0 / f0, 0.0],
        ],
        dtype=complex,
    )


def mode_matrices(mode, radius: float | None, cfg: WaveguideConfig, parity: int = 1) -> ModeMatrices:
    n, m = mode
    radius = cfg.R if radius is None else radius
    mb = mode_basis(n, m, radius, cfg, "h", parity)
    Qi = q_inverse(n, m, cfg, radius, parity)
    W = w_symbol(mode, cfg, parity, radius).W
    f0 = mb.f[1]
    d0 = f0 * hankel1_logderiv(n, mb.km, radius)
    det = mb.km / 2j * f0 * f0 * d0
    return ModeMatrices(ModeIndex(n, m), parity, mb.P, mb.Q, Qi, W, w_tilde(W), det)


@lru_cache(maxsize=64)
def _symbol_table_cached(cfg: WaveguideConfig, parity: int, perturb_w11: float) -> np.ndarray:
    N, M = cfg.N_max, cfg.M_max
    tab = np.zeros((2 * N + 1, M + 1, 2, 2), complex)
    for m in cfg.axial_indices():
        for n in range(-N, N + 1):
            tab[n + N, m] = w_symbol((n, m), cfg, parity, perturb_w11=perturb_w11).W
    tab.setflags(write=False)
    return tab


def symbol_table(cfg: WaveguideConfig, parity: int = 1, perturb_w11: float = 0.0) -> np.ndarray:
    """``W`` for every mode of ``cfg``, shape ``(2N+1, M+1, 2, 2)``; read-only and cached."""
    return _symbol_table_cached(cfg, parity, float(perturb_w11))


def apply_calderon(trace: TangentialTrace, cfg: WaveguideConfig, perturb_w11: float = 0.0) -> TangentialTrace:
    """Mode-diagonal action of the Calderón operator on a trace of ``nu x U``.

    Both parity families are mapped: ``(z_s, theta_c) -> (theta_s, z_c)`` by
    ``W(beta)`` and ``(z_c, theta_s) -> (theta_c, z_s)`` by ``W(-beta)``.
    Modes beyond the truncation of ``cfg`` are ignored.
    """
    if not math.isclose(trace.radius, cfg.R, rel_tol=1e-12):
        raise ValueError(f"trace lives on r={trace.radius}, operator on R={cfg.R}")
    N, M = min(trace.N_max, cfg.N_max), min(trace.M_max, cfg.M_max)
    out = np.zeros_like(trace.coeffs)
    c = trace.coeffs
    tn = slice(trace.N_max - N, trace.N_max + N + 1)
    for parity in (1, -1):
        W = symbol_table(cfg, parity, perturb_w11)[cfg.N_max - N : cfg.N_max + N + 1, : M + 1]
        (oth, oz), (iz, ith) = family_slots(parity)
        gz, gth = c[tn, : M + 1, iz], c[tn, : M + 1, ith]
        out[tn, : M + 1, oth] = W[..., 0, 0] * gz + W[..., 0, 1] * gth
        out[tn, : M + 1, oz] = W[..., 1, 0] * gz + W[..., 1, 1] * gth
    for m in cfg.cutoff_modes:
        if m <= M:
            out[:, m] = 0.0
    out[:, 0, 0] = 0.0  # sin(0) slots
    out[:, 0, 2] = 0.0
    return TangentialTrace(out, trace.radius)


def split_symbols(mode, cfg: WaveguideConfig, parity: int = 1) -> SplitSymbols:
    """Split of the symbol into a surface-divergence-free part and a curl-free part.

    With ``a = alpha``, ``b`` the signed ``beta`` and outputs written as
    ``(theta, z)`` coefficients,

    * ``T_A`` projects onto ``(b, a)``, the kernel of the surface divergence,
    * ``T_C`` projects onto ``(a, b)``, the kernel of the surface curl,
    * ``T_B = w (b g_z + a g_theta) (b, a)`` with ``w = 1/|a|`` for propagating
      and ``w = -h`` for evanescent modes.

    For ``n = 0`` propagating modes ``1/|a|`` is replaced by ``R``. At
    ``(n, m) = (0, 0)`` every part is zero.
    """
    n, m = mode
    R = cfg.R
    W = w_symbol(mode, cfg, parity).W
    a = 1j * n / R
    b = signed_beta(m, cfg, parity)
    den = abs(a) ** 2 + b * b
    ua = np.array([b, a])
    uc = np.array([a, b])
    if den == 0.0:
        TA = np.zeros((2, 2), complex)
        TC = np.zeros((2, 2), complex)
    else:
        # c_A = (b T_theta - a T_z)/den, c_C = (-a T_theta + b T_z)/den
        rowA = (b * W[0] - a * W[1]) / den
        rowC = (-a * W[0] + b * W[1]) / den
        TA = np.outer(ua, rowA)
        TC = np.outer(uc, rowC)
    km, h = _h_ratio(n, m, cfg, R)
    if is_evanescent(km):
        w = -h
    else:
        w = R / max(abs(n), 1)
    TB = w * np.outer(ua, np.array([b, a]))
    return SplitSymbols(TA, TB.astype(complex), TC)


def surface_div(theta_coef: complex, z_coef: complex, n: int, m: int, cfg: WaveguideConfig,
                parity: int = 1, radius: float | None = None) -> complex:
    """Coefficient of the surface divergence of ``theta_coef e_theta + z_coef e_z`` of one family."""
    radius = cfg.R if radius is None else radius
    return 1j * n / radius * theta_coef - signed_beta(m, cfg, parity) * z_coef


def surface_curl(theta_coef: complex, z_coef: complex, n: int, m: int, cfg: WaveguideConfig,
                 parity: int = 1, radius: float | None = None) -> complex:
    """Coefficient of the scalar surface curl (``e_r`` component) of one family."""
    radius = cfg.R if radius is None else radius
    return 1j * n / radius * z_coef - signed_beta(m, cfg, parity) * theta_coef


def continuity_diagnostic(mode, cfg: WaveguideConfig) -> tuple[float, float]:
    """``(|h| (1+n^2+m^2)^{1/2}, |n^2/(k_m R)^2 - (H_n'/H_n)^2|)``."""
    n, m = mode
    km = axial_wavenumber(m, cfg).value
    L = hankel1_logderiv(n, km, cfg.R)
    x = km * cfg.R
    q1 = abs(1.0 / (km * L)) * math.sqrt(1 + n * n + m * m)
    q2 = abs(n * n / (x * x) - L * L)
    return q1, q2


def smoothing_diagnostic(mode, cfg: WaveguideConfig) -> float:
    """``|h alpha^2/k_m^2 + H_n'/(k_m H_n)| (1+n^2+m^2)^{1/2}``."""
    n, m = mode
    km = axial_wavenumber(m, cfg).value
    L = hankel1_logderiv(n, km, cfg.R)
    h = 1.0 / (km * L)
    alpha2 = -(n * n) / cfg.R**2
    return abs(h * alpha2 / (km * km) + L / km) * math.sqrt(1 + n * n + m * m)


def r_coefficient(mode, cfg: WaveguideConfig) -> complex:
    """``R_nm`` assembled from the flipped symbol."""
    n, m = mode
    Wt = w_tilde(w_symbol(mode, cfg).W)
    c = 1j * n * m * math.pi / (cfg.R * cfg.Z)
    beta2 = (m * math.pi / cfg.Z) ** 2
    return complex(Wt[0, 0] * n * n / cfg.R**2 - Wt[0, 1] * c + Wt[1, 0] * c + Wt[1, 1] * beta2)


def _z_weights(m: int, parity: int) -> np.ndarray:
    """``(2/Z) int_0^Z`` of the squared ``z`` factor of ``(E_r, E_theta, E_z)``."""
    ws = 0.0 if m == 0 else 1.0
    wc = 2.0 if m == 0 else 1.0
    return np.array([ws, ws, wc]) if parity == 1 else np.array([wc, wc, ws])


def mode_flux(n: int, m: int, radius: float, cfg: WaveguideConfig, parity: int = 1,
              coef_h=None, coef_j=None) -> float:
    """``Im int (nu x curl E) . conj(E_T)`` over the cylinder for one mode.

    Evaluated as ``-pi r Z sum_xi w_xi Im[d_r E_xi conj(E_xi)]`` where
    ``E = E_H coef_h + E_J coef_j`` and ``w_xi`` accounts for the true
    ``z``-integral of the axial factor (doubled for ``cos`` at ``m = 0``).
    """
    E = np.zeros(3, complex)
    dE = np.zeros(3, complex)
    for radial, coef in (("h", coef_h), ("j", coef_j)):
        if coef is None or not np.any(coef):
            continue
        mb = mode_basis(n, m, radius, cfg, radial, parity)
        E += mb.E @ np.asarray(coef)
        dE += mb.dE @ np.asarray(coef)
    terms = _z_weights(m, parity) * np.imag(dE * np.conj(E))
    return -math.pi * radius * cfg.Z * math.fsum(terms)


def boundary_flux(out: OutgoingCoefficients, radius: float, cfg: WaveguideConfig) -> float:
    """Total ``Im int_{r=radius} (nu x curl E) . conj(E_T) ds`` of an outgoing series."""
    vals = []
    for (n, m), c in out.items():
        if m in cfg.cutoff_modes or not any(c):
            continue
        vals.append(mode_flux(n, m, radius, cfg, out.parity, coef_h=np.array(c)))
    return math.fsum(vals)
