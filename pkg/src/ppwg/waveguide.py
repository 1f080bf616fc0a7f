r"""Geometry, mode bookkeeping and field synthesis for the PEC parallel-plate guide.

The guide occupies ``0 < z < Z``. Outside the obstacle a Maxwell field is a
sum over modes ``(n, m)`` with ``e^{i n theta}`` azimuthal dependence and
``sin``/``cos`` axial dependence. For the physical (PEC) parity

.. math::
    E_r = \tfrac12 (A^+ f_{n+1} + A^- f_{n-1}) \sin\beta z,\quad
    E_\theta = \tfrac{1}{2i} (A^+ f_{n+1} - A^- f_{n-1}) \sin\beta z,\quad
    E_z = B f_n \cos\beta z,

with ``f = H^{(1)}(k_m r)`` for outgoing and ``f = J(k_m r)`` for regular
fields and ``beta = m pi / Z``. The mirrored parity swaps ``sin`` and ``cos``
and is obtained everywhere by ``beta -> -beta``; it is needed because
tangential traces on the artificial boundary carry all four families.
"""

from __future__ import annotations

import math
from functools import lru_cache
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numpy as np
from scipy import fft as sp_fft
from scipy import special as sp

from . import special_fn
from .special_fn import BesselOverflowError, is_evanescent

__all__ = [
    "ConfigError",
    "CutoffError",
    "WaveguideConfig",
    "ModeIndex",
    "AxialWavenumber",
    "TangentialTrace",
    "OutgoingCoefficients",
    "FieldSample",
    "GridSpec",
    "TRACE_COMPONENTS",
    "axial_wavenumber",
    "signed_beta",
    "radial_triple",
    "ModeBasis",
    "mode_basis",
    "analyze_trace",
    "synthesize_trace",
    "synthesize_field",
    "field_grid",
    "tangential_trace",
    "tangential_derivative_trace",
    "tangential_field",
    "family_slots",
    "radiation_residual",
    "csum",
    "nu_cross",
]

TRACE_COMPONENTS = ("theta_s", "theta_c", "z_s", "z_c")
TH_S, TH_C, Z_S, Z_C = range(4)
OUTGOING_COMPONENTS = ("A_plus", "A_minus", "B")


class ConfigError(ValueError):
    """Invalid waveguide configuration."""


class CutoffError(ConfigError):
    """Wavenumber within the guard band of a cutoff ``k = m pi / Z``."""


def csum(values) -> complex:
    """Compensated sum of complex values in the given order."""
    values = list(values)
    return complex(math.fsum(v.real for v in values), math.fsum(v.imag for v in values))


@dataclass(frozen=True)
class WaveguideConfig:
    """Physical and truncation parameters.

    ``exclude_cutoff`` lets a configuration whose wavenumber sits exactly on
    a cutoff ``k = m pi/Z`` (e.g. ``k = 2``, ``Z = pi``, ``m = 2``) be used
    with that axial index dropped from every mode enumeration. Per-mode
    operations on an excluded index still raise :class:`CutoffError`.
    """

    k: float
    Z: float
    R: float
    a: float | None = None
    eta: float = 1.0
    N_max: int = 16
    M_max: int = 16
    tol: float = 1e-9
    cutoff_guard: float | None = None
    exclude_cutoff: bool = False
    cutoff_modes: tuple[int, ...] = field(init=False, default=())

    def __post_init__(self):
        for name in ("k", "Z", "R", "eta", "tol"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not math.isfinite(v) or v <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.a is not None:
            if not math.isfinite(self.a) or not 0 < self.a < self.R:
                raise ConfigError("a must satisfy 0 < a < R")
        for name in ("N_max", "M_max"):
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise ConfigError(f"{name} must be a non-negative integer")
            object.__setattr__(self, name, int(v))
        if self.cutoff_guard is None:
            object.__setattr__(self, "cutoff_guard", 1e-8 * math.pi / self.Z)
        bad = tuple(m for m in range(self.M_max + 1) if self.near_cutoff(m))
        if bad and not self.exclude_cutoff:
            raise CutoffError(
                f"k={self.k} is within {self.cutoff_guard:.3g} of the cutoff "
                f"m*pi/Z for m={bad[0]}"
            )
        object.__setattr__(self, "cutoff_modes", bad)

    def near_cutoff(self, m: int) -> bool:
        return abs(self.k - m * math.pi / self.Z) <= self.cutoff_guard

    def replace(self, **changes) -> "WaveguideConfig":
        kw = {
            f: getattr(self, f)
            for f in ("k", "Z", "R", "a", "eta", "N_max", "M_max", "tol", "cutoff_guard", "exclude_cutoff")
        }
        if "Z" in changes and "cutoff_guard" not in changes:
            kw["cutoff_guard"] = None
        kw.update(changes)
        return WaveguideConfig(**kw)

    def axial_indices(self) -> list[int]:
        return [m for m in range(self.M_max + 1) if m not in self.cutoff_modes]

    def modes(self) -> Iterator["ModeIndex"]:
        """Modes in the fixed reduction order: m ascending, then n ascending."""
        for m in self.axial_indices():
            for n in range(-self.N_max, self.N_max + 1):
                yield ModeIndex(n, m)

    def is_propagating(self, m: int) -> bool:
        return self.k > m * math.pi / self.Z


class ModeIndex(NamedTuple):
    n: int
    m: int


@dataclass(frozen=True)
class AxialWavenumber:
    m: int
    value: complex
    kind: str  # "propagating" | "evanescent"

    @property
    def propagating(self) -> bool:
        return self.kind == "propagating"


def axial_wavenumber(m: int, cfg: WaveguideConfig) -> AxialWavenumber:
    """Branch-resolved ``k_m = sqrt(k^2 - (m pi/Z)^2)`` with ``Im k_m >= 0``."""
    if m < 0:
        raise ValueError("axial index must be non-negative")
    if cfg.near_cutoff(m):
        raise CutoffError(f"mode m={m} is within the cutoff guard (k={cfg.k}, Z={cfg.Z})")
    beta = m * math.pi / cfg.Z
    d = cfg.k * cfg.k - beta * beta
    if cfg.k > beta:
        return AxialWavenumber(m, complex(math.sqrt(d), 0.0), "propagating")
    return AxialWavenumber(m, complex(0.0, math.sqrt(-d)), "evanescent")


def signed_beta(m: int, cfg: WaveguideConfig, parity: int = 1) -> float:
    return parity * m * math.pi / cfg.Z


def _ipow(p: int) -> complex:
    return (1.0, 1j, -1.0, -1j)[p % 4]


def radial_triple(n: int, km: complex, r: float, radial: str = "h") -> np.ndarray:
    """``[f_{n-1}, f_n, f_{n+1}]`` at ``k_m r`` for ``f = H^{(1)}`` or ``J``."""
    orders = np.array([n - 1, n, n + 1])
    if not is_evanescent(km):
        x = km.real * r
        vals = sp.jv(orders, x) + 1j * sp.yv(orders, x) if radial == "h" else sp.jv(orders, x).astype(complex)
    else:
        t = km.imag * r
        if radial == "h":
            phase = np.array([_ipow(-(o + 1)) for o in orders])
            kv = sp.kve(np.abs(orders), t)
            with np.errstate(over="ignore", under="ignore"):
                vals = 2.0 / math.pi * phase * kv * math.exp(-t)
        else:
            phase = np.array([_ipow(o) for o in orders])
            vals = phase * sp.iv(np.abs(orders), t)
    vals = np.asarray(vals, dtype=complex)
    if not np.all(np.isfinite(vals)) or np.max(np.abs(vals)) > 1e300:
        raise BesselOverflowError(f"radial functions of order {n} overflow at k_m r={km * r}")
    return vals


@dataclass(frozen=True)
class ModeBasis:
    """Per-mode linear maps from a coefficient triple ``(A+, A-, B)``.

    ``E``/``dE``: cylindrical field components and their ``r``-derivatives.
    ``P``: the two components of ``nu x curl E`` on the cylinder (θ then z).
    ``Q``: the two components of ``nu x E`` followed by the divergence row.
    """

    n: int
    m: int
    parity: int
    km: complex
    beta: float
    f: np.ndarray
    E: np.ndarray
    dE: np.ndarray
    P: np.ndarray
    Q: np.ndarray


def mode_basis(n: int, m: int, r: float, cfg: WaveguideConfig, radial: str = "h", parity: int = 1) -> ModeBasis:
    """Field, trace and divergence maps of mode ``(n, m)`` at radius ``r``.

    Results are cached per ``(n, m, r, cfg, radial, parity)``; the arrays
    are read-only.
    """
    return _mode_basis(int(n), int(m), float(r), cfg, radial, int(parity))


@lru_cache(maxsize=16384)
def _mode_basis(n: int, m: int, r: float, cfg: WaveguideConfig, radial: str, parity: int) -> ModeBasis:
    km = axial_wavenumber(m, cfg).value
    beta = signed_beta(m, cfg, parity)
    fm, f0, fp = radial_triple(n, km, r, radial)
    x = km * r
    d0 = 0.5 * (fm - fp)
    dp = f0 - (n + 1) / x * fp
    dm = (n - 1) / x * fm - f0
    E = np.array(
        [
            [0.5 * fp, 0.5 * fm, 0.0],
            [fp / 2j, -fm / 2j, 0.0],
            [0.0, 0.0, f0],
        ],
        dtype=complex,
    )
    dE = km * np.array(
        [
            [0.5 * dp, 0.5 * dm, 0.0],
            [dp / 2j, -dm / 2j, 0.0],
            [0.0, 0.0, d0],
        ],
        dtype=complex,
    )
    P = np.array(
        [
            [0.5j * km * f0, 0.5j * km * f0, 0.0],
            [0.5 * beta * fp, 0.5 * beta * fm, -km * d0],
        ],
        dtype=complex,
    )
    Q = np.array(
        [
            [fp / 2j, -fm / 2j, 0.0],
            [0.0, 0.0, -f0],
            [0.5 * km * f0, -0.5 * km * f0, -beta * f0],
        ],
        dtype=complex,
    )
    f = np.array([fm, f0, fp])
    for a in (f, E, dE, P, Q):
        a.setflags(write=False)
    return ModeBasis(n, m, parity, km, beta, f, E, dE, P, Q)


def family_slots(parity: int) -> tuple[tuple[int, int], tuple[int, int]]:
    """Trace slots ``(out_theta, out_z)`` and ``(in_z, in_theta)`` of a family.

    Output/``U_T`` slots hold ``nu x curl E`` and ``E_T``; input slots hold
    ``nu x E``. The physical family uses ``(θs, zc)`` and ``(zs, θc)``.
    """
    if parity == 1:
        return (TH_S, Z_C), (Z_S, TH_C)
    return (TH_C, Z_S), (Z_C, TH_S)


@dataclass(frozen=True)
class TangentialTrace:
    """Coefficients of a tangential field on the cylinder ``r = radius``.

    ``coeffs[n + N_max, m, c]`` with ``c`` indexing ``TRACE_COMPONENTS``.
    Coefficients multiply ``e^{i n theta} cos/sin(m pi z / Z)`` unnormalized.
    """

    coeffs: np.ndarray
    radius: float

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.ndim != 3 or c.shape[2] != 4 or c.shape[0] % 2 != 1:
            raise ValueError("trace coefficients must have shape (2N+1, M+1, 4)")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def N_max(self) -> int:
        return (self.coeffs.shape[0] - 1) // 2

    @property
    def M_max(self) -> int:
        return self.coeffs.shape[1] - 1

    @classmethod
    def zeros(cls, N_max: int, M_max: int, radius: float) -> "TangentialTrace":
        return cls(np.zeros((2 * N_max + 1, M_max + 1, 4), complex), radius)

    @classmethod
    def from_dict(cls, entries: dict, N_max: int, M_max: int, radius: float) -> "TangentialTrace":
        c = np.zeros((2 * N_max + 1, M_max + 1, 4), complex)
        for (n, m), vals in entries.items():
            c[n + N_max, m] = vals
        return cls(c, radius)

    @classmethod
    def random(cls, rng: np.random.Generator, N_max: int, M_max: int, radius: float) -> "TangentialTrace":
        shape = (2 * N_max + 1, M_max + 1, 4)
        c = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        c[:, 0, TH_S] = 0.0
        c[:, 0, Z_S] = 0.0
        return cls(c, radius)

    def __getitem__(self, mode) -> tuple[complex, ...]:
        n, m = mode
        if abs(n) > self.N_max or not 0 <= m <= self.M_max:
            return (0j,) * 4
        return tuple(complex(v) for v in self.coeffs[n + self.N_max, m])

    def items(self):
        for m in range(self.M_max + 1):
            for n in range(-self.N_max, self.N_max + 1):
                yield ModeIndex(n, m), self[n, m]

    def __add__(self, other: "TangentialTrace") -> "TangentialTrace":
        return TangentialTrace(self.coeffs + other.coeffs, self.radius)

    def __sub__(self, other: "TangentialTrace") -> "TangentialTrace":
        return TangentialTrace(self.coeffs - other.coeffs, self.radius)

    def __mul__(self, s: complex) -> "TangentialTrace":
        return TangentialTrace(self.coeffs * s, self.radius)

    __rmul__ = __mul__

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.coeffs))) if self.coeffs.size else 0.0


@dataclass(frozen=True)
class OutgoingCoefficients:
    """Per-mode ``(A+, A-, B)`` of an outgoing field, ``coeffs[n + N_max, m]``."""

    coeffs: np.ndarray
    parity: int = 1

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.ndim != 3 or c.shape[2] != 3 or c.shape[0] % 2 != 1:
            raise ValueError("outgoing coefficients must have shape (2N+1, M+1, 3)")
        if self.parity not in (1, -1):
            raise ValueError("parity must be +1 or -1")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def N_max(self) -> int:
        return (self.coeffs.shape[0] - 1) // 2

    @property
    def M_max(self) -> int:
        return self.coeffs.shape[1] - 1

    @classmethod
    def zeros(cls, N_max: int, M_max: int, parity: int = 1) -> "OutgoingCoefficients":
        return cls(np.zeros((2 * N_max + 1, M_max + 1, 3), complex), parity)

    @classmethod
    def from_dict(cls, entries: dict, N_max: int, M_max: int, parity: int = 1) -> "OutgoingCoefficients":
        c = np.zeros((2 * N_max + 1, M_max + 1, 3), complex)
        for (n, m), vals in entries.items():
            c[n + N_max, m] = vals
        return cls(c, parity)

    @classmethod
    def random(cls, rng: np.random.Generator, cfg: WaveguideConfig, N_max: int | None = None,
               M_max: int | None = None, parity: int = 1) -> "OutgoingCoefficients":
        """Random divergence-compatible coefficients (``A+`` solved from the constraint)."""
        N = cfg.N_max if N_max is None else N_max
        M = cfg.M_max if M_max is None else M_max
        c = np.zeros((2 * N + 1, M + 1, 3), complex)
        for m in range(M + 1):
            if m in cfg.cutoff_modes:
                continue
            km = axial_wavenumber(m, cfg).value
            beta = signed_beta(m, cfg, parity)
            for n in range(-N, N + 1):
                am, b = rng.standard_normal(2) + 1j * rng.standard_normal(2)
                c[n + N, m] = (am + 2 * beta * b / km, am, b)
        return cls(c, parity)

    def __getitem__(self, mode) -> tuple[complex, complex, complex]:
        n, m = mode
        if abs(n) > self.N_max or not 0 <= m <= self.M_max:
            return (0j, 0j, 0j)
        return tuple(complex(v) for v in self.coeffs[n + self.N_max, m])

    def items(self):
        for m in range(self.M_max + 1):
            for n in range(-self.N_max, self.N_max + 1):
                yield ModeIndex(n, m), self[n, m]

    def divergence_residual(self, cfg: WaveguideConfig) -> float:
        """Largest ``|(k_m/2)(A+ - A-) - beta B|`` over the stored modes."""
        worst = 0.0
        for (n, m), (ap, am, b) in self.items():
            if m in cfg.cutoff_modes:
                continue
            km = axial_wavenumber(m, cfg).value
            worst = max(worst, abs(0.5 * km * (ap - am) - signed_beta(m, cfg, self.parity) * b))
        return worst


@dataclass(frozen=True)
class FieldSample:
    position: tuple[float, float, float]
    E: tuple[complex, complex, complex]

    def __post_init__(self):
        r, theta, z = self.position
        if r <= 0:
            raise ValueError("r must be positive")


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid on the cylinder: ``theta_j = 2 pi j / n_theta``, midpoint ``z`` nodes."""

    n_theta: int
    n_z: int
    Z: float

    @property
    def theta(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.n_theta) / self.n_theta

    @property
    def z(self) -> np.ndarray:
        return (np.arange(self.n_z) + 0.5) * self.Z / self.n_z


def _z_basis(grid: GridSpec, M: int) -> tuple[np.ndarray, np.ndarray]:
    arg = np.outer(grid.z, np.arange(M + 1)) * np.pi / grid.Z
    return np.cos(arg), np.sin(arg)


def synthesize_trace(trace: TangentialTrace, grid: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate the θ and z components on ``grid``; arrays of shape ``(n_theta, n_z)``."""
    N, M = trace.N_max, trace.M_max
    e = np.exp(1j * np.outer(grid.theta, np.arange(-N, N + 1)))
    cz, sz = _z_basis(grid, M)
    c = trace.coeffs
    v_theta = e @ (c[:, :, TH_C] @ cz.T + c[:, :, TH_S] @ sz.T)
    v_z = e @ (c[:, :, Z_C] @ cz.T + c[:, :, Z_S] @ sz.T)
    return v_theta, v_z


def _dct_coeffs(x: np.ndarray, M: int) -> np.ndarray:
    """Coefficients of ``sum_m c_m cos(m pi z/Z)`` from midpoint samples (last axis)."""
    nz = x.shape[-1]
    y = sp_fft.dct(x, type=2, axis=-1)[..., : M + 1] / nz
    y[..., 0] *= 0.5
    return y


def _dst_coeffs(x: np.ndarray, M: int) -> np.ndarray:
    """Coefficients of ``sum_{m>=1} s_m sin(m pi z/Z)``; index 0 is zero."""
    nz = x.shape[-1]
    y = sp_fft.dst(x, type=2, axis=-1)[..., :M] / nz
    out = np.zeros(x.shape[:-1] + (M + 1,), complex)
    out[..., 1:] = y
    return out


def analyze_trace(v_theta: np.ndarray, v_z: np.ndarray, cfg: WaveguideConfig, grid: GridSpec,
                  radius: float | None = None, families: str = "E") -> TangentialTrace:
    """Recover trace coefficients from grid samples.

    FFT in ``theta``. In ``z`` the cosines and the sines are each complete on
    ``(0, Z)``, so a component is resolved against one family:

    * ``families="E"``: ``theta`` on ``sin``, ``z`` on ``cos`` (``E_T`` and
      ``nu x curl E`` of PEC fields);
    * ``families="O"``: ``theta`` on ``cos``, ``z`` on ``sin`` (``nu x E``);
    * ``families="both"``: joint least-squares fit of all four families. It is
      exact for band-limited input in exact arithmetic but its conditioning
      grows quickly with ``M_max`` (about 1e7 at ``M_max = 8``).

    The single-family paths use DCT-II/DST-II on the midpoint nodes and are
    exact to roundoff.
    """
    N, M = cfg.N_max, cfg.M_max
    if grid.n_theta < 2 * (2 * N + 1) or grid.n_z < 2 * (M + 1):
        raise ValueError(
            f"grid {grid.n_theta}x{grid.n_z} too coarse for N_max={N}, M_max={M}"
        )
    if families not in ("E", "O", "both"):
        raise ValueError(f"unknown family selector {families!r}")
    out = np.zeros((2 * N + 1, M + 1, 4), complex)
    idx = np.arange(-N, N + 1) % grid.n_theta
    comps = []
    for comp in (v_theta, v_z):
        comps.append(np.fft.fft(np.asarray(comp, complex), axis=0)[idx] / grid.n_theta)
    a_theta, a_z = comps
    if families == "E":
        out[:, :, TH_S] = _dst_coeffs(a_theta, M)
        out[:, :, Z_C] = _dct_coeffs(a_z, M)
    elif families == "O":
        out[:, :, TH_C] = _dct_coeffs(a_theta, M)
        out[:, :, Z_S] = _dst_coeffs(a_z, M)
    else:
        cz, sz = _z_basis(grid, M)
        pinv = np.linalg.pinv(np.hstack([cz, sz[:, 1:]]))
        for a, (ci, si) in ((a_theta, (TH_C, TH_S)), (a_z, (Z_C, Z_S))):
            fit = a @ pinv.T
            out[:, :, ci] = fit[:, : M + 1]
            out[:, 1:, si] = fit[:, M + 1 :]
    return TangentialTrace(out, cfg.R if radius is None else radius)


def _mode_fields(out: OutgoingCoefficients, r: float, cfg: WaveguideConfig):
    for (n, m), c in out.items():
        if m in cfg.cutoff_modes or not any(c):
            continue
        yield n, m, mode_basis(n, m, r, cfg, "h", out.parity), np.array(c)


def _trace(c: np.ndarray, r: float) -> TangentialTrace:
    # sin(0 z) slots carry no field
    c[:, 0, TH_S] = 0.0
    c[:, 0, Z_S] = 0.0
    return TangentialTrace(c, r)


def tangential_trace(out: OutgoingCoefficients, r: float, cfg: WaveguideConfig) -> TangentialTrace:
    """Trace of ``nu x E`` (``nu = e_r``) on the cylinder of radius ``r``."""
    c = np.zeros((2 * out.N_max + 1, out.M_max + 1, 4), complex)
    (_, _), (zi, ti) = family_slots(out.parity)
    for n, m, mb, coef in _mode_fields(out, r, cfg):
        q = mb.Q[:2] @ coef
        c[n + out.N_max, m, zi] = q[0]
        c[n + out.N_max, m, ti] = q[1]
    return _trace(c, r)


def tangential_field(out: OutgoingCoefficients, r: float, cfg: WaveguideConfig) -> TangentialTrace:
    """Trace of ``E_T = nu x (E x nu)``: ``E_theta`` and ``E_z`` components."""
    c = np.zeros((2 * out.N_max + 1, out.M_max + 1, 4), complex)
    (thi, zi), _ = family_slots(out.parity)
    for n, m, mb, coef in _mode_fields(out, r, cfg):
        e = mb.E @ coef
        c[n + out.N_max, m, thi] = e[1]
        c[n + out.N_max, m, zi] = e[2]
    return _trace(c, r)


def tangential_derivative_trace(out: OutgoingCoefficients, r: float, cfg: WaveguideConfig) -> TangentialTrace:
    """Trace of ``nu x curl E`` on the cylinder of radius ``r`` via the P rows."""
    c = np.zeros((2 * out.N_max + 1, out.M_max + 1, 4), complex)
    (thi, zi), _ = family_slots(out.parity)
    for n, m, mb, coef in _mode_fields(out, r, cfg):
        p = mb.P @ coef
        c[n + out.N_max, m, thi] = p[0]
        c[n + out.N_max, m, zi] = p[1]
    return _trace(c, r)


def _z_factors(m: int, z, cfg: WaveguideConfig, parity: int):
    s = np.sin(m * np.pi * np.asarray(z) / cfg.Z)
    co = np.cos(m * np.pi * np.asarray(z) / cfg.Z)
    return (s, co) if parity == 1 else (co, s)


def field_grid(out: OutgoingCoefficients, r, theta, z, cfg: WaveguideConfig, radial: str = "h") -> np.ndarray:
    """Cylindrical components on the tensor grid ``r x theta x z``.

    ``radial="j"`` evaluates the same coefficient layout against the regular
    ``J`` basis (incident fields). Returns shape ``(len(r), len(theta), len(z), 3)``.
    """
    r = np.atleast_1d(np.asarray(r, float))
    theta = np.atleast_1d(np.asarray(theta, float))
    z = np.atleast_1d(np.asarray(z, float))
    if np.any(r <= 0):
        raise ValueError("r must be positive")
    res = np.zeros((len(r), len(theta), len(z), 3), complex)
    for ir, rv in enumerate(r):
        for (n, m), c in out.items():
            if m in cfg.cutoff_modes or not any(c):
                continue
            mb = mode_basis(n, m, rv, cfg, radial, out.parity)
            e = mb.E @ np.array(c)
            sz, cz = _z_factors(m, z, cfg, out.parity)
            ph = np.exp(1j * n * theta)
            res[ir, :, :, 0] += e[0] * np.outer(ph, sz)
            res[ir, :, :, 1] += e[1] * np.outer(ph, sz)
            res[ir, :, :, 2] += e[2] * np.outer(ph, cz)
    return res


def synthesize_field(out: OutgoingCoefficients, point, cfg: WaveguideConfig) -> FieldSample:
    """Evaluate ``(E_r, E_theta, E_z)`` of the outgoing series at ``(r, theta, z)``."""
    r, theta, z = (float(v) for v in point)
    if r <= 0:
        raise ValueError("r must be positive")
    terms = ([], [], [])
    for (n, m), c in out.items():
        if m in cfg.cutoff_modes or not any(c):
            continue
        mb = mode_basis(n, m, r, cfg, "h", out.parity)
        e = mb.E @ np.array(c)
        sz, cz = _z_factors(m, z, cfg, out.parity)
        ph = complex(np.exp(1j * n * theta))
        terms[0].append(e[0] * ph * float(sz))
        terms[1].append(e[1] * ph * float(sz))
        terms[2].append(e[2] * ph * float(cz))
    return FieldSample((r, theta, z), tuple(csum(t) for t in terms))


def radiation_residual(out: OutgoingCoefficients, r: float, cfg: WaveguideConfig) -> float:
    """``max |d_r E_nm - i k_m E_nm| * sqrt(r)`` over propagating modes and components."""
    worst = 0.0
    for n, m, mb, coef in _mode_fields(out, r, cfg):
        if not cfg.is_propagating(m):
            continue
        res = mb.dE @ coef - 1j * mb.km * (mb.E @ coef)
        worst = max(worst, float(np.max(np.abs(res))) * math.sqrt(r))
    return worst


def nu_cross(trace: TangentialTrace) -> TangentialTrace:
    """``e_r x v`` for a tangential ``v``: ``(v_theta, v_z) -> (-v_z, v_theta)``."""
    c = trace.coeffs
    out = np.stack([-c[..., Z_S], -c[..., Z_C], c[..., TH_S], c[..., TH_C]], axis=-1)
    return TangentialTrace(out, trace.radius)
