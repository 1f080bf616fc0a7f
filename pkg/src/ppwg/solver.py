r"""Scattering by a concentric impedance cylinder ``r = a`` spanning the guide.

The total field is ``E = E_inc + E_s`` with a regular incident field (``J``
radial basis) and an outgoing scattered field (``H^{(1)}`` basis). On the
obstacle, with ``nu = e_r`` pointing out of the obstacle,

.. math:: \nu\times\nabla\times E - i\eta E_T = 0 .

Each mode decouples into a 3x3 system (two boundary rows plus the
divergence row). The annulus form replaces "outgoing" by the Calderón
relation on ``r = R`` and keeps both radial families as unknowns.

Energy bookkeeping: for the total field
``Im int_{r=R} (nu x curl E) . conj(E_T) = eta int_{r=a} |E_T|^2``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .calderon import mode_flux, w_symbol
from .waveguide import (
    ConfigError,
    ModeIndex,
    WaveguideConfig,
    axial_wavenumber,
    mode_basis,
    signed_beta,
)

__all__ = [
    "SingularSystemError",
    "IncidentSpec",
    "ModeSolveResult",
    "AnnulusResult",
    "PowerBalance",
    "ScatteringMatrix",
    "channel_vector",
    "channels_for",
    "impedance_system",
    "solve_mode",
    "solve_scattering",
    "tbc_annulus_solve",
    "power_balance",
    "scattering_matrix",
    "uniqueness_mode_check",
    "battery",
    "battery_incidents",
    "FLUX_METRIC",
]

#: Flux metric on ``(A+, A-, B)``: outgoing flux of an ``m >= 1`` mode is ``-2 Z c^H G c``.
FLUX_METRIC = np.diag([0.5, 0.5, 1.0])

_COND_LIMIT = 1e12


class SingularSystemError(ArithmeticError):
    """A per-mode system is too ill-conditioned to be trusted."""


def channel_vector(mode, channel: str, cfg: WaveguideConfig, parity: int = 1) -> np.ndarray:
    """Divergence-compatible channel triples, unit length in :data:`FLUX_METRIC`.

    ``TE``: ``(1, 1, 0)`` (no ``E_z``); ``TM``: ``(b/k, -b/k, k_m/k)``.
    The two are orthogonal in the flux metric, and with these phases the
    channel S-matrix of a reciprocal obstacle is symmetric.
    """
    n, m = mode
    km = axial_wavenumber(m, cfg).value
    beta = signed_beta(m, cfg, parity)
    ch = channel.upper()
    if ch == "TE":
        return np.array([1.0, 1.0, 0.0], complex)
    if ch == "TM":
        return np.array([beta / cfg.k, -beta / cfg.k, km / cfg.k], complex)
    raise ValueError(f"unknown channel {channel!r}")


def channels_for(mode, parity: int = 1) -> tuple[str, ...]:
    """Channels carrying a nonzero field; at ``m = 0`` the physical parity has no TE field."""
    if mode[1] == 0:
        return ("TM",) if parity == 1 else ("TE",)
    return ("TE", "TM")


@dataclass(frozen=True)
class IncidentSpec:
    """Regular incident field of one mode: ``(a+, a-, b)`` against the ``J`` basis."""

    mode: ModeIndex
    coeffs: tuple[complex, complex, complex]
    parity: int = 1

    def __post_init__(self):
        object.__setattr__(self, "mode", ModeIndex(*self.mode))
        object.__setattr__(self, "coeffs", tuple(complex(c) for c in self.coeffs))

    @classmethod
    def channel(cls, mode, channel: str, cfg: WaveguideConfig, amp: complex = 1.0,
                parity: int = 1) -> "IncidentSpec":
        return cls(ModeIndex(*mode), tuple(amp * channel_vector(mode, channel, cfg, parity)), parity)

    def divergence_residual(self, cfg: WaveguideConfig) -> float:
        ap, am, b = self.coeffs
        km = axial_wavenumber(self.mode.m, cfg).value
        return abs(0.5 * km * (ap - am) - signed_beta(self.mode.m, cfg, self.parity) * b)

    def validate(self, cfg: WaveguideConfig) -> None:
        scale = max(1.0, cfg.k) * max(1.0, max(abs(c) for c in self.coeffs))
        if self.divergence_residual(cfg) > 1e-12 * scale:
            raise ValueError(f"incident for mode {tuple(self.mode)} violates the divergence constraint")

    def __add__(self, other: "IncidentSpec") -> "IncidentSpec":
        if other.mode != self.mode or other.parity != self.parity:
            raise ValueError("can only add incidents of the same mode")
        return IncidentSpec(self.mode, tuple(a + b for a, b in zip(self.coeffs, other.coeffs)), self.parity)

    def __mul__(self, s: complex) -> "IncidentSpec":
        return IncidentSpec(self.mode, tuple(s * c for c in self.coeffs), self.parity)

    __rmul__ = __mul__


def _require_obstacle(cfg: WaveguideConfig) -> float:
    if cfg.a is None:
        raise ConfigError("the solver needs an obstacle radius a")
    return cfg.a


def _boundary_rows(mb, eta: float) -> np.ndarray:
    """Rows of ``nu x curl E - i eta E_T`` (θ, z) followed by the divergence row."""
    return np.vstack([mb.P[0] - 1j * eta * mb.E[1], mb.P[1] - 1j * eta * mb.E[2], mb.Q[2]])


def impedance_system(mode, cfg: WaveguideConfig, parity: int = 1):
    """Per-mode 3x3 matrix on the outgoing triple and the right-side builder.

    Returns ``(A, rhs)`` where ``rhs(incident_coeffs)`` is minus the same
    boundary operator applied to the incident ``J`` triple (zero in the
    divergence row).
    """
    a = _require_obstacle(cfg)
    n, m = mode
    A = _boundary_rows(mode_basis(n, m, a, cfg, "h", parity), cfg.eta)
    Bj = _boundary_rows(mode_basis(n, m, a, cfg, "j", parity), cfg.eta)

    def rhs(inc) -> np.ndarray:
        b = -(Bj @ np.asarray(inc, complex))
        b[2] = 0.0
        return b

    return A, rhs


def _equilibrated_solve(A: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, float, np.ndarray]:
    """Row/column equilibration then partial-pivoting LU; returns ``(x, cond, y)``.

    ``y`` is the solution in scaled unknowns (``x = Dc y``).
    """
    col = np.max(np.abs(A), axis=0)
    col[col == 0] = 1.0
    Dc = 1.0 / col
    As = A * Dc
    row = np.max(np.abs(As), axis=1)
    row[row == 0] = 1.0
    As = As / row[:, None]
    bs = b / row
    cond = float(np.linalg.cond(As))
    if not math.isfinite(cond) or cond > _COND_LIMIT:
        raise SingularSystemError(f"condition number {cond:.3e} exceeds {_COND_LIMIT:.0e}")
    y = np.linalg.solve(As, bs)
    return Dc * y, cond, y


@dataclass(frozen=True)
class ModeSolveResult:
    mode: ModeIndex
    incident: IncidentSpec
    scattered: np.ndarray
    bc_residual: float
    div_residual: float
    radiated_flux: float
    dissipated_power: float
    total_flux: float
    cond: float

    @property
    def ledger(self) -> dict:
        return {
            "radiated_flux": self.radiated_flux,
            "dissipated_power": self.dissipated_power,
            "total_flux_R": self.total_flux,
        }


def _tangential_energy(mode, r: float, cfg: WaveguideConfig, parity: int, coef_h, coef_j) -> float:
    """``int_{r} |E_T|^2 ds`` for one mode of ``E_H coef_h + E_J coef_j``."""
    n, m = mode
    E = mode_basis(n, m, r, cfg, "h", parity).E @ coef_h + mode_basis(n, m, r, cfg, "j", parity).E @ coef_j
    ws = 0.0 if m == 0 else 1.0
    wc = 2.0 if m == 0 else 1.0
    w_theta, w_z = (ws, wc) if parity == 1 else (wc, ws)
    return math.pi * r * cfg.Z * math.fsum([w_theta * abs(E[1]) ** 2, w_z * abs(E[2]) ** 2])


def solve_mode(incident: IncidentSpec, cfg: WaveguideConfig) -> ModeSolveResult:
    """Exact exterior solve for one incident mode."""
    incident.validate(cfg)
    mode, parity = incident.mode, incident.parity
    inc = np.array(incident.coeffs)
    A, rhs = impedance_system(mode, cfg, parity)
    b = rhs(inc)
    if not np.any(b):
        c, cond = np.zeros(3, complex), 1.0
    else:
        c, cond, _ = _equilibrated_solve(A, b)
    res = A @ c - b
    scale = np.max(np.abs(A) * np.abs(c)[None, :]) + np.max(np.abs(b))
    bc = float(np.max(np.abs(res[:2])) / scale) if scale > 0 else 0.0
    km = axial_wavenumber(mode.m, cfg).value
    div = abs(0.5 * km * (c[0] - c[1]) - signed_beta(mode.m, cfg, parity) * c[2])
    div /= max(1.0, float(np.max(np.abs(c))) * abs(km))
    a = cfg.a
    rad = mode_flux(mode.n, mode.m, cfg.R, cfg, parity, coef_h=c)
    tot = mode_flux(mode.n, mode.m, cfg.R, cfg, parity, coef_h=c, coef_j=inc)
    diss = cfg.eta * _tangential_energy(mode, a, cfg, parity, c, inc)
    return ModeSolveResult(mode, incident, c, bc, float(div), rad, diss, tot, cond)


def solve_scattering(incidents, cfg: WaveguideConfig, threads: int = 1) -> list[ModeSolveResult]:
    """Independent per-mode solves; results keep the input order for any thread count."""
    incidents = list(incidents)
    if threads <= 1 or len(incidents) < 2:
        return [solve_mode(i, cfg) for i in incidents]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(lambda i: solve_mode(i, cfg), incidents))


@dataclass(frozen=True)
class AnnulusResult:
    mode: ModeIndex
    j_family: np.ndarray
    h_family: np.ndarray
    leakage: float
    cond: float


def tbc_annulus_solve(incident: IncidentSpec, cfg: WaveguideConfig, perturb_w11: float = 0.0) -> AnnulusResult:
    """Truncated-domain solve on ``a < r < R`` with the Calderón relation on ``r = R``.

    Unknowns are the scattered ``J`` and ``H`` triples. Rows: impedance (θ, z)
    at ``r = a``, the two divergence rows, and ``P - W Q`` (θ, z) at ``r = R``.
    ``leakage`` compares the scaled ``J`` unknowns with the scaled ``H`` ones.
    """
    incident.validate(cfg)
    a = _require_obstacle(cfg)
    (n, m), parity = incident.mode, incident.parity
    inc = np.array(incident.coeffs)
    hj_a = mode_basis(n, m, a, cfg, "j", parity)
    hh_a = mode_basis(n, m, a, cfg, "h", parity)
    hj_R = mode_basis(n, m, cfg.R, cfg, "j", parity)
    hh_R = mode_basis(n, m, cfg.R, cfg, "h", parity)
    W = w_symbol((n, m), cfg, parity, perturb_w11=perturb_w11).W
    bj, bh = _boundary_rows(hj_a, cfg.eta), _boundary_rows(hh_a, cfg.eta)
    A = np.zeros((6, 6), complex)
    A[0:2, 0:3], A[0:2, 3:6] = bj[:2], bh[:2]
    A[2, 0:3] = hj_a.Q[2]
    A[3, 3:6] = hh_a.Q[2]
    A[4:6, 0:3] = hj_R.P - W @ hj_R.Q[:2]
    A[4:6, 3:6] = hh_R.P - W @ hh_R.Q[:2]
    b = np.zeros(6, complex)
    b[0:2] = -(bj[:2] @ inc)
    if not np.any(b):
        z = np.zeros(3, complex)
        return AnnulusResult(ModeIndex(n, m), z, z.copy(), 0.0, 1.0)
    x, cond, y = _equilibrated_solve(A, b)
    hmax = float(np.max(np.abs(y[3:])))
    leak = float(np.max(np.abs(y[:3]))) / hmax if hmax > 0 else math.inf
    return AnnulusResult(ModeIndex(n, m), x[:3], x[3:], leak, cond)


@dataclass(frozen=True)
class PowerBalance:
    """Per-result balance residuals and the worst case.

    ``residual[i] = |eta int_{r=a}|E_T|^2 - Im flux(R)| / scale`` and
    ``radius_residual[i]`` compares the total-field flux at ``R`` and ``2R``.
    """

    residual: np.ndarray
    radius_residual: np.ndarray
    flux_R: np.ndarray
    flux_2R: np.ndarray
    dissipated: np.ndarray

    @property
    def max_residual(self) -> float:
        return float(np.max(self.residual)) if self.residual.size else 0.0

    @property
    def max_radius_residual(self) -> float:
        return float(np.max(self.radius_residual)) if self.radius_residual.size else 0.0


def power_balance(results, cfg: WaveguideConfig) -> PowerBalance:
    res, rres, f1, f2, dis = [], [], [], [], []
    for r in results:
        (n, m), parity = r.mode, r.incident.parity
        inc = np.array(r.incident.coeffs)
        fR = mode_flux(n, m, cfg.R, cfg, parity, coef_h=r.scattered, coef_j=inc)
        f2R = mode_flux(n, m, 2 * cfg.R, cfg, parity, coef_h=r.scattered, coef_j=inc)
        d = r.dissipated_power
        # energy scale: incident and scattered tangential energy on the obstacle
        scale = cfg.eta * (
            _tangential_energy(r.mode, cfg.a, cfg, parity, np.zeros(3), inc)
            + _tangential_energy(r.mode, cfg.a, cfg, parity, r.scattered, np.zeros(3))
        ) + abs(r.radiated_flux)
        scale = scale if scale > 0 else 1.0
        res.append(abs(d - fR) / scale)
        rres.append(abs(fR - f2R) / scale)
        f1.append(fR)
        f2.append(f2R)
        dis.append(d)
    arr = lambda v: np.array(v, float)  # noqa: E731
    return PowerBalance(arr(res), arr(rres), arr(f1), arr(f2), arr(dis))


@dataclass(frozen=True)
class ScatteringMatrix:
    mode: ModeIndex
    channels: tuple[str, ...]
    S: np.ndarray

    @property
    def symmetry_defect(self) -> float:
        return float(np.max(np.abs(self.S - self.S.T)))

    @property
    def sigma_max(self) -> float:
        return float(np.linalg.svd(self.S, compute_uv=False)[0])


def scattering_matrix(mode, cfg: WaveguideConfig, parity: int = 1) -> ScatteringMatrix:
    """Flux-normalized per-mode S-matrix in the channel basis.

    The incident ``J`` channel splits as ``(H^(1) + H^(2))/2``; ``S`` maps
    unit incoming ``H^(2)`` amplitudes to outgoing ``H^(1)`` amplitudes, so
    ``S = I + 2 E^H G C`` with ``C`` the scattered triples.
    """
    mode = ModeIndex(*mode)
    if not cfg.is_propagating(mode.m):
        raise ValueError(f"mode {tuple(mode)} is evanescent; no flux normalization")
    chans = channels_for(mode, parity)
    E = np.column_stack([channel_vector(mode, c, cfg, parity) for c in chans])
    cols = [solve_mode(IncidentSpec(mode, tuple(E[:, j]), parity), cfg).scattered for j in range(len(chans))]
    C = np.column_stack(cols)
    G = FLUX_METRIC.copy()
    if mode.m == 0:
        G = G * 2.0  # cos^2 integrates to Z at m = 0
    # channel norms in G (TM at m = 0 is (0, 0, 1): norm 2, rescale)
    nrm = np.sqrt(np.real(np.einsum("ij,ik,kj->j", E.conj(), G, E)))
    S = np.eye(len(chans)) + 2.0 * (E.conj().T @ G @ C) / np.outer(nrm, nrm)
    return ScatteringMatrix(mode, chans, S)


def uniqueness_mode_check(mode, cfg: WaveguideConfig, parity: int = 1) -> tuple[float, np.ndarray]:
    """``sigma_min`` of the trace matrix at ``R`` and the solution of the homogeneous system."""
    n, m = mode
    Q = mode_basis(n, m, cfg.R, cfg, "h", parity).Q
    s = np.linalg.svd(Q, compute_uv=False)
    x = np.linalg.solve(Q, np.zeros(3, complex))
    return float(s[-1]), x


def battery(**overrides) -> list[WaveguideConfig]:
    """The shared battery of configurations (``m = 2`` at ``k = 2`` sits on cutoff and is excluded)."""
    base = dict(Z=math.pi, R=1.0, N_max=16, M_max=16, exclude_cutoff=True)
    base.update(overrides)
    out = []
    for k in (2.0, 3.5):
        for a in (0.3, 0.7):
            for eta in (0.5, 1.0, 10.0):
                out.append(WaveguideConfig(k=k, a=a, eta=eta, **base))
    return out


def battery_incidents(cfg: WaveguideConfig, parity: int = 1) -> list[IncidentSpec]:
    """Every field-carrying channel of every mode in the fixed mode order."""
    incs = []
    for mode in cfg.modes():
        for ch in channels_for(mode, parity):
            incs.append(IncidentSpec.channel(mode, ch, cfg, parity=parity))
    return incs
