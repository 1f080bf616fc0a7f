"""Executable identity checks grouped into suites.

Each check returns a measured quantity, a tolerance and an anchor string
naming the identity. Checks of the solver and transparent-boundary
identities use ``cfg.tol``; the others carry fixed tolerances. Checks are
independent and seeded, so a suite gives the same numbers whatever the
thread count used to run it.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import calderon as cal
from . import sobolev as sob
from . import solver as sol
from . import special_fn as sf
from .io import fmt
from .waveguide import (
    GridSpec,
    OutgoingCoefficients,
    TangentialTrace,
    WaveguideConfig,
    analyze_trace,
    axial_wavenumber,
    nu_cross,
    synthesize_trace,
    tangential_derivative_trace,
    tangential_field,
    tangential_trace,
)

__all__ = ["Check", "SUITES", "run_suite", "format_report"]

SUITES = ("all", "special", "waveguide", "calderon", "sobolev", "solver")


@dataclass(frozen=True)
class Check:
    suite: str
    name: str
    anchor: str
    value: float
    tol: float
    upper: bool = True  # pass iff value <= tol (else value >= tol)

    @property
    def passed(self) -> bool:
        if not math.isfinite(self.value):
            return False
        return self.value <= self.tol if self.upper else self.value >= self.tol

    def line(self) -> str:
        op = "<=" if self.upper else ">="
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.suite}/{self.name}: value={fmt(self.value)} {op} {fmt(self.tol)} [{self.anchor}]"


def _rel(a, b) -> float:
    a, b = np.asarray(a), np.asarray(b)
    d = float(np.max(np.abs(a - b)))
    s = float(np.max(np.abs(b)))
    return d / s if s > 0 else d


# ---------------------------------------------------------------- special

def _special(cfg, opts):
    out = []
    j0 = sf.bessel_j(0, 1.0).value.real
    out.append(("bessel_j0_value", "J_0(1) against a 20-digit reference", abs(j0 - 0.76519768655796655145) / 0.765, 1e-12))
    h0 = sf.hankel1(0, 1.0).value
    out.append(("hankel_h0_value", "H_0(1) = J_0(1) + i Y_0(1)",
                abs(h0 - complex(0.76519768655796655145, 0.08825696421567695798)) / abs(h0), 1e-12))
    k0 = sf.bessel_k(0, 1.0).value.real
    out.append(("bessel_k0_value", "K_0(1) against a 20-digit reference", abs(k0 - 0.42102443824070833334) / k0, 1e-12))
    worst = 0.0
    for n in range(0, 51):
        for x in (0.5, 1.0, 2.0, 5.0, 10.0, 40.0):
            try:
                h = sf.hankel1(n, x)
            except sf.BesselOverflowError:
                continue
            w = (h.derivative * h.value.conjugate()).imag
            worst = max(worst, abs(w - 2 / (math.pi * x)) / (2 / (math.pi * x)))
    out.append(("hankel_wronskian", "Im[H_n' conj(H_n)] = 2/(pi x)", worst, 1e-10))
    worst = 0.0
    for n in range(1, 40):
        for x in (0.7, 3.0, 15.0):
            hm, h0_, hp = (complex(sf.hankel1(k, x).value) for k in (n - 1, n, n + 1))
            worst = max(worst, abs(hm + hp - 2 * n / x * h0_) / max(abs(hm), abs(hp), abs(h0_)))
            km_, k0_, kp_ = (sf.bessel_k(k, x, scaled=True).value.real for k in (n - 1, n, n + 1))
            worst = max(worst, abs(km_ - kp_ + 2 * n / x * k0_) / max(km_, kp_))
    out.append(("recurrence_residual", "three-term recurrences of H and K", worst, 1e-10))
    h3 = sf.hankel1_axial(3, 2j, 1.0).value
    k3 = sf.bessel_k(3, 2.0).value.real
    ref = 2 / math.pi * complex(math.cos(-2 * math.pi), math.sin(-2 * math.pi)) * k3
    out.append(("imaginary_argument", "H_n(i t) = (2/pi) exp(-i (n+1) pi/2) K_n(t)", abs(h3 - ref) / abs(ref), 1e-12))
    worst = 0.0
    for n in range(0, 30):
        for x in (0.8, 2.5, 9.0):
            h = sf.hankel1(n, x)
            worst = max(worst, abs(sf.hankel1_logderiv(n, complex(x), 1.0) - h.derivative / h.value)
                        / abs(h.derivative / h.value))
    out.append(("logderiv_vs_quotient", "H_n'/H_n by ratios equals the direct quotient", worst, 1e-11))
    L = sf.hankel1_logderiv(200, 1j, 1.0)
    out.append(("logderiv_order_200", "evanescent log-derivative finite at order 200: |i L + n/t| bounded",
                abs(1j * L + 200.0) if math.isfinite(abs(L)) else math.inf, 1.0))
    return out


# ---------------------------------------------------------------- waveguide

def _waveguide(cfg, opts):
    out = []
    rng = np.random.default_rng(11)
    N, M = min(cfg.N_max, 8), min(cfg.M_max, 8)
    small = cfg.replace(N_max=N, M_max=M)
    c = TangentialTrace.random(rng, N, M, cfg.R).coeffs.copy()
    c[..., 1] = 0.0
    c[..., 2] = 0.0
    fam = TangentialTrace(c, cfg.R)
    g = GridSpec(2 * (2 * N + 1), 2 * (M + 1), cfg.Z)
    back = analyze_trace(*synthesize_trace(fam, g), small, g, families="E")
    out.append(("transform_round_trip", "analyze(synthesize(t)) = t", _rel(back.coeffs, fam.coeffs), 1e-12))
    g2 = GridSpec(4 * N + 4, 4 * M + 4, cfg.Z)
    vt, vz = synthesize_trace(fam, g2)
    quad = cfg.R * (2 * math.pi / g2.n_theta) * (cfg.Z / g2.n_z) * float(np.sum(abs(vt) ** 2 + abs(vz) ** 2))
    w = np.ones(M + 1)
    w[0] = 2.0
    par = math.pi * cfg.R * cfg.Z * float(np.sum(w[None, :, None] * abs(c) ** 2))
    out.append(("parseval", "grid quadrature of |v|^2 = pi R Z sum w_m |coefficients|^2", abs(quad - par) / par, 1e-10))
    ob = OutgoingCoefficients.random(rng, small)
    out.append(("divergence_constraint", "(k_m/2)(A+ - A-) = beta B for generated coefficients",
                ob.divergence_residual(small), 1e-12))
    # evanescent decay rate from a log-slope fit
    worst = 0.0
    for m in small.axial_indices():
        if small.is_propagating(m):
            continue
        km = abs(axial_wavenumber(m, small).value)
        single = OutgoingCoefficients.from_dict({(1, m): (1.0, 1.0, 0.0)}, N, M)
        rs = np.linspace(5.0, 10.0, 11) * cfg.R
        amp = [abs(tangential_field(single, r, small).coeffs).max() * math.sqrt(r) for r in rs]
        slope = -np.polyfit(rs, np.log(amp), 1)[0]
        worst = max(worst, abs(slope - km) / km)
    out.append(("evanescent_decay", "log-slope of evanescent modes equals |k_m|", worst, 1e-2))
    return out


# ---------------------------------------------------------------- calderon

def _calderon(cfg, opts):
    out = []
    eps = opts.get("perturb_symbol", 0.0)
    q_err = det_err = w_err = 0.0
    for mode in cfg.modes():
        mm = cal.mode_matrices(mode, None, cfg)
        q_err = max(q_err, float(np.max(np.abs(mm.Q @ mm.Q_inv - np.eye(3)))))
        det_err = max(det_err, abs(mm.det_Q - np.linalg.det(mm.Q)) / abs(mm.det_Q))
        W = cal.w_symbol(mode, cfg, perturb_w11=eps).W
        w_err = max(w_err, _rel(W, (mm.P @ mm.Q_inv)[:, :2]))
    out.append(("closed_form_inverse", "Q Q^{-1} = I with the closed-form inverse", q_err, 1e-11))
    out.append(("determinant", "det Q = (k_m/2i) H_n^2 H_n'", det_err, 1e-12))
    out.append(("symbol_formula", "explicit W equals P Q^{-1} (first two columns)", w_err, 1e-10))
    rng = np.random.default_rng(23)
    worst = 0.0
    for parity in (1, -1):
        for _ in range(5):
            ob = OutgoingCoefficients.random(rng, cfg, parity=parity)
            T = cal.apply_calderon(tangential_trace(ob, cfg.R, cfg), cfg, perturb_w11=eps)
            worst = max(worst, _rel(T.coeffs, tangential_derivative_trace(ob, cfg.R, cfg).coeffs))
    out.append(("tbc_exactness", "T[nu x E] = nu x curl E on r = R", worst, cfg.tol))
    worst = -math.inf
    for _ in range(50):
        U = TangentialTrace.random(rng, cfg.N_max, cfg.M_max, cfg.R)
        TU = cal.apply_calderon(nu_cross(U), cfg, perturb_w11=eps)
        val = sob.pairing(TU, U, cfg.Z).imag / (np.sum(abs(U.coeffs) ** 2) * math.pi * cfg.R * cfg.Z)
        worst = max(worst, val)
    out.append(("sign_property", "Im <T[nu x U], U_T> <= 0", worst, 1e-12))
    neg = -math.inf
    herm = 0.0
    for mode in cfg.modes():
        Wt = cal.w_symbol(mode, cfg, perturb_w11=eps).W_tilde
        if cfg.is_propagating(mode.m):
            ev = np.linalg.eigvalsh((Wt - Wt.conj().T) / 2j)
            neg = max(neg, float(ev[-1]))
        else:
            herm = max(herm, _rel(Wt, Wt.conj().T))
    out.append(("propagating_definiteness", "Im W~ negative definite below cutoff", neg, 0.0))
    out.append(("evanescent_hermitian", "W~ Hermitian above cutoff", herm, 1e-12))
    comp = free = 0.0
    tb = 0.0
    for mode in cfg.modes():
        sp_ = cal.split_symbols(mode, cfg)
        W = cal.w_symbol(mode, cfg, perturb_w11=eps).W
        if mode != (0, 0):
            comp = max(comp, _rel(sp_.TB + sp_.remainder + sp_.TC, W))
        g = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        for M_, fn in ((sp_.TA, cal.surface_div), (sp_.TB, cal.surface_div), (sp_.TC, cal.surface_curl)):
            v = M_ @ g
            free = max(free, abs(fn(v[0], v[1], mode.n, mode.m, cfg)) / max(1.0, float(np.max(abs(v)))))
        v = sp_.TB @ g
        U = np.array([g[0], -g[1]])  # (U_theta, U_z) from (g_z, g_theta)
        p = complex(v @ U.conj())
        tb = max(tb, max(-p.real, abs(p.imag)) / max(1.0, abs(p)))
    out.append(("split_completeness", "T_B + (T_A - T_B) + T_C = T for (n, m) != (0, 0)", comp, 1e-10))
    out.append(("split_div_curl_free", "surface div of T_A, T_B and surface curl of T_C vanish", free, 1e-10))
    out.append(("tb_positivity", "Re <T_B u, u_T> >= 0 with zero imaginary part", tb, 1e-12))
    c1 = c2 = c3 = 0.0
    for mode in cfg.modes():
        a_, b_ = cal.continuity_diagnostic(mode, cfg)
        c1, c2 = max(c1, a_), max(c2, b_)
        c3 = max(c3, cal.smoothing_diagnostic(mode, cfg))
    bound = opts.get("bound", 1e3)
    out.append(("continuity_bound", "|H_n/(k_m H_n')| (1+n^2+m^2)^{1/2} bounded", c1, bound))
    out.append(("continuity_bound_2", "|n^2/(k_m R)^2 - (H_n'/H_n)^2| bounded", c2, bound))
    out.append(("smoothing_bound", "smoothing remainder symbol decays like (1+n^2+m^2)^{-1/2}", c3, bound))
    worst = -math.inf
    for mode in cfg.modes():
        if not cfg.is_propagating(mode.m):
            worst = max(worst, cal.r_coefficient(mode, cfg).real)
    if worst > -math.inf:
        out.append(("r_coefficient_sign", "Re R_nm < 0 for evanescent modes", worst, 0.0))
    return out


# ---------------------------------------------------------------- sobolev

def _sobolev(cfg, opts):
    out = []
    rng = np.random.default_rng(37)
    N, M = min(cfg.N_max, 8), min(cfg.M_max, 8)
    Cpair = sob.pairing_constant(N, M, cfg.R, cfg.Z)
    iC = sob.equivalence_interval(N, M, cfg.R, cfg.Z, "C")
    iD = sob.equivalence_interval(N, M, cfg.R, cfg.Z, "D")
    dual = alt = cs = ratio = 0.0
    for _ in range(100):
        u = TangentialTrace.random(rng, N, M, cfg.R)
        v = TangentialTrace.random(rng, N, M, cfg.R)
        p = sob.pairing(u, v, cfg.Z)
        dual = max(dual, abs(sob.pairing(sob.cal_D(v, cfg.Z), sob.cal_C(u, cfg.Z), cfg.Z) - p.conjugate()) / abs(p))
        alt = max(alt, abs(sob.pairing_equivalent(u, v, cfg.Z) - p) / abs(p))
        cs = max(cs, abs(p) / (Cpair * sob.div_norm(u, cfg.R, cfg.Z).value * sob.curl_norm(v, cfg.R, cfg.Z).value))
        r1 = sob.curl_norm(sob.cal_C(u, cfg.Z), cfg.R, cfg.Z).value / sob.div_norm(u, cfg.R, cfg.Z).value
        r2 = sob.div_norm(sob.cal_D(v, cfg.Z), cfg.R, cfg.Z).value / sob.curl_norm(v, cfg.R, cfg.Z).value
        ratio = max(ratio, max(iC[0] - r1, r1 - iC[1], iD[0] - r2, r2 - iD[1]) / iC[1])
    out.append(("duality", "<D v, C u> = conj <u, v>", dual, 1e-12))
    out.append(("pairing_rewrite", "pairing through the (alpha, beta -/+ i) combinations", alt, 1e-12))
    out.append(("pairing_bound", "|<u,v>| <= C ||u||_Div ||v||_Curl", cs, 1.0 + 1e-12))
    out.append(("norm_equivalence", "C and D ratios inside the computed interval", ratio, 1e-12))
    out.append(("equivalence_lower", "lower end of the C-ratio interval is positive", min(iC[0], iD[0]), 1e-3, False))
    return out


# ---------------------------------------------------------------- solver

def _solver(cfg, opts):
    out = []
    if cfg.a is None:
        cfg = cfg.replace(a=0.5 * cfg.R)
    N, M = min(cfg.N_max, 8), min(cfg.M_max, 8)
    small = cfg.replace(N_max=N, M_max=M)
    incs = sol.battery_incidents(small)
    res = sol.solve_scattering(incs, small)
    out.append(("impedance_residual", "nu x curl E - i eta E_T = 0 on r = a", max(r.bc_residual for r in res), cfg.tol))
    pb = sol.power_balance(res, small)
    out.append(("power_balance", "eta int |E_T|^2 = Im flux on r = R", pb.max_residual, 1e-8))
    out.append(("flux_radius_independence", "total flux equal on r = R and r = 2R", pb.max_radius_residual, 1e-8))
    ev = [abs(cal.mode_flux(r.mode.n, r.mode.m, 4 * small.R, small, 1, coef_h=r.scattered))
          for r in res if not small.is_propagating(r.mode.m)]
    out.append(("evanescent_flux", "radiated flux of evanescent modes vanishes at 4R", max(ev, default=0.0), 1e-10))
    match = leak = 0.0
    for inc, r in zip(incs, res):
        an = sol.tbc_annulus_solve(inc, small)
        match = max(match, _rel(an.h_family, r.scattered))
        leak = max(leak, an.leakage)
    out.append(("tbc_annulus_match", "annulus solve with the Calderon relation equals the exterior solve", match, cfg.tol))
    out.append(("tbc_annulus_leakage", "no regular component in the annulus solution", leak, cfg.tol))
    m1 = 1 if 1 in small.axial_indices() else small.axial_indices()[-1]
    both = sol.IncidentSpec.channel((0, m1), "TE", small) + sol.IncidentSpec.channel((0, m1), "TM", small)
    ctrl = sol.tbc_annulus_solve(both, small, perturb_w11=0.01).leakage
    out.append(("tbc_negative_control", "1% symbol perturbation produces leakage", ctrl, 1e-6, False))
    sym = sig = 0.0
    for mode in small.modes():
        if small.is_propagating(mode.m):
            S = sol.scattering_matrix(mode, small)
            sym, sig = max(sym, S.symmetry_defect), max(sig, S.sigma_max)
    out.append(("reciprocity", "flux-normalized S symmetric", sym, 1e-8))
    out.append(("passivity", "sigma_max(S) <= 1", sig, 1.0 + 1e-8))
    smin = math.inf
    for mode in small.modes():
        smin = min(smin, sol.uniqueness_mode_check(mode, small)[0])
    out.append(("trace_matrix_injective", "sigma_min(Q) > 0", smin, 0.0, False))
    return out


_SUITE_FUNCS: dict[str, Callable] = {
    "special": _special,
    "waveguide": _waveguide,
    "calderon": _calderon,
    "sobolev": _sobolev,
    "solver": _solver,
}


def run_suite(suite: str, cfg: WaveguideConfig, threads: int = 1, **opts) -> list[Check]:
    """Run one suite (or ``all``); checks come back in a fixed order."""
    if suite not in SUITES:
        raise ValueError(f"unknown suite {suite!r}; choose from {', '.join(SUITES)}")
    names = [s for s in SUITES[1:] if suite in ("all", s)]

    def job(name):
        return [Check(name, *row) for row in _SUITE_FUNCS[name](cfg, opts)]

    if threads > 1 and len(names) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            groups = list(ex.map(job, names))
    else:
        groups = [job(n) for n in names]
    return [c for g in groups for c in g]


def format_report(checks: list[Check]) -> str:
    lines = [c.line() for c in checks]
    npass = sum(c.passed for c in checks)
    lines.append(f"summary: {npass}/{len(checks)} passed")
    return "\n".join(lines) + "\n"
