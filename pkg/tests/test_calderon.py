import math

import mpmath as mp
import numpy as np
import pytest

from ppwg import calderon as cal
from ppwg.sobolev import pairing
from ppwg.waveguide import (
    GridSpec,
    OutgoingCoefficients,
    TangentialTrace,
    WaveguideConfig,
    axial_wavenumber,
    nu_cross,
    synthesize_trace,
    tangential_derivative_trace,
    tangential_field,
    tangential_trace,
)

mp.mp.dps = 40


def k2cfg(**kw):
    base = dict(k=2.0, Z=math.pi, R=1.0, N_max=4, M_max=4, exclude_cutoff=True)
    base.update(kw)
    return WaveguideConfig(**base)


def mp_symbol(n, m, cfg, parity=1):
    """W from mpmath Hankel values, assembled independently of the package."""
    k, R, Z = mp.mpf(cfg.k), mp.mpf(cfg.R), mp.mpf(cfg.Z)
    beta = parity * m * mp.pi / Z
    km = mp.sqrt(mp.mpc(k * k - beta * beta))
    if mp.im(km) < 0:
        km = -km
    x = km * R
    H = mp.hankel1(n, x)
    dH = mp.hankel1(n - 1, x) - n / x * H
    h = H / (km * dH)
    alpha = 1j * n / R
    W = [[km**2 * h, -alpha * beta * h],
         [-alpha * beta * h, alpha**2 * beta**2 * h / km**2 + k * k / (km**2 * h)]]
    return np.array([[complex(v) for v in row] for row in W])


def test_q_inverse_example():
    mm = cal.mode_matrices((1, 1), None, k2cfg())
    assert np.max(np.abs(mm.Q @ mm.Q_inv - np.eye(3))) < 1e-12
    assert np.max(np.abs(mm.Q_inv - np.linalg.inv(mm.Q))) < 1e-12 * np.max(np.abs(mm.Q_inv))


def test_det_evanescent_example():
    mm = cal.mode_matrices((2, 3), None, k2cfg())
    assert abs(mm.det_Q - np.linalg.det(mm.Q)) < 1e-12 * abs(mm.det_Q)


@pytest.mark.parametrize("parity", [1, -1])
def test_q_inverse_sweep(parity):
    cfg = k2cfg(N_max=20, M_max=20)
    for mode in cfg.modes():
        mm = cal.mode_matrices(mode, None, cfg, parity)
        assert np.max(np.abs(mm.Q @ mm.Q_inv - np.eye(3))) < 1e-11


@pytest.mark.parametrize("mode", [(0, 1), (0, 4), (3, 0), (-2, 0)])
def test_off_diagonal_vanishes(mode):
    W = cal.w_symbol(mode, k2cfg()).W
    assert W[0, 1] == 0 and W[1, 0] == 0


@pytest.mark.parametrize("mode", [(1, 1), (1, 3), (-4, 3), (7, 0), (0, 0), (10, 4)])
@pytest.mark.parametrize("parity", [1, -1])
def test_symbol_against_mpmath(mode, parity):
    cfg = k2cfg(N_max=10)
    W = cal.w_symbol(mode, cfg, parity).W
    ref = mp_symbol(*mode, cfg, parity)
    assert np.max(np.abs(W - ref)) < 1e-12 * np.max(np.abs(ref))


def test_symbol_equals_p_q_inverse():
    cfg = k2cfg()
    mm = cal.mode_matrices((1, 1), None, cfg)
    assert np.allclose(mm.W, (mm.P @ np.linalg.inv(mm.Q))[:, :2], rtol=1e-12, atol=0)


def test_evanescent_w_tilde_hermitian():
    Wt = cal.w_symbol((1, 3), k2cfg()).W_tilde
    assert np.max(np.abs(Wt - Wt.conj().T)) < 1e-12 * np.max(np.abs(Wt))


def test_propagating_w_tilde_negative_imaginary_part():
    cfg = k2cfg(N_max=32, M_max=1)
    for mode in cfg.modes():
        Wt = cal.w_symbol(mode, cfg).W_tilde
        assert np.linalg.eigvalsh((Wt - Wt.conj().T) / 2j).max() < 0


def test_apply_zero():
    cfg = k2cfg()
    t = TangentialTrace.zeros(4, 4, 1.0)
    assert not np.any(cal.apply_calderon(t, cfg).coeffs)


def test_apply_single_mode():
    cfg = k2cfg()
    t = TangentialTrace.from_dict({(1, 1): (0, 0.7, 0.3, 0)}, 4, 4, 1.0)
    out = cal.apply_calderon(t, cfg).coeffs
    W = cal.w_symbol((1, 1), cfg).W
    # physical family: input (z_s, theta_c) -> output (theta_s, z_c)
    expect = W @ np.array([0.3, 0.7])
    assert out[1 + 4, 1, 0] == pytest.approx(expect[0], rel=1e-15)
    assert out[1 + 4, 1, 3] == pytest.approx(expect[1], rel=1e-15)
    mask = np.ones(out.shape, bool)
    mask[1 + 4, 1, [0, 3]] = False
    assert not np.any(out[mask])


def test_radius_mismatch():
    with pytest.raises(ValueError):
        cal.apply_calderon(TangentialTrace.zeros(2, 2, 2.0), k2cfg())


@pytest.mark.parametrize("parity", [1, -1])
def test_tbc_exactness(rng, parity):
    cfg = WaveguideConfig(k=3.5, Z=math.pi, R=1.2, N_max=12, M_max=12)
    for _ in range(10):
        out = OutgoingCoefficients.random(rng, cfg, parity=parity)
        T = cal.apply_calderon(tangential_trace(out, cfg.R, cfg), cfg).coeffs
        ref = tangential_derivative_trace(out, cfg.R, cfg).coeffs
        assert np.max(np.abs(T - ref)) < 1e-9 * np.max(np.abs(ref))


def test_tbc_perturbation_detected(rng):
    cfg = WaveguideConfig(k=3.5, Z=math.pi, R=1.2, N_max=4, M_max=4)
    out = OutgoingCoefficients.random(rng, cfg)
    T = cal.apply_calderon(tangential_trace(out, cfg.R, cfg), cfg, perturb_w11=0.01).coeffs
    ref = tangential_derivative_trace(out, cfg.R, cfg).coeffs
    assert np.max(np.abs(T - ref)) > 1e-4 * np.max(np.abs(ref))


def test_sign_property(rng):
    cfg = WaveguideConfig(k=2.5, Z=math.pi, R=1.0, N_max=10, M_max=10)
    for _ in range(200):
        U = TangentialTrace.random(rng, 10, 10, 1.0)
        val = pairing(cal.apply_calderon(nu_cross(U), cfg), U, cfg.Z).imag
        assert val <= 1e-12 * np.sum(np.abs(U.coeffs) ** 2)


def test_split_zero_mode():
    s = cal.split_symbols((0, 0), k2cfg())
    assert not np.any(s.TC) and not np.any(s.TA) and not np.any(s.TB)


@pytest.mark.parametrize("parity", [1, -1])
def test_split_div_curl_free(rng, parity):
    cfg = k2cfg(N_max=6, M_max=6)
    for mode in cfg.modes():
        if mode == (0, 0):
            continue
        s = cal.split_symbols(mode, cfg, parity)
        W = cal.w_symbol(mode, cfg, parity).W
        assert np.max(np.abs(s.TA + s.TC - W)) < 1e-12 * np.max(np.abs(W))
        g = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        for T, fn in ((s.TA + s.TB, cal.surface_div), (s.TC, cal.surface_curl)):
            v = T @ g
            assert abs(fn(v[0], v[1], mode.n, mode.m, cfg, parity)) < 1e-10 * max(1.0, np.abs(v).max())


def test_tb_evanescent_weight():
    cfg = k2cfg()
    s = cal.split_symbols((2, 3), cfg)
    km = axial_wavenumber(3, cfg).value
    h = complex(mp.hankel1(2, km) / (km * (mp.hankel1(1, km) - 2 / mp.mpc(km) * mp.hankel1(2, km))))
    ua = np.array([3.0, 2j])
    assert np.allclose(s.TB, -h * np.outer(ua, ua), rtol=1e-12, atol=0)


def test_boundedness_sweep():
    cfg = WaveguideConfig(k=2.0, Z=math.pi, R=1.0, N_max=64, M_max=64, exclude_cutoff=True)
    c1 = c2 = c3 = 0.0
    for mode in cfg.modes():
        a, b = cal.continuity_diagnostic(mode, cfg)
        c1, c2 = max(c1, a), max(c2, b)
        c3 = max(c3, cal.smoothing_diagnostic(mode, cfg))
    assert all(math.isfinite(c) for c in (c1, c2, c3))
    assert max(c1, c2, c3) < 1e3


@pytest.mark.parametrize("n,m", [(10, 3), (40, 5), (-25, 4)])
def test_second_quantity_k_chain(n, m):
    cfg = k2cfg(N_max=40, M_max=5)
    t = abs(axial_wavenumber(m, cfg).value) * cfg.R
    ref = mp.besselk(abs(n) - 1, t) * mp.besselk(abs(n) + 1, t) / mp.besselk(abs(n), t) ** 2
    assert cal.continuity_diagnostic((n, m), cfg)[1] == pytest.approx(float(ref), rel=1e-11)


@pytest.mark.parametrize("m,R", [(3, 1.0), (5, 1.3)])
def test_r_coefficient_n0(m, R):
    cfg = k2cfg(M_max=5, R=R)
    t = abs(axial_wavenumber(m, cfg).value)
    ref = (m * math.pi / cfg.Z) ** 2 * cfg.k**2 * mp.diff(lambda s: mp.besselk(0, s), t * R) / (t * mp.besselk(0, t * R))
    val = cal.r_coefficient((0, m), cfg)
    assert val.real == pytest.approx(float(ref), rel=1e-12)
    assert val.real < 0


def test_r_coefficient_sign_sweep():
    cfg = k2cfg(N_max=30, M_max=12)
    for mode in cfg.modes():
        if not cfg.is_propagating(mode.m):
            assert cal.r_coefficient(mode, cfg).real < 0


def test_r_coefficient_value():
    cfg = k2cfg(N_max=5, M_max=1)
    Wt = mp_symbol(5, 1, cfg)
    Wt[:, 1] *= -1
    c = 1j * 5 * math.pi / (cfg.R * cfg.Z)
    ref = Wt[0, 0] * 25 - Wt[0, 1] * c + Wt[1, 0] * c + Wt[1, 1] * (math.pi / cfg.Z) ** 2
    assert cal.r_coefficient((5, 1), cfg) == pytest.approx(ref, rel=1e-12)


def test_flux_ez_channel():
    cfg = WaveguideConfig(k=2.5, Z=math.pi, R=1.0, N_max=1, M_max=1)
    c = 0.7 - 0.2j
    for r in (1.0, 2.0, 7.0):
        f = cal.mode_flux(0, 1, r, cfg, coef_h=np.array([0, 0, c]))
        assert f == pytest.approx(-2 * cfg.Z * abs(c) ** 2, rel=1e-12)


def test_flux_zero_and_evanescent():
    cfg = WaveguideConfig(k=2.5, Z=math.pi, R=1.0, N_max=1, M_max=4)
    assert cal.mode_flux(0, 1, 1.0, cfg) == 0.0
    fl = [abs(cal.mode_flux(1, 4, r, cfg, coef_h=np.array([1.0, 1.0, 0.0]))) for r in (1.0, 3.0, 6.0)]
    assert fl[0] >= fl[1] >= fl[2]
    assert fl[2] < 1e-12


def test_flux_matches_quadrature(rng):
    cfg = WaveguideConfig(k=2.5, Z=math.pi, R=1.0, N_max=2, M_max=2)
    out = OutgoingCoefficients.random(rng, cfg)
    f = cal.boundary_flux(out, 1.4, cfg)
    ET = tangential_field(out, 1.4, cfg)
    D = tangential_derivative_trace(out, 1.4, cfg)
    g = GridSpec(40, 40, cfg.Z)
    dt, dz = synthesize_trace(D, g)
    et, ez = synthesize_trace(ET, g)
    quad = 1.4 * (2 * math.pi / 40) * (cfg.Z / 40) * np.sum(dt * et.conj() + dz * ez.conj())
    assert f == pytest.approx(quad.imag, rel=1e-10)
