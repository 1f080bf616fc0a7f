import math
import warnings

import mpmath as mp
import numpy as np
import pytest

from ppwg import special_fn as sf

mp.mp.dps = 40


def rel(a, b):
    return abs(complex(a) - complex(b)) / abs(complex(b))


def test_j_reflection():
    assert sf.bessel_j(-1, 2.0).value == pytest.approx(-sf.bessel_j(1, 2.0).value, rel=1e-15)


@pytest.mark.parametrize("n,x", [(0, 1.0), (1, 0.3), (7, 5.0), (30, 12.0), (64, 100.0)])
def test_j_against_mpmath(n, x):
    v = sf.bessel_j(n, x)
    assert rel(v.value, mp.besselj(n, x)) < 1e-12
    assert rel(v.derivative, mp.besselj(n, x, derivative=1)) < 1e-11


def test_j0_reference():
    assert sf.bessel_j(0, 1.0).value.real == pytest.approx(0.7651976866, abs=1e-10)


@pytest.mark.parametrize("n,x", [(0, 1.0), (3, 0.5), (12, 4.0), (40, 30.0), (64, 500.0)])
def test_hankel_against_mpmath(n, x):
    h = sf.hankel1(n, x)
    ref = mp.hankel1(n, x)
    assert rel(h.value, ref) < 1e-12
    dref = mp.hankel1(n - 1, x) - n / mp.mpf(x) * ref
    assert rel(h.derivative, dref) < 1e-11
    # the small J part survives even when Y dominates
    assert abs(h.value.real - float(mp.besselj(n, x))) <= 1e-12 * abs(float(mp.besselj(n, x))) + 1e-300


def test_hankel_examples():
    h0 = sf.hankel1(0, 1.0).value
    assert h0.real == pytest.approx(0.7651976866, abs=1e-10)
    assert h0.imag == pytest.approx(0.0882569642, abs=1e-10)
    h1 = sf.hankel1(1, 1.0)
    assert h1.derivative == pytest.approx(sf.hankel1(0, 1.0).value - h1.value, rel=1e-14)


@pytest.mark.parametrize("n", range(0, 51))
def test_wronskian_jy(n):
    x = 1.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        try:
            h = sf.hankel1(n, x)
        except sf.BesselOverflowError:
            pytest.skip("H overflows at this order")
    w = (h.derivative * h.value.conjugate()).imag
    assert w == pytest.approx(2 / (math.pi * x), rel=1e-10)


def test_wronskian_n5():
    h = sf.hankel1(5, 2.0)
    assert (h.derivative * h.value.conjugate()).imag == pytest.approx(1 / math.pi, rel=1e-12)


def test_k_examples():
    k0 = sf.bessel_k(0, 1.0)
    k1 = sf.bessel_k(1, 1.0)
    assert k0.value.real == pytest.approx(0.4210244382, abs=1e-10)
    assert k1.value.real > k0.value.real > 0
    assert k0.derivative.real == pytest.approx(-k1.value.real, rel=1e-14)


@pytest.mark.parametrize("n,t", [(0, 1.0), (2, 0.01), (10, 3.0), (50, 20.0)])
def test_k_against_mpmath(n, t):
    v = sf.bessel_k(n, t)
    assert rel(v.value, mp.besselk(n, t)) < 1e-12
    assert rel(v.derivative, mp.diff(lambda s: mp.besselk(n, s), t)) < 1e-11


def test_k_scaled_avoids_underflow():
    with pytest.raises(sf.BesselUnderflowError):
        sf.bessel_k(0, 800.0)
    v = sf.bessel_k(0, 800.0, scaled=True).value.real
    assert v == pytest.approx(float(mp.besselk(0, 800) * mp.exp(800)), rel=1e-12)


def test_i_against_mpmath():
    v = sf.bessel_i(3, 2.0)
    assert rel(v.value, mp.besseli(3, 2.0)) < 1e-12
    assert rel(v.derivative, mp.besseli(3, 2.0, derivative=1)) < 1e-12


def test_imaginary_argument_identity():
    h = sf.hankel1_axial(3, 2j, 1.0).value
    ref = 2 / math.pi * complex(mp.exp(-1j * 4 * mp.pi / 2)) * sf.bessel_k(3, 2.0).value.real
    assert rel(h, ref) < 1e-12
    # and directly against mpmath at the complex argument
    assert rel(h, mp.hankel1(3, 2j)) < 1e-12


def test_j_axial_evanescent():
    v = sf.bessel_j_axial(2, 1.5j, 2.0)
    assert rel(v.value, mp.besselj(2, 3j)) < 1e-12


def test_domain_errors():
    with pytest.raises(sf.DomainError):
        sf.bessel_j(0, -1.0)
    with pytest.raises(sf.DomainError):
        sf.bessel_j(0.5, 1.0)
    with pytest.raises(sf.DomainError):
        sf.is_evanescent(1 + 1j)


def test_overflow_raises():
    with pytest.raises(sf.BesselOverflowError):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            sf.hankel1(300, 0.01)


def test_accuracy_warning():
    with pytest.warns(RuntimeWarning):
        sf.bessel_j(100, 1.0)


@pytest.mark.parametrize("n,x", [(0, 1.0), (1, 0.5), (8, 3.0), (25, 10.0), (64, 2.0), (-7, 4.0)])
def test_logderiv_propagating(n, x):
    L = sf.hankel1_logderiv(n, complex(x), 1.0)
    ref = mp.hankel1(n - 1, x) / mp.hankel1(n, x) - n / mp.mpf(x)
    assert rel(L, ref) < 1e-12


@pytest.mark.parametrize("n,t", [(0, 1.0), (3, 0.2), (40, 5.0), (200, 1.0)])
def test_logderiv_evanescent(n, t):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        L = sf.hankel1_logderiv(n, 1j * t, 1.0)
    # d/dx H(x) at x = i t, divided by H: -i K'/K
    ref = -1j * mp.diff(lambda s: mp.besselk(n, s), t) / mp.besselk(n, t)
    assert rel(L, ref) < 1e-12
    assert L.real == 0.0
    assert abs(1j * L + n / t) < 1.0 + 1.0 / t


def test_logderiv_order_200_naive_overflows():
    with pytest.raises((sf.BesselOverflowError, OverflowError)):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            sf.hankel1(200, 1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        assert math.isfinite(abs(sf.hankel1_logderiv(200, 1.0 + 0j, 1.0)))


def test_logderiv_small_imag_part_from_wronskian():
    # Im L = 2/(pi x |H|^2) is tiny at high order; it must still be accurate
    n, x = 30, 3.0
    L = sf.hankel1_logderiv(n, complex(x), 1.0)
    ref = complex(mp.hankel1(n - 1, x) / mp.hankel1(n, x) - n / mp.mpf(x))
    assert abs(L.imag - ref.imag) < 1e-10 * abs(ref.imag)


def test_order_ratios():
    n, x = 5, 2.0
    r = sf.hankel1_order_ratios(n, complex(x), 1.0)
    h = {k: complex(mp.hankel1(k, x)) for k in (n - 1, n, n + 1)}
    assert rel(r[1], h[n - 1] / h[n]) < 1e-12
    assert rel(r[2], h[n + 1] / h[n]) < 1e-12
    assert rel(r[0], h[n - 1] / h[n] - n / x) < 1e-12


def test_order_ratios_negative_order():
    n, x = -3, 1.7
    r = sf.hankel1_order_ratios(n, complex(x), 1.0)
    h = {k: complex(mp.hankel1(k, x)) for k in (n - 1, n, n + 1)}
    assert rel(r[1], h[n - 1] / h[n]) < 1e-12
    assert rel(r[2], h[n + 1] / h[n]) < 1e-12


def test_k_ratio_against_mpmath():
    for n, t in ((0, 0.5), (5, 2.0), (60, 1.0)):
        assert sf.bessel_k_ratio(n, t) == pytest.approx(float(mp.besselk(n + 1, t) / mp.besselk(n, t)), rel=1e-12)
