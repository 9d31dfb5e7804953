import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from services.specfun_service import bessel_i, bessel_ik_product, bessel_k, gamma_real, k0_split
from utils.common import loglog_slope
from utils.errors import DomainError, UnsupportedOrderError


@pytest.mark.parametrize("x, expected", [
    (1.0, 1.0),
    (0.5, math.sqrt(math.pi)),
    (0.25, 3.6256099082),
])
def test_gamma_real_known_values(x, expected):
    assert gamma_real(x) == pytest.approx(expected, rel=1e-10)


@pytest.mark.parametrize("x", [0.0, -0.5, math.inf])
def test_gamma_real_rejects_non_positive(x):
    with pytest.raises(DomainError):
        gamma_real(x)


def test_bessel_k_half_order_closed_form():
    assert bessel_k(0.5, 1.0) == pytest.approx(math.sqrt(math.pi / 2.0) * math.exp(-1.0), rel=1e-12)
    assert bessel_k(0.5, 1.0) == pytest.approx(0.4610685044, rel=1e-9)


def test_bessel_k_small_argument_leading_term():
    leading = gamma_real(0.3) / 2.0 * (5e-7) ** -0.3
    assert bessel_k(0.3, 1e-6) == pytest.approx(leading, rel=1e-3)


def test_bessel_k0_at_ten():
    assert bessel_k(0, 10.0) == pytest.approx(1.778006231616e-5, rel=1e-10)


def test_bessel_k_complex_argument_stays_complex():
    value = bessel_k(0.3, 1.0 + 0.5j)
    assert isinstance(value, complex)
    assert np.conj(value) == pytest.approx(bessel_k(0.3, 1.0 - 0.5j), rel=1e-13)


@pytest.mark.parametrize("w", [0.0, -1.0, -1.0 + 2.0j, 2.0j])
def test_bessel_k_left_half_plane_is_domain_error(w):
    with pytest.raises(DomainError):
        bessel_k(0.5, w)


@pytest.mark.parametrize("order", [1, 2.0, 3])
def test_bessel_k_integer_order_unsupported(order):
    with pytest.raises(UnsupportedOrderError):
        bessel_k(order, 1.0)


def test_bessel_i_closed_forms():
    assert bessel_i(0, 0) == 1.0
    assert bessel_i(0.5, 1.0) == pytest.approx(math.sqrt(2.0 / math.pi) * math.sinh(1.0), rel=1e-12)


def test_bessel_i_negative_order_connection():
    lhs = bessel_i(-0.3, 0.2) - bessel_i(0.3, 0.2)
    rhs = 2.0 / math.pi * math.sin(0.3 * math.pi) * bessel_k(0.3, 0.2)
    assert abs(lhs - rhs) <= 1e-10


def test_bessel_i_negative_order_at_zero_rejected():
    with pytest.raises(DomainError):
        bessel_i(-0.3, 0.0)


@settings(max_examples=60, deadline=None)
@given(nu=st.floats(0.02, 0.98), w=st.floats(1e-3, 30.0))
def test_connection_identity(nu, w):
    i_minus = bessel_i(-nu, w)
    residual = i_minus - bessel_i(nu, w) - 2.0 / math.pi * math.sin(math.pi * nu) * bessel_k(nu, w)
    assert abs(residual) <= 1e-10 * (1.0 + abs(i_minus))


@settings(max_examples=40, deadline=None)
@given(nu=st.floats(0.0, 0.95), re=st.floats(0.05, 20.0), im=st.floats(-20.0, 20.0))
def test_conjugation_symmetry(nu, re, im):
    w = complex(re, im)
    value = bessel_k(nu, w)
    assert bessel_k(nu, w.conjugate()) == pytest.approx(np.conj(value), rel=1e-10, abs=1e-300)


@pytest.mark.parametrize("nu", [0.5, 0.7, 0.9])
def test_small_argument_slope(nu):
    t = np.geomspace(1e-8, 1e-4, 9)
    slope, _ = loglog_slope(t, bessel_k(nu, t))
    assert slope == pytest.approx(-nu, abs=1e-3)


@pytest.mark.parametrize("nu", [0.0, 0.3, 0.6])
def test_exponential_decay_envelope(nu):
    t = np.linspace(10.0, 50.0, 21)
    envelope = bessel_k(nu, t) * np.exp(t) * np.sqrt(t)
    assert np.all(envelope > 1.1)
    assert np.all(envelope < 1.4)


def test_ik_product_matches_unscaled_product():
    mu, nu = np.array([-0.3, 0.3, 2.3]), np.array([0.3, 0.3, 2.3])
    value = bessel_ik_product(mu, nu, 0.7, 1.9)
    expected = [bessel_i(m, 0.7) * bessel_k(n, 1.9) for m, n in zip(mu, nu)]
    assert value == pytest.approx(expected, rel=1e-12)


def test_ik_product_large_arguments_do_not_overflow():
    value = bessel_ik_product(0.4, 0.4, 800.0, 801.0)
    assert math.isfinite(value)
    assert value == pytest.approx(math.exp(-1.0) / (2.0 * math.sqrt(800.0 * 801.0)), rel=1e-2)


def test_k0_split_near_zero():
    f, g = k0_split(1e-8)
    assert abs(f + 1.0) <= 1e-15


def test_k0_split_at_one_is_k0():
    _, g = k0_split(1.0)
    assert g == pytest.approx(0.4210244382, rel=1e-9)


@pytest.mark.parametrize("w", [2.0, 0.01, 25.0, 1.5 + 2.0j, 0.3 - 0.1j])
def test_k0_split_reproduces_k0(w):
    f, g = k0_split(w)
    assert abs(np.log(w) * f + g - bessel_k(0, w)) <= 1e-12


def test_k0_split_quadratic_approach():
    w = np.array([1e-3, 1e-4])
    f, _ = k0_split(w)
    ratio = np.abs(f + 1.0) / w ** 2
    assert np.all(ratio < 2.0)


def test_k0_split_domain():
    with pytest.raises(DomainError):
        k0_split(-1.0)
