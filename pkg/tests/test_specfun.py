"""Special functions against closed forms and an independent bignum oracle."""

import math

import mpmath
import numpy as np
import pytest
import scipy.special as sc
from hypothesis import given, settings
from hypothesis import strategies as st

from fraclab.errors import ParameterError
from fraclab.specfun import (
    gamma_fn,
    mittag_leffler,
    mittag_leffler2,
    ml_derivative,
    stable_density,
)

# E_{1/2}(-1) = e * erfc(1); the central frozen value reused across modules
ERFCX_ONE = 0.42758357615580706


def test_half_order_equals_scaled_erfc():
    x = np.linspace(0.0, 40.0, 401)
    assert np.abs(mittag_leffler(0.5, -x) - sc.erfcx(x)).max() < 1e-10
    assert mittag_leffler(0.5, -1.0) == pytest.approx(ERFCX_ONE, abs=1e-13)


def test_order_one_equals_exp():
    x = np.linspace(0.0, 30.0, 301)
    assert np.abs(mittag_leffler(1.0, -x) - np.exp(-x)).max() < 1e-12


@pytest.mark.parametrize("beta", [0.3, 0.5, 0.8])
def test_matches_bignum_oracle(beta):
    zs = [-0.01, -0.5, -1.0, -4.0, -25.0, -400.0]
    with mpmath.workdps(40):
        ref = [float(mpmath.nsum(
            lambda k: mpmath.mpf(z) ** k / mpmath.gamma(beta * k + 1),
            [0, mpmath.inf])) for z in zs]
    got = mittag_leffler(beta, np.array(zs))
    assert np.abs(got - ref).max() < 1e-11


@pytest.mark.parametrize("beta", [0.4, 0.7])
def test_two_parameter_matches_bignum_oracle(beta):
    gam = beta
    zs = [-0.2, -1.0, -9.0, -120.0]
    with mpmath.workdps(40):
        ref = [float(mpmath.nsum(
            lambda k: mpmath.mpf(z) ** k / mpmath.gamma(beta * k + gam),
            [0, mpmath.inf])) for z in zs]
    got = mittag_leffler2(beta, gam, np.array(zs))
    assert np.abs(np.asarray(got) / np.asarray(ref) - 1.0).max() < 1e-10


def test_second_parameter_one_reduces_to_one_parameter():
    z = -np.linspace(0.1, 50.0, 37)
    assert np.array_equal(mittag_leffler2(0.6, 1.0, z), mittag_leffler(0.6, z))


def test_derivative_is_two_parameter_form():
    # d/dz E_b(z) = E_{b,b}(z)/b + ... reduces on the negative axis to the
    # scaled two-parameter function; check against a central difference
    z = -np.linspace(0.2, 5.0, 12)
    eps = 1e-6
    num = (mittag_leffler(0.5, z + eps) - mittag_leffler(0.5, z - eps)) / (2 * eps)
    assert np.abs(ml_derivative(0.5, z) - num).max() < 1e-8


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(0.0, 200.0))
def test_completely_monotone_range(beta, x):
    val = float(mittag_leffler(beta, -x))
    assert 0.0 < val <= 1.0


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 0.9), st.floats(0.0, 40.0), st.floats(0.01, 5.0))
def test_decreasing_on_negative_axis(beta, x, dx):
    assert mittag_leffler(beta, -(x + dx)) < mittag_leffler(beta, -x) + 1e-15


def test_vectorized_shapes_match():
    z = -np.linspace(0.0, 3.0, 12).reshape(3, 4)
    out = mittag_leffler(0.7, z)
    assert out.shape == z.shape
    flat = mittag_leffler(0.7, z.ravel())
    assert np.array_equal(out.ravel(), flat)


def test_order_out_of_range_rejected():
    with pytest.raises(ParameterError):
        mittag_leffler(1.5, -1.0)
    with pytest.raises(ParameterError):
        mittag_leffler(0.0, -1.0)


def test_positive_argument_rejected():
    with pytest.raises(ParameterError):
        mittag_leffler(0.5, 1.0)


def test_stable_density_half_closed_form():
    w = np.linspace(0.05, 8.0, 160)
    ref = w**-1.5 * np.exp(-0.25 / w) / (2.0 * math.sqrt(math.pi))
    got = np.array([stable_density(0.5, 1.0, wi) for wi in w])
    assert np.abs(got - ref).max() < 1e-8


def test_stable_density_scaling_in_time():
    # p(s, w) = s^{-1/beta} p(1, w s^{-1/beta})
    beta, s = 0.7, 2.3
    w = np.array([0.3, 1.0, 4.0])
    direct = np.array([stable_density(beta, s, wi) for wi in w])
    scaled = np.array(
        [stable_density(beta, 1.0, wi * s ** (-1 / beta)) for wi in w]
    ) * s ** (-1 / beta)
    assert np.abs(direct / scaled - 1.0).max() < 1e-9


def test_stable_density_normalizes():
    from scipy.integrate import quad

    total, _ = quad(lambda w: stable_density(0.8, 1.0, w), 0.0, np.inf, limit=200)
    assert total == pytest.approx(1.0, abs=1e-6)


def test_gamma_matches_reflection():
    x = np.linspace(0.05, 0.95, 19)
    got = np.array([gamma_fn(v) * gamma_fn(1.0 - v) for v in x])
    assert np.abs(got / (math.pi / np.sin(math.pi * x)) - 1.0).max() < 1e-12
