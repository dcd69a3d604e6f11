"""Tests for the counter-based RNG and the stable-law samplers."""

import numpy as np
import pytest
from scipy import special as sc

from fraclab.errors import ParameterError
from fraclab.rng import (
    RngStream,
    derive_stream,
    gaussian_from_uniforms,
    one_sided_stable_from_uniforms,
    overshoot_cdf,
    philox_block,
    philox_pairs,
    sample_one_sided_stable,
    sample_overshoot_marginal,
    sample_sym_stable_increment,
    sample_tau0_marginal,
)

# Known-answer output of the Philox4x32-10 round function for the all-zero
# key/counter, frozen from an independent reimplementation of the reference
# round constants.
ZERO_BLOCK = (0x6627E8D5, 0xE169C58D, 0xBC57AC4C, 0x9B00DBD8)


def test_philox_zero_block_known_answer():
    assert philox_block(0, 0, 0) == ZERO_BLOCK


def test_philox_pairs_matches_scalar_blocks():
    seed, sid = 0x0123456789ABCDEF, 0xFEDCBA9876543210
    blocks = np.array([0, 1, 2, 5, 2**32 + 7, 2**63 + 11], dtype=np.uint64)
    vec = philox_pairs(seed, sid, blocks)
    for i, b in enumerate(blocks):
        o0, o1, o2, o3 = philox_block(seed, sid, int(b))
        u1 = ((((o0 << 32) | o1) >> 11) + 0.5) * 2.0**-53
        u2 = ((((o2 << 32) | o3) >> 11) + 0.5) * 2.0**-53
        assert vec[i, 0] == u1
        assert vec[i, 1] == u2


def test_uniforms_are_open_interval_and_centered():
    u = RngStream(12345, 7).uniforms(200_001)
    assert u.min() > 0.0
    assert u.max() < 1.0
    assert abs(u.mean() - 0.5) < 3.0 * u.std() / np.sqrt(u.size)


def test_stream_is_reproducible_and_counter_advances():
    a = RngStream(99, 4).uniforms(1000)
    b = RngStream(99, 4).uniforms(1000)
    assert np.array_equal(a, b)
    s = RngStream(99, 4)
    first = s.uniforms(500)
    second = s.uniforms(500)
    assert np.array_equal(np.concatenate([first, second]), a)


def test_distinct_streams_decorrelate():
    a = RngStream(7, 0).uniforms(4096)
    b = RngStream(7, 1).uniforms(4096)
    assert not np.array_equal(a, b)
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.05


def test_derive_stream_depends_on_float_bits():
    a = derive_stream(5, 1.0, 2.5)
    b = derive_stream(5, 1.0, 2.5)
    c = derive_stream(5, 1.0, 2.5000000001)
    assert a == b == 9768276200852827848
    assert a != c
    assert a != derive_stream(6, 1.0, 2.5)


def test_gaussian_from_uniforms_moments():
    u = RngStream(31, 2).uniforms(400_000)
    z = gaussian_from_uniforms(u[0::2], u[1::2])
    n = z.size
    assert abs(z.mean()) < 4.0 / np.sqrt(n)
    assert abs(z.var() - 1.0) < 6.0 / np.sqrt(n)


def test_one_sided_stable_half_matches_levy_cdf():
    """At index 1/2 the subordinator is the Levy law, P[S <= x] = erfc(1/(2 sqrt(x)))."""
    rng = RngStream(2024, 1)
    s = sample_one_sided_stable(0.5, rng, size=200_000)
    for x in (0.2, 0.5, 1.0, 3.0, 10.0):
        emp = float((s <= x).mean())
        exact = float(sc.erfc(1.0 / (2.0 * np.sqrt(x))))
        assert abs(emp - exact) < 4.0 * np.sqrt(exact * (1 - exact) / s.size) + 1e-4


def test_half_index_fast_path_agrees_with_general_formula():
    th = np.linspace(0.01, 0.99, 7)
    ue = np.linspace(0.05, 0.95, 7)
    fast = one_sided_stable_from_uniforms(0.5, th, ue)
    gen = one_sided_stable_from_uniforms(0.5 + 1e-13, th, ue)
    assert np.max(np.abs(fast / gen - 1.0)) < 1e-9


@pytest.mark.parametrize("beta", [0.3, 0.8])
@pytest.mark.parametrize("lam", [0.5, 2.0])
def test_one_sided_stable_laplace_transform(beta, lam):
    rng = RngStream(99, 5)
    s = sample_one_sided_stable(beta, rng, size=400_000)
    vals = np.exp(-lam * s)
    se = vals.std() / np.sqrt(s.size)
    assert abs(vals.mean() - np.exp(-(lam**beta))) < 5.0 * se


@pytest.mark.parametrize("beta", [0.3, 0.5, 0.8])
def test_tau0_marginal_moments(beta):
    """First two moments of the inverse subordinator at a fixed time."""
    rng = RngStream(7, 3)
    t = 1.3
    tau = sample_tau0_marginal(beta, t, rng, size=400_000)
    assert np.all(tau >= 0.0)
    m1 = tau.mean()
    se1 = tau.std() / np.sqrt(tau.size)
    ex1 = t**beta / sc.gamma(1 + beta)
    assert abs(m1 - ex1) < 5.0 * se1
    sq = tau**2
    m2 = sq.mean()
    se2 = sq.std() / np.sqrt(tau.size)
    ex2 = 2.0 * t ** (2 * beta) / sc.gamma(1 + 2 * beta)
    assert abs(m2 - ex2) < 5.0 * se2


def test_overshoot_cdf_median_at_half_index():
    assert overshoot_cdf(0.5, 1.0, 1.0) == pytest.approx(0.5, abs=1e-12)


@pytest.mark.parametrize("beta", [0.3, 0.5, 0.8])
def test_overshoot_cdf_matches_lamperti_quadrature(beta):
    """CDF closed form against direct integration of the arcsine-type density.

    The density sin(pi b)/pi * v^-b/(1+v) is integrated after the substitution
    v = c y^(1/(1-b)), which absorbs the endpoint singularity exactly.
    """
    from numpy.polynomial.legendre import leggauss

    y, w = leggauss(200)
    y = 0.5 * (y + 1.0)
    w = 0.5 * w
    t = 1.0
    for eps in (0.5, 1.0, 4.0):
        c = eps / t
        integrand = 1.0 / (1.0 + c * y ** (1.0 / (1.0 - beta)))
        quad = float(
            np.sin(np.pi * beta) / np.pi * c ** (1.0 - beta) / (1.0 - beta) * np.sum(w * integrand)
        )
        assert overshoot_cdf(beta, t, eps) == pytest.approx(quad, abs=5e-10)


@pytest.mark.parametrize("beta", [0.3, 0.8])
def test_overshoot_marginal_sampler_matches_cdf(beta):
    rng = RngStream(11, 9)
    w = sample_overshoot_marginal(beta, 1.0, rng, size=400_000)
    assert np.all(w > 0.0)
    for eps in (0.5, 1.0, 4.0):
        emp = float((w <= eps).mean())
        cf = overshoot_cdf(beta, 1.0, eps)
        assert abs(emp - cf) < 4.0 * np.sqrt(cf * (1 - cf) / w.size) + 1e-4


def test_sym_stable_gaussian_variance():
    rng = RngStream(42, 0)
    x = sample_sym_stable_increment(2.0, 0.3, 2, rng, size=300_000)
    assert x.shape == (300_000, 2)
    # alpha=2 increments carry variance 2*dt per coordinate
    target = 0.6
    for j in range(2):
        v = x[:, j].var()
        assert abs(v - target) < 6.0 * target * np.sqrt(2.0 / x.shape[0])


def test_sym_stable_characteristic_function():
    rng = RngStream(42, 1)
    x = sample_sym_stable_increment(1.5, 0.7, 2, rng, size=300_000)
    for k in ((1.0, 0.0), (0.8, 0.6)):
        kv = np.array(k)
        vals = np.cos(x @ kv)
        emp = vals.mean()
        se = vals.std() / np.sqrt(x.shape[0])
        exact = np.exp(-0.7 * np.linalg.norm(kv) ** 1.5)
        assert abs(emp - exact) < 5.0 * se


@pytest.mark.parametrize("beta", [-0.1, 0.0, 1.0, 1.5])
def test_one_sided_stable_rejects_bad_index(beta):
    rng = RngStream(1, 0)
    with pytest.raises(ParameterError):
        sample_one_sided_stable(beta, rng, size=4)


def test_overshoot_cdf_rejects_bad_arguments():
    with pytest.raises(ParameterError):
        overshoot_cdf(1.2, 1.0, 0.5)
    with pytest.raises(ParameterError):
        overshoot_cdf(0.5, -1.0, 0.5)
