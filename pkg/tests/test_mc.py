"""Tests for the Monte-Carlo estimators and grid sweeps."""

import io
import math

import numpy as np
import pytest
from scipy import special as sc

from fraclab.backend import TimeTable
from fraclab.errors import CapabilityError, ParameterError, RangeError
from fraclab.mc import (
    estimate_discounted_memory_integral,
    estimate_representation_gap,
    estimate_u_post,
    estimate_u_pre,
    results_to_csv,
    sweep_grid,
)
from fraclab.model import (
    Constant,
    FullSpace,
    Interval,
    McConfig,
    McMode,
    One,
    PathConfig,
    Product,
    Scenario,
    SineMode,
    TimeConst,
    TimeExp,
    TimePoly,
    Zero,
)
from fraclab.specfun import mittag_leffler

MARGINAL = McConfig(n_samples=200_000, seed=3, mode=McMode.MARGINAL_MODE)
PATHS = McConfig(n_samples=4000, seed=5, path=PathConfig(h=2e-3))


def _free_scenario(**kwargs):
    defaults = dict(alpha=2.0, beta=0.5, domain=FullSpace(1), T=2.0)
    defaults.update(kwargs)
    return Scenario(**defaults)


def _mode_scenario(**kwargs):
    defaults = dict(
        alpha=2.0,
        beta=0.5,
        domain=Interval(0.0, math.pi),
        T=2.0,
        phi0=SineMode(1, 0.0, math.pi),
    )
    defaults.update(kwargs)
    return Scenario(**defaults)


# ---------------------------------------------------------------------------
# Marginal mode


def test_marginal_mean_passage_identity():
    """Constant forcing integrates the stopping time: u = c0 + c*E[tau0(t)]."""
    s = _free_scenario(
        phi0=Constant(0.25), f=Product(TimeConst(2.0), One()), mc=MARGINAL
    )
    t = 1.0
    r = estimate_u_post(s, t, [0.0])
    exact = 0.25 + 2.0 * t**0.5 / sc.gamma(1.5)
    assert r.bias_margin == 0.0
    assert abs(r.mean - exact) < 4.0 * r.std_error


def test_marginal_history_of_ones_prices_to_one():
    """With history identically 1 the overshoot lookup always pays 1."""
    s = _free_scenario(phi0=One(), phi_past=Product(TimeConst(1.0), One()), mc=MARGINAL)
    r = estimate_u_pre(s, 0.7, [0.0])
    assert r.mean == 1.0
    assert r.std_error == 0.0


def test_marginal_history_laplace_price():
    """Exponential history prices the overshoot Laplace transform E[e^-W]."""
    s = _free_scenario(phi0=One(), phi_past=Product(TimeExp(1.0), One()), mc=MARGINAL)
    t = 1.0
    r = estimate_u_pre(s, t, [0.0])
    # oracle by quadrature over the scaled overshoot law
    from numpy.polynomial.legendre import leggauss

    beta = 0.5
    y, w = leggauss(400)
    y = 0.5 * (y + 1.0)
    w = 0.5 * w
    # E[e^-tV], V = W/t with density sin(pi b)/pi v^-b/(1+v); substitute both
    # the singular part near 0 and the tail v = 1/u - 1 ... split at v=1.
    lo = np.sum(w * (1.0 / (1.0 + y ** (1.0 / (1.0 - beta)))) * np.exp(-t * y ** (1.0 / (1.0 - beta)))) / (1.0 - beta)
    v_hi = 1.0 / y - 1.0
    keep = v_hi > 1.0
    hi = np.sum((w[keep] / y[keep] ** 2) * v_hi[keep] ** -beta / (1.0 + v_hi[keep]) * np.exp(-t * v_hi[keep]))
    exact = math.sin(math.pi * beta) / math.pi * (lo + hi)
    assert abs(r.mean - exact) < 4.0 * r.std_error


def test_marginal_mode_requires_unbounded_domain():
    s = _mode_scenario(mc=MARGINAL)
    with pytest.raises(CapabilityError):
        estimate_u_post(s, 0.5, [1.0])


def test_marginal_mode_rejects_varying_space_data():
    s = _free_scenario(phi0=Zero(), f=Product(TimeConst(1.0), SineMode(1, 0.0, 1.0)), mc=MARGINAL)
    with pytest.raises(CapabilityError):
        estimate_u_post(s, 0.5, [0.0])


def test_representation_gap_needs_path_mode():
    s = _free_scenario(phi0=One(), phi_past=Product(TimeConst(1.0), One()), mc=MARGINAL)
    with pytest.raises(CapabilityError):
        estimate_representation_gap(s, 0.5, [0.0])


# ---------------------------------------------------------------------------
# Path mode


def test_path_and_marginal_modes_agree():
    t = 0.8
    sp = _free_scenario(phi0=Constant(1.0), f=Product(TimeConst(1.0), One()),
                        mc=McConfig(n_samples=20_000, seed=11, path=PathConfig(h=2e-3)))
    sm = _free_scenario(phi0=Constant(1.0), f=Product(TimeConst(1.0), One()), mc=MARGINAL)
    rp = estimate_u_post(sp, t, [0.0])
    rm = estimate_u_post(sm, t, [0.0])
    tol = 3.0 * (rp.std_error + rm.std_error) + rp.bias_margin
    assert abs(rp.mean - rm.mean) < tol
    assert rp.bias_margin > 0.0
    assert "companion at 2h" in rp.bias_note


def test_path_estimator_is_exactly_linear_in_the_datum():
    """Same seed, same paths: doubling the datum doubles every sample."""
    from fraclab.model import Poly

    t = 0.5
    hump = Poly((0.0, 2.0, -1.0))  # x(2-x), vanishes at both ends of (0, 2)
    doubled = Poly((0.0, 4.0, -2.0))
    s1 = Scenario(alpha=2.0, beta=0.5, domain=Interval(0.0, 2.0), phi0=hump, mc=PATHS)
    s2 = Scenario(alpha=2.0, beta=0.5, domain=Interval(0.0, 2.0), phi0=doubled, mc=PATHS)
    r1 = estimate_u_post(s1, t, [0.9])
    r2 = estimate_u_post(s2, t, [0.9])
    assert r2.mean == 2.0 * r1.mean
    assert r2.std_error == 2.0 * r1.std_error


def test_representation_gap_compatible_with_zero():
    s = _mode_scenario(
        phi_past=Product(TimeExp(1.0), SineMode(1, 0.0, math.pi)),
        mc=McConfig(n_samples=8000, seed=7, path=PathConfig(h=2e-3)),
    )
    r = estimate_representation_gap(s, 0.3, [1.2])
    assert abs(r.mean) < 3.0 * r.std_error + r.bias_margin


def test_pre_estimator_requires_history():
    s = _mode_scenario(mc=PATHS)
    with pytest.raises(ParameterError):
        estimate_u_pre(s, 0.5, [1.0])


def test_evaluation_point_and_time_validated():
    s = _mode_scenario(mc=PATHS)
    with pytest.raises(ParameterError):
        estimate_u_post(s, 0.5, [4.0])
    with pytest.raises(ParameterError):
        estimate_u_post(s, -0.5, [1.0])
    with pytest.raises(RangeError):
        estimate_u_post(s, 5.0, [1.0])


def test_ill_posed_scenario_rejected():
    s = _mode_scenario(phi0=One(), mc=PATHS)
    with pytest.raises(ParameterError, match="well-posed"):
        estimate_u_post(s, 0.5, [1.0])


# ---------------------------------------------------------------------------
# Discounted memory integral


def test_discounted_memory_identity_small_scale():
    """E[int_0^tau e^{-lam r} dr] = (1 - E_beta(-lam t^beta))/lam."""
    beta, lam, t = 0.5, 1.0, 1.0
    cfg = McConfig(n_samples=20_000, seed=9, path=PathConfig(h=2e-3))
    r = estimate_discounted_memory_integral(beta, t, lam, TimeConst(1.0), cfg)
    exact = (1.0 - mittag_leffler(beta, -lam * t**beta)) / lam
    assert abs(r.mean - exact) < 3.0 * r.std_error + r.bias_margin


def test_discounted_memory_accepts_time_tables():
    beta, lam, t = 0.5, 1.0, 1.0
    cfg = McConfig(n_samples=5000, seed=9, path=PathConfig(h=2e-3))
    m = 128
    grid = t * (np.arange(m + 1) / m) ** 4
    tab = TimeTable(1.0 + 0.0 * grid, t)
    r_tab = estimate_discounted_memory_integral(beta, t, lam, tab, cfg)
    r_const = estimate_discounted_memory_integral(beta, t, lam, TimeConst(1.0), cfg)
    # the constant table evaluates identically to the constant profile
    assert r_tab.mean == r_const.mean


def test_discounted_memory_polynomial_profile():
    """f(r) = r: closed form via termwise two-parameter functions."""
    beta, lam, t = 0.5, 2.0, 1.0
    cfg = McConfig(n_samples=20_000, seed=13, path=PathConfig(h=2e-3))
    r = estimate_discounted_memory_integral(beta, t, lam, TimePoly((0.0, 1.0)), cfg)
    from fraclab.spectral import phi_kernel

    exact = phi_kernel(beta, lam, TimePoly((0.0, 1.0)), t)
    assert abs(r.mean - exact) < 3.0 * r.std_error + r.bias_margin


def test_discounted_memory_validates_arguments():
    cfg = McConfig(n_samples=100, seed=1)
    with pytest.raises(ParameterError):
        estimate_discounted_memory_integral(1.5, 1.0, 1.0, TimeConst(1.0), cfg)
    with pytest.raises(ParameterError):
        estimate_discounted_memory_integral(0.5, -1.0, 1.0, TimeConst(1.0), cfg)
    with pytest.raises(ParameterError):
        estimate_discounted_memory_integral(0.5, 1.0, -2.0, TimeConst(1.0), cfg)


# ---------------------------------------------------------------------------
# Grid sweeps


def test_sweep_matches_single_node_calls_exactly():
    s = _mode_scenario(mc=PATHS)
    ts = [0.4, 0.8]
    xs = [0.9, 2.1]
    sw = sweep_grid(s, "post", ts, xs)
    for i, t in enumerate(ts):
        for j, x in enumerate(xs):
            r = estimate_u_post(s, t, [x])
            assert sw.mean[i, j] == r.mean
            assert sw.std_error[i, j] == r.std_error
            assert sw.bias_margin[i, j] == r.bias_margin


def test_sweep_subgrid_reproduces_nodes():
    """Node streams hang off the node coordinates, not the grid layout."""
    s = _mode_scenario(mc=PATHS)
    full = sweep_grid(s, "post", [0.4, 0.8], [0.9, 2.1])
    part = sweep_grid(s, "post", [0.8], [2.1])
    assert part.mean[0, 0] == full.mean[1, 1]


def test_sweep_validates_inputs():
    s = _mode_scenario(mc=PATHS)
    with pytest.raises(ParameterError):
        sweep_grid(s, "sideways", [0.5], [1.0])
    with pytest.raises(ParameterError):
        sweep_grid(s, "post", [], [1.0])


def test_sweep_csv_round_trips():
    s = _mode_scenario(mc=McConfig(n_samples=400, seed=5, path=PathConfig(h=4e-3)))
    sw = sweep_grid(s, "post", [0.5], [1.0, 1.5])
    buf = io.StringIO()
    results_to_csv(sw, buf)
    lines = buf.getvalue().strip().splitlines()
    assert lines[0] == "t,x1,mean,std_error,n,h,mode"
    assert len(lines) == 3
    cells = lines[1].split(",")
    assert float(cells[0]) == 0.5
    assert float(cells[1]) == 1.0
    assert float(cells[2]) == sw.mean[0, 0]
    assert int(cells[4]) == 400
    assert cells[6] == "PathMode"
