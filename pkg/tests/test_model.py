"""Tests for scenario descriptions: field catalog, validation, serialization."""

import math

import numpy as np
import pytest

from fraclab.errors import ParameterError, RangeError, ShapeError
from fraclab.model import (
    PAST_RANGE,
    Ball,
    Constant,
    FullSpace,
    GaussBump,
    IndicatorPast,
    Interval,
    McMode,
    One,
    PathConfig,
    Poly,
    Product,
    Scenario,
    SineMode,
    TimeConst,
    TimeExp,
    TimePoly,
    Zero,
    boundary_samples,
    domain_contains,
    evaluate_field,
    evaluate_space_field,
    evaluate_time_part,
    interior_samples,
    scenario_from_json,
    scenario_hash,
    scenario_to_json,
    split_product,
    validate_scenario,
)


def _interval_scenario(**kwargs):
    defaults = dict(
        alpha=2.0,
        beta=0.5,
        domain=Interval(0.0, 2.0),
        phi0=SineMode(1, 0.0, 2.0),
    )
    defaults.update(kwargs)
    return Scenario(**defaults)


# ---------------------------------------------------------------------------
# Domains


def test_interval_membership_is_open():
    dom = Interval(0.0, 2.0)
    assert domain_contains(dom, 1.0)
    assert not domain_contains(dom, 0.0)
    assert not domain_contains(dom, 2.0)
    assert not domain_contains(dom, -0.5)


def test_ball_membership_and_dimension():
    dom = Ball(center=(0.0, 0.0), radius=1.0)
    assert dom.dim == 2
    assert domain_contains(dom, (0.5, 0.5))
    assert not domain_contains(dom, (1.0, 0.0))
    with pytest.raises(ShapeError):
        domain_contains(dom, (0.1, 0.1, 0.1))


def test_full_space_contains_everything():
    dom = FullSpace(dim=3)
    assert domain_contains(dom, (1e9, -1e9, 0.0))
    assert boundary_samples(dom).shape == (0, 3)


@pytest.mark.parametrize(
    "bad",
    [
        lambda: Interval(1.0, 1.0),
        lambda: Interval(2.0, 1.0),
        lambda: Interval(0.0, math.inf),
        lambda: Ball(center=(0.0,), radius=0.0),
        lambda: FullSpace(dim=0),
    ],
)
def test_bad_domains_rejected(bad):
    with pytest.raises(ParameterError):
        bad()


def test_boundary_samples_land_on_boundary():
    dom = Ball(center=(1.0, -1.0), radius=0.5)
    pts = boundary_samples(dom, 32)
    r = np.linalg.norm(pts - np.array([1.0, -1.0]), axis=1)
    assert np.allclose(r, 0.5, atol=1e-12)


def test_interior_samples_stay_inside():
    for dom in (Interval(-1.0, 1.0), Ball(center=(0.0, 0.0), radius=2.0), FullSpace(2)):
        pts = interior_samples(dom, 40)
        assert pts.shape[1] == dom.dim
        for p in pts:
            assert domain_contains(dom, p)


# ---------------------------------------------------------------------------
# Field catalog evaluation


def test_space_field_closed_forms():
    x = np.linspace(0.0, 2.0, 9)
    assert np.array_equal(evaluate_space_field(Zero(), x), np.zeros(9))
    assert np.array_equal(evaluate_space_field(One(), x), np.ones(9))
    assert np.array_equal(evaluate_space_field(Constant(3.5), x), np.full(9, 3.5))
    got = evaluate_space_field(SineMode(2, 0.0, 2.0), x)
    assert np.allclose(got, np.sin(2 * np.pi * x / 2.0), atol=1e-15)
    got = evaluate_space_field(GaussBump(1.0, 0.25), x)
    assert np.allclose(got, np.exp(-(((x - 1.0) / 0.25) ** 2)), atol=1e-15)
    got = evaluate_space_field(Poly((1.0, -2.0, 0.5)), x)
    assert np.allclose(got, 1.0 - 2.0 * x + 0.5 * x * x, rtol=1e-15)


def test_time_part_closed_forms():
    t = np.linspace(0.0, 3.0, 7)
    assert np.array_equal(evaluate_time_part(TimeConst(2.0), t), np.full(7, 2.0))
    assert np.allclose(evaluate_time_part(TimeExp(-0.7), t), np.exp(-0.7 * t), rtol=1e-15)
    assert np.allclose(
        evaluate_time_part(TimePoly((1.0, 1.0)), t), 1.0 + t, rtol=1e-15
    )
    step = evaluate_time_part(IndicatorPast(1.5), t)
    assert np.array_equal(step, (t <= 1.5).astype(float))


def test_product_field_separates():
    fld = Product(TimeExp(-1.0), SineMode(1, 0.0, 1.0))
    t, x = 0.3, 0.25
    want = math.exp(-0.3) * math.sin(math.pi * 0.25)
    assert evaluate_field(fld, t, x) == pytest.approx(want, rel=1e-15)


def test_scalar_inputs_return_floats():
    v = evaluate_field(Constant(2.0), 0.5, 1.0)
    assert isinstance(v, float)
    assert v == 2.0


def test_one_dimensional_fields_reject_points():
    with pytest.raises(ShapeError):
        evaluate_space_field(SineMode(1, 0.0, 1.0), np.zeros((4, 2)))


def test_split_product_views_plain_fields_as_constant_time():
    tp, sp = split_product(GaussBump(0.0, 1.0))
    assert tp == TimeConst(1.0)
    assert sp == GaussBump(0.0, 1.0)
    tp, sp = split_product(Product(TimeExp(2.0), One()))
    assert tp == TimeExp(2.0)
    assert sp == One()


def test_time_range_enforced():
    fld = Product(TimeConst(1.0), One())
    with pytest.raises(RangeError):
        evaluate_field(fld, 0.5, 0.0, time_range=PAST_RANGE)
    with pytest.raises(RangeError):
        evaluate_field(fld, -0.5, 0.0, time_range=(0.0, 1.0))
    # in-range times pass through
    assert evaluate_field(fld, -2.0, 0.0, time_range=PAST_RANGE) == 1.0


def test_past_value_uses_past_range():
    s = _interval_scenario(
        phi0=Zero(),
        phi_past=Product(IndicatorPast(0.0), Zero()),
    )
    assert s.past_value(-1.0, 1.0) == 0.0
    with pytest.raises(RangeError):
        s.past_value(0.25, 1.0)


def test_forcing_value_uses_horizon():
    s = _interval_scenario(f=Product(TimeConst(2.0), One()), T=1.0)
    assert s.forcing_value(1.0, 0.5) == 2.0
    with pytest.raises(RangeError):
        s.forcing_value(1.5, 0.5)


# ---------------------------------------------------------------------------
# Validation diagnostics


def test_valid_scenario_has_no_diagnostics():
    assert validate_scenario(_interval_scenario()) == []


def test_parameter_ranges_reported():
    s = _interval_scenario()
    bad = Scenario(
        alpha=2.5,
        beta=1.0,
        domain=s.domain,
        T=-1.0,
        phi0=s.phi0,
    )
    msgs = validate_scenario(bad)
    assert any("alpha" in m for m in msgs)
    assert any("beta" in m for m in msgs)
    assert any("T=-1" in m for m in msgs)


def test_boundary_compatibility_reported():
    msgs = validate_scenario(_interval_scenario(phi0=One()))
    assert any("vanish on the boundary" in m for m in msgs)


def test_history_mismatch_at_time_zero_reported():
    s = _interval_scenario(
        phi_past=Product(TimeConst(2.0), SineMode(1, 0.0, 2.0)),
    )
    msgs = validate_scenario(s)
    assert any("disagrees with phi0" in m for m in msgs)


def test_consistent_history_accepted():
    s = _interval_scenario(
        phi_past=Product(IndicatorPast(0.0), SineMode(1, 0.0, 2.0)),
    )
    assert validate_scenario(s) == []


def test_mode_shape_on_wrong_interval_reported():
    msgs = validate_scenario(_interval_scenario(phi0=SineMode(1, 0.0, 1.0)))
    assert any("mode shape" in m for m in msgs)


# ---------------------------------------------------------------------------
# Solver settings


def test_path_config_rejects_bad_values():
    with pytest.raises(ParameterError):
        PathConfig(h=0.0)
    with pytest.raises(ParameterError):
        PathConfig(max_steps=0)


def test_with_mc_overrides_without_mutation():
    s = _interval_scenario()
    s2 = s.with_mc(seed=99, n_samples=5)
    assert s.mc.seed == 0
    assert s2.mc.seed == 99
    assert s2.mc.n_samples == 5
    assert s2.alpha == s.alpha


# ---------------------------------------------------------------------------
# Serialization and hashing


def _rich_scenario():
    from fraclab.model import McConfig

    return Scenario(
        alpha=1.5,
        beta=0.7,
        domain=Ball(center=(0.0, 1.0), radius=2.0),
        T=2.5,
        phi0=Zero(),
        f=Product(TimeExp(-0.25), Constant(1.0)),
        g=Product(TimePoly((0.0, 1.0, 0.5)), One()),
        phi_past=Product(IndicatorPast(0.0), Zero()),
        mc=McConfig(n_samples=321, seed=17, path=PathConfig(h=2e-3), mode=McMode.MARGINAL_MODE),
    )


def test_json_round_trip_is_exact():
    s = _rich_scenario()
    text = scenario_to_json(s)
    back = scenario_from_json(text)
    assert back == s


def test_json_round_trip_interval_scenario():
    s = _interval_scenario(f=Product(TimeConst(1.0), GaussBump(1.0, 0.3)))
    assert scenario_from_json(scenario_to_json(s)) == s


def test_hash_is_stable_and_sensitive():
    s = _interval_scenario()
    h1 = scenario_hash(s)
    h2 = scenario_hash(scenario_from_json(scenario_to_json(s)))
    assert h1 == h2
    assert len(h1) == 64
    assert set(h1) <= set("0123456789abcdef")
    assert scenario_hash(_interval_scenario(beta=0.5000001)) != h1
    # solver settings participate: same physics, different sampling plan
    assert scenario_hash(s.with_mc(seed=1)) != h1


def test_unknown_kind_rejected():
    with pytest.raises(ParameterError):
        scenario_from_json(
            '{"alpha": 2.0, "beta": 0.5, "domain": {"kind": "torus"}, "T": 1.0,'
            ' "phi0": {"kind": "zero"}, "f": {"kind": "zero"}, "g": {"kind": "zero"},'
            ' "phi_past": null,'
            ' "mc": {"n_samples": 1, "seed": 0, "mode": "PathMode",'
            ' "path": {"h": 0.001, "max_steps": 100, "record_trajectory": false}},'
            ' "spectral": {"n_modes": 4, "time_quad_nodes": 8, "space_quad_nodes": 8,'
            ' "tail_tol": 1e-10}}'
        )
