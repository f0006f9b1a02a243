import math

import numpy as np
import pytest

from frontlab.reaction import (ReactionSpec, adaptive_simpson, check_invasion, check_kpp_class,
                               derivative_at_zero, eval_f, reaction_flow, trailing_integrals)

# integral of s(1-s)(s-1/4) over [0, 1] from scipy.integrate.quad (epsabs 1e-14)
BISTABLE_QUARTER_INTEGRAL = 0.04166666666666667

PARAMETRIC = [
    ReactionSpec.logistic(),
    ReactionSpec.logistic(0.25),
    ReactionSpec.power_kpp(1.0),
    ReactionSpec.power_kpp(2.0),
    ReactionSpec.ignition(0.3),
    ReactionSpec.bistable(0.25),
    ReactionSpec.bistable(0.5),
    ReactionSpec.tristable(0.1, 0.45, 0.55, 20.0, 1.0),
]


def test_logistic_midpoint():
    assert eval_f(ReactionSpec.logistic(), 0.5) == 0.25


def test_extension_by_zero_outside_unit_interval():
    f = ReactionSpec.logistic()
    assert eval_f(f, 1.2) == 0.0
    assert eval_f(f, -0.3) == 0.0
    np.testing.assert_array_equal(eval_f(f, np.array([-1.0, 2.0, 5.0])), 0.0)


def test_bistable_root_at_threshold():
    assert eval_f(ReactionSpec.bistable(0.25), 0.25) == 0.0


@pytest.mark.parametrize("spec", PARAMETRIC, ids=lambda s: s.kind)
def test_endpoints_vanish_exactly(spec):
    assert eval_f(spec, 0.0) == 0.0
    assert eval_f(spec, 1.0) == 0.0


@pytest.mark.parametrize("spec", PARAMETRIC, ids=lambda s: s.kind)
def test_continuity_on_dense_grid(spec):
    n = 20000
    s = np.linspace(-0.1, 1.1, n + 1)
    jumps = np.abs(np.diff(eval_f(spec, s)))
    assert jumps.max() <= spec.lipschitz * (s[1] - s[0]) * (1 + 1e-9)


def test_scalar_in_scalar_out():
    v = eval_f(ReactionSpec.logistic(), 0.3)
    assert isinstance(v, float)


@pytest.mark.parametrize("kwargs", [
    dict(kind="bistable", params=(1.5,)),
    dict(kind="bistable", params=(0.0,)),
    dict(kind="ignition", params=(1.0,)),
    dict(kind="power_kpp", params=(0.5,)),
    dict(kind="tristable", params=(0.5, 0.4, 0.6, 1.0, 1.0)),
    dict(kind="tristable", params=(0.1, 0.4, 0.6, -1.0, 1.0)),
    dict(kind="logistic", params=(), scale=-1.0),
    dict(kind="nonsense"),
])
def test_malformed_specs_rejected_at_construction(kwargs):
    with pytest.raises(ValueError):
        ReactionSpec(**kwargs)


def test_tabulated_interpolation_and_pinning():
    f = ReactionSpec.tabulated([0.3, 0.1, 0.3, 0.2, 0.7])
    assert f.table[0] == 0.0 and f.table[-1] == 0.0
    assert eval_f(f, 0.125) == pytest.approx(0.05, abs=1e-15)
    assert eval_f(f, 0.375) == pytest.approx(0.2, abs=1e-15)
    assert eval_f(f, 1.0) == 0.0


def test_tristable_sign_pattern():
    a, b, g = 0.2, 0.5, 0.7
    f = ReactionSpec.tristable(a, b, g, 2.0, 3.0)
    for lo, hi, sign in [(0, a, -1), (a, b, 1), (b, g, -1), (g, 1, 1)]:
        s = np.linspace(lo, hi, 51)[1:-1]
        assert np.all(np.sign(eval_f(f, s)) == sign)


@pytest.mark.parametrize("spec, expected", [
    (ReactionSpec.logistic(), 1.0),
    (ReactionSpec.logistic(0.25), 0.25),
    (ReactionSpec.bistable(0.25), -0.25),
    (ReactionSpec.power_kpp(1.0), 1.0),
    (ReactionSpec.power_kpp(2.0), 0.0),
    (ReactionSpec.ignition(0.3), 0.0),
])
def test_derivative_at_zero(spec, expected):
    assert derivative_at_zero(spec) == pytest.approx(expected, abs=1e-15)


def test_derivative_at_zero_tabulated():
    # samples of the logistic on a fine grid: linear interpolation has slope (1 - h) on [0, h]
    n = 1000
    s = np.linspace(0, 1, n + 1)
    f = ReactionSpec.tabulated(s * (1 - s))
    assert derivative_at_zero(f) == pytest.approx(1 - 1 / n, rel=1e-12)


@pytest.mark.parametrize("scale", [0.1, 0.25, 2.0, 7.5])
@pytest.mark.parametrize("spec", PARAMETRIC, ids=lambda s: s.kind)
def test_scale_multiplies_derivative_exactly(spec, scale):
    scaled = ReactionSpec(spec.kind, spec.params, scale * spec.scale, spec.table)
    assert derivative_at_zero(scaled) == pytest.approx(scale * derivative_at_zero(spec), rel=1e-15)


def test_invasion_logistic_theta_small():
    rep = check_invasion(ReactionSpec.logistic(), 1000)
    assert rep.invasion_holds
    assert rep.theta == pytest.approx(1e-3)


def test_invasion_bistable_positive_integral():
    rep = check_invasion(ReactionSpec.bistable(0.25), 1000)
    assert rep.invasion_holds and rep.trailing_integrals_positive
    _, ints, errs = trailing_integrals(ReactionSpec.bistable(0.25), 200)
    assert ints[0] == pytest.approx(BISTABLE_QUARTER_INTEGRAL, abs=errs[0])


def test_invasion_bistable_zero_integral_fails():
    rep = check_invasion(ReactionSpec.bistable(0.5), 1000)
    assert rep.invasion_holds is False
    assert rep.indeterminate


@pytest.mark.parametrize("spec", [ReactionSpec.logistic(), ReactionSpec.ignition(0.3),
                                  ReactionSpec.bistable(0.2), ReactionSpec.bistable(0.45),
                                  ReactionSpec.power_kpp(3.0)], ids=lambda s: s.kind)
def test_invasion_holds_for_invading_kinds(spec):
    rep = check_invasion(spec, 500)
    assert rep.invasion_holds is (rep.theta is not None and rep.trailing_integrals_positive)
    assert rep.invasion_holds


@pytest.mark.parametrize("a", [0.5, 0.6, 0.8])
def test_invasion_fails_for_nonpositive_integral(a):
    rep = check_invasion(ReactionSpec.bistable(a), 500)
    assert not rep.invasion_holds


def test_invasion_grid_floor():
    with pytest.raises(ValueError):
        check_invasion(ReactionSpec.logistic(), 50)


def test_kpp_class_logistic():
    rep = check_kpp_class(ReactionSpec.logistic())
    assert rep.kpp0_holds and rep.fkpp_holds and rep.hair_trigger_exponent_ok


def test_kpp_class_power_two_one_dimension():
    rep = check_kpp_class(ReactionSpec.power_kpp(2.0), dim=1)
    assert rep.kpp0_holds
    assert rep.hair_trigger_exponent_ok


@pytest.mark.parametrize("p, dim, ok", [(2.0, 1, True), (3.0, 1, True), (4.0, 1, False),
                                        (2.0, 2, True), (2.5, 2, False), (1.5, 4, True)])
def test_hair_trigger_exponent(p, dim, ok):
    assert check_kpp_class(ReactionSpec.power_kpp(p), dim=dim).hair_trigger_exponent_ok is ok


def test_kpp_class_ignition_fails():
    rep = check_kpp_class(ReactionSpec.ignition(0.3))
    assert rep.kpp0_holds is False


def test_adaptive_simpson_polynomial_exact():
    val, err = adaptive_simpson(lambda s: s**3 - 2 * s, 0.0, 2.0, 1e-12)
    assert val == pytest.approx(0.0, abs=1e-12)
    assert err <= 1e-12


def test_reaction_flow_logistic_closed_form():
    u0 = np.array([0.0, 0.1, 0.5, 0.9, 1.0])
    tau = 0.7
    exact = u0 * math.exp(tau) / (1 - u0 + u0 * math.exp(tau))
    np.testing.assert_allclose(reaction_flow(ReactionSpec.logistic(), u0, tau), exact,
                               rtol=0, atol=1e-14)


def test_reaction_flow_rk4_bistable_fixed_points():
    f = ReactionSpec.bistable(0.25)
    u0 = np.array([0.0, 0.25, 1.0])
    np.testing.assert_array_equal(reaction_flow(f, u0, 0.3), u0)


def test_dict_round_trip():
    for spec in PARAMETRIC + [ReactionSpec.tabulated([0, 1, 0.5, 0])]:
        assert ReactionSpec.from_dict(spec.to_dict()) == spec


def test_dict_rejects_unknown_keys():
    with pytest.raises(ValueError, match="A1"):
        ReactionSpec.from_dict({"kind": "tristable", "a": 0.1, "b": 0.45, "g": 0.55, "A1": 20.0})
