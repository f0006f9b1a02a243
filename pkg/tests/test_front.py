import math

import numpy as np
import pytest

from frontlab.front import (FrontError, SpeedBracket, decay_diagnostic, front_profile,
                            kpp_minimal_speed, shoot_front_speed, stage_speeds,
                            tristable_front_condition)
from frontlab.reaction import ReactionSpec, trailing_integrals

# shooting oracle: tol 1e-9 with the integration step refined to 1e-4
BISTABLE_QUARTER_SPEED = 0.35355339059606194
IGNITION_030_SPEED = 0.4953702068887651


def test_kpp_speed_logistic():
    assert kpp_minimal_speed(ReactionSpec.logistic()) == 2.0


def test_kpp_speed_scaled():
    assert kpp_minimal_speed(ReactionSpec.logistic(0.25)) == 1.0


def test_kpp_speed_rejects_vanishing_derivative():
    with pytest.raises(FrontError):
        kpp_minimal_speed(ReactionSpec.power_kpp(2.0))


def test_kpp_speed_rejects_bistable():
    with pytest.raises(FrontError):
        kpp_minimal_speed(ReactionSpec.bistable(0.25))


@pytest.fixture(scope="module")
def bistable_front():
    return shoot_front_speed(ReactionSpec.bistable(0.25), 1e-6)


def test_bistable_speed_matches_oracle(bistable_front):
    c, _ = bistable_front
    assert abs(c - BISTABLE_QUARTER_SPEED) <= 1e-6


def test_bistable_oracle_matches_closed_form():
    # the cubic has the explicit speed (1 - 2a)/sqrt(2)
    assert BISTABLE_QUARTER_SPEED == pytest.approx((1 - 2 * 0.25) / math.sqrt(2), abs=1e-11)


def test_bistable_profile_invariants(bistable_front):
    c, prof = bistable_front
    assert np.all(np.diff(prof.phi) < 0)
    assert 1 - prof.phi[0] <= 1e-6 and prof.phi[-1] <= 1e-6
    assert prof.residual(ReactionSpec.bistable(0.25)).max() <= 1e-7


def test_ignition_speed_positive_and_matches_oracle():
    c, prof = shoot_front_speed(ReactionSpec.ignition(0.3), 1e-6)
    assert c > 0
    assert abs(c - IGNITION_030_SPEED) <= 1e-6
    assert prof.residual(ReactionSpec.ignition(0.3)).max() <= 1e-7


def test_balanced_bistable_has_no_invading_front():
    with pytest.raises(FrontError):
        shoot_front_speed(ReactionSpec.bistable(0.5), 1e-6)


def test_tolerance_must_be_positive():
    with pytest.raises(ValueError):
        shoot_front_speed(ReactionSpec.bistable(0.25), 0.0)


def test_halving_tolerance_is_stable():
    f = ReactionSpec.bistable(0.25)
    c1, _ = shoot_front_speed(f, 1e-6, profile=False)
    c2, _ = shoot_front_speed(f, 5e-7, profile=False)
    assert abs(c1 - c2) <= 1e-6


def test_launch_offset_sensitivity():
    f = ReactionSpec.bistable(0.25)
    c1, _ = shoot_front_speed(f, 1e-9, profile=False)
    c2, _ = shoot_front_speed(f, 1e-9, eps=1e-7, profile=False)
    assert abs(c1 - c2) <= 1e-7


@pytest.mark.parametrize("a", [0.2, 0.4, 0.45])
def test_bistable_speed_sign_follows_integral(a):
    f = ReactionSpec.bistable(a)
    c, _ = shoot_front_speed(f, 1e-6, profile=False)
    _, ints, _ = trailing_integrals(f, 200)
    assert np.sign(c) == np.sign(ints[0])


@pytest.mark.parametrize("a", [0.2, 0.4])
def test_bistable_speed_antisymmetric_under_relabeling(a):
    c, _ = shoot_front_speed(ReactionSpec.bistable(a), 1e-7, profile=False)
    c_flip, _ = shoot_front_speed(ReactionSpec.bistable(1 - a), 1e-7, profile=False,
                                  require_invasion=False)
    assert abs(c + c_flip) <= 1e-5


def test_logistic_minimal_profile():
    f = ReactionSpec.logistic()
    prof = front_profile(f, 2.0, (-40.0, 60.0))
    i0 = int(np.argmin(np.abs(prof.z)))
    assert prof.phi[i0] == pytest.approx(0.5, abs=1e-9)
    assert np.all(np.diff(prof.phi) < 0)
    assert prof.limits == (True, True)
    assert prof.residual(f).max() <= 1e-8


def test_logistic_profile_on_short_left_span_reports_unmet_limit():
    # 1 - phi decays like exp(0.414 z) behind the front: 3e-6 at z = -30
    prof = front_profile(ReactionSpec.logistic(), 2.0, (-30.0, 60.0))
    assert prof.limits == (False, True)
    assert 1 - prof.phi[0] < 1e-5


def test_logistic_fast_profile_is_monotone():
    prof = front_profile(ReactionSpec.logistic(), 3.0, (-30.0, 60.0))
    assert np.all(np.diff(prof.phi) < 0)
    assert prof.residual(ReactionSpec.logistic()).max() <= 1e-7


@pytest.mark.parametrize("c", [1.0, 1.9])
def test_logistic_slow_profile_rejected(c):
    with pytest.raises(FrontError):
        front_profile(ReactionSpec.logistic(), c, (-30.0, 60.0))


def test_decay_diagnostic_minimal_profile_stabilizes():
    prof = front_profile(ReactionSpec.logistic(), 2.0, (-40.0, 60.0))
    d = decay_diagnostic(prof, 2.0)
    assert d.constant > 0 and math.isfinite(d.constant)
    assert d.drift < 0.10 and not d.flagged


def test_decay_diagnostic_fast_profile_flagged():
    prof = front_profile(ReactionSpec.logistic(), 3.0, (-30.0, 60.0))
    assert decay_diagnostic(prof, 2.0).flagged


def test_decay_diagnostic_shift_keeps_ratio_stable():
    prof = front_profile(ReactionSpec.logistic(), 2.0, (-40.0, 60.0))
    shifted = type(prof)(prof.speed, prof.z + 3.0, prof.phi, prof.limits)
    assert not decay_diagnostic(shifted, 2.0).flagged


def test_profile_csv(tmp_path):
    prof = front_profile(ReactionSpec.logistic(), 2.0, (-40.0, 20.0), n=61)
    path = tmp_path / "p.csv"
    prof.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "z,phi"
    assert len(lines) == 62


def test_speed_bracket_invariants():
    with pytest.raises(ValueError):
        SpeedBracket(1.0, 0.5)
    with pytest.raises(ValueError):
        SpeedBracket(0.0, 1.0, "overshoot", "overshoot")
    assert SpeedBracket(0.0, 0.5).width == 0.5


def test_stage_speeds_terrace_regime():
    f = ReactionSpec.tristable(0.1, 0.45, 0.55, 20.0, 1.0)
    c1, c2 = stage_speeds(f)
    assert c1 > c2 > 0
    cond = tristable_front_condition(f)
    assert cond["terrace"] and not cond["single_front"]


def test_stage_speeds_single_front_regime():
    f = ReactionSpec.tristable(0.1, 0.45, 0.55, 1.0, 20.0)
    cond = tristable_front_condition(f)
    assert cond["c1"] < cond["c2"]
    assert cond["single_front"] and not cond["terrace"]


def test_stage_speeds_require_tristable():
    with pytest.raises(ValueError):
        stage_speeds(ReactionSpec.logistic())
