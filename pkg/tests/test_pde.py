import json
import math

import numpy as np
import pytest

from frontlab.pde import (Boundary, Domain, Field, LevelObserver, MaxObserver, SnapshotObserver,
                          SolverConfig, StabilityError, TrackLevel, WindowTooSmall, advance,
                          auto_dt, discrete_minimal_speed, init_from_support, load_field,
                          resolve_steps, save_field, shift_frame, stability_bound, step)
from frontlab.reaction import ReactionSpec
from frontlab.support import GammaSpec, SupportSpec

LOGISTIC = ReactionSpec.logistic()
HALF_LINE = SupportSpec.half_space([1.0], 0.0)


def gaussian_heat(x, t, s=1.0):
    """Heat-kernel convolution of exp(-x^2 / (2 s^2)) in closed form."""
    v = s * s + 2.0 * t
    return s / math.sqrt(v) * np.exp(-x**2 / (2.0 * v))


# domains -------------------------------------------------------------------------------------

def test_domain_validation():
    with pytest.raises(ValueError):
        Domain.line(1.0, 0.0, 0.1)
    with pytest.raises(ValueError):
        Domain.line(0.0, 1.0, -0.1)
    with pytest.raises(ValueError):
        Domain.line(0.0, 1.05, 0.1)
    with pytest.raises(ValueError):
        Domain("radial", ((1.0, 5.0),), (0.1,), ((Boundary.axis(), Boundary.dirichlet(0.0)),), 2)
    with pytest.raises(ValueError):
        Domain.line(0.0, 1.0, 0.1, Boundary.axis(), Boundary.dirichlet(0.0))


def test_domain_dict_round_trip():
    for d in [Domain.line(-5, 5, 0.1), Domain.radial(3, 10.0, 0.1),
              Domain.plane((0, 4), (-2, 6), 0.5), Domain.cylinder(3, 4.0, (-2, 6), 0.5)]:
        assert Domain.from_dict(json.loads(json.dumps(d.to_dict()))) == d


def test_grid_shape_and_coords():
    d = Domain.plane((0, 4), (-2, 6), 0.5)
    assert d.shape == (9, 17)
    assert d.prop_axis == 1
    np.testing.assert_allclose(d.coords(1)[[0, -1]], [-2.0, 6.0])


# initialization ------------------------------------------------------------------------------

def test_init_half_space_fractional_interface():
    d = Domain.plane((0, 2), (-2, 2), 0.5)
    f = init_from_support(SupportSpec.subgraph(GammaSpec.bounded(0.1)), d, margin_cells=2)
    col = f.values[0]
    xn = d.coords(1)
    assert np.all(col[xn <= -0.5] == 1.0)
    assert np.all(col[xn >= 0.5] == 0.0)
    # cell [-0.25, 0.25] holds 0.35 / 0.5 of the support
    assert col[xn == 0.0][0] == pytest.approx(0.7)
    assert f.time == 0.0 and f.frame_offset == 0


def test_init_ball_on_radial_domain():
    d = Domain.radial(2, 20.0, 0.1)
    f = init_from_support(SupportSpec.ball([0.0], 5.0), d)
    r = d.coords(0)
    assert np.all(f.values[r < 4.9] == 1.0)
    assert np.all(f.values[r > 5.1] == 0.0)


def test_init_log_subgraph_columns():
    d = Domain.plane((0, 20), (-20, 10), 0.25)
    f = init_from_support(SupportSpec.subgraph(GammaSpec.log_coercive(-3.0)), d)
    heights = f.values.sum(axis=1) * 0.25 + d.extents[1][0] - 0.125
    xp = d.coords(0)
    np.testing.assert_allclose(heights, -3.0 * np.log1p(xp), atol=1e-12)


def test_init_rejects_support_too_close_to_edge():
    d = Domain.line(-1.0, 1.0, 0.1)
    with pytest.raises(ValueError):
        init_from_support(SupportSpec.half_space([1.0], 0.5), d)


def test_init_rejects_undefined_gamma():
    with pytest.raises(ValueError):
        GammaSpec.radial_profile([0.0, 1.0], [0.0, float("nan")])


# stepping ------------------------------------------------------------------------------------

@pytest.mark.parametrize("value", [0.0, 1.0])
@pytest.mark.parametrize("scheme", ["explicit_euler", "strang_split"])
def test_equilibria_are_fixed(value, scheme):
    d = Domain.line(-5, 5, 0.1, Boundary.dirichlet(value), Boundary.dirichlet(value))
    f = Field(d, np.full(d.shape, value))
    cfg = SolverConfig(scheme=scheme, max_time=1.0)
    out = step(f, LOGISTIC, cfg, 50)
    # the closed-form reaction flow of the split scheme may round by one ulp
    np.testing.assert_allclose(out.values, value, rtol=0, atol=1e-15)


def test_heat_kernel_explicit():
    d = Domain.line(-20, 20, 0.02, Boundary.dirichlet(0.0), Boundary.dirichlet(0.0))
    x = d.coords(0)
    rec = advance(Field(d, np.exp(-x**2 / 2)), ReactionSpec.logistic(0.0),
                  SolverConfig(max_time=1.0))
    assert np.max(np.abs(rec.final.values - gaussian_heat(x, 1.0))) <= 1e-4


def test_heat_kernel_strang():
    d = Domain.line(-20, 20, 0.02, Boundary.dirichlet(0.0), Boundary.dirichlet(0.0))
    x = d.coords(0)
    rec = advance(Field(d, np.exp(-x**2 / 2)), ReactionSpec.logistic(0.0),
                  SolverConfig(scheme="strang_split", dt=0.0005, max_time=1.0))
    assert np.max(np.abs(rec.final.values - gaussian_heat(x, 1.0))) <= 1e-4


def test_radial_heat_kernel():
    # in N = 3 the radial Gaussian exp(-r^2/2) evolves into (1 + 2t)^{-3/2} exp(-r^2/(2(1+2t)))
    d = Domain.radial(3, 15.0, 0.02)
    r = d.coords(0)
    rec = advance(Field(d, np.exp(-r**2 / 2)), ReactionSpec.logistic(0.0),
                  SolverConfig(max_time=1.0))
    exact = 3.0**-1.5 * np.exp(-r**2 / 6.0)
    assert np.max(np.abs(rec.final.values - exact)) <= 1e-4


def test_cylinder_with_flat_data_matches_line():
    # data independent of r: the cylinder run reduces to the 1D run
    cyl = Domain.cylinder(3, 2.0, (-10, 10), 0.1)
    line = Domain.line(-10, 10, 0.1)
    x = line.coords(0)
    u0 = 1.0 / (1.0 + np.exp(2 * x))
    u0[0], u0[-1] = 1.0, 0.0
    cfg = SolverConfig(dt=0.001, max_time=2.0)
    a = advance(Field(line, u0.copy()), LOGISTIC, cfg).final.values
    b = advance(Field(cyl, np.tile(u0, (cyl.shape[0], 1))), LOGISTIC, cfg).final.values
    assert np.max(np.abs(b - a[None, :])) <= 1e-12


def test_dt_auto_respects_stability_rule():
    for d in [Domain.line(0, 10, 0.1), Domain.radial(2, 10.0, 0.1),
              Domain.plane((0, 4), (0, 8), 0.2), Domain.cylinder(3, 4.0, (0, 8), 0.2)]:
        for spec in [LOGISTIC, ReactionSpec.bistable(0.25)]:
            dt = auto_dt(d, spec)
            assert dt <= stability_bound(d, spec)
            assert dt <= 1.0 / (2.0 * spec.lipschitz)


def test_cfl_violation_rejected():
    d = Domain.line(0, 10, 0.1)
    with pytest.raises(StabilityError, match="config rejected: stability"):
        resolve_steps(d, LOGISTIC, SolverConfig(dt=0.01, max_time=1.0))


def test_dt_must_divide_cadence():
    d = Domain.line(0, 10, 0.1)
    with pytest.raises(StabilityError):
        resolve_steps(d, LOGISTIC, SolverConfig(dt=0.0015, max_time=1.0))


def test_nan_aborts():
    from frontlab.pde import SolverFault
    d = Domain.line(-5, 5, 0.1)
    u = np.zeros(d.shape)
    u[10] = np.nan
    with pytest.raises(SolverFault):
        advance(Field(d, u), LOGISTIC, SolverConfig(max_time=1.0))


def test_max_time_zero_returns_initial_observations():
    d = Domain.line(-10, 10, 0.1)
    f = init_from_support(HALF_LINE, d)
    rec = advance(f, LOGISTIC, SolverConfig(max_time=0.0), [LevelObserver(), MaxObserver()])
    assert [t for t, _ in rec.series("levels")] == [0.0]
    assert len(rec.series("range")) == 1
    np.testing.assert_array_equal(rec.final.values, f.values)


def test_logistic_front_reaches_minimal_speed():
    from frontlab.analysis import estimate_speed
    d = Domain.line(-30, 170, 0.1)
    f = init_from_support(HALF_LINE, d)
    rec = advance(f, LOGISTIC, SolverConfig(max_time=60.0, cadence=0.5), [LevelObserver()])
    t, X = rec.level_series(0.5).column()
    est = estimate_speed(t, X, window=(15.0, 60.0))
    # the pulled speed is approached from below like 2 - 3/(2t)
    assert 1.9 < est.speed < 2.0


# frame shifting ------------------------------------------------------------------------------

def test_shift_by_zero_is_identity():
    d = Domain.line(-10, 10, 0.1)
    f = init_from_support(HALF_LINE, d)
    g = shift_frame(f, 0)
    np.testing.assert_array_equal(g.values, f.values)
    assert g.frame_offset == 0


def test_shift_moves_values_and_fills_downstream():
    d = Domain.line(-10, 10, 0.5)
    f = Field(d, np.where(d.coords(0) < 0, 1.0, 0.0))
    g = shift_frame(f, 4)
    np.testing.assert_array_equal(g.values[:-4], f.values[4:])
    np.testing.assert_array_equal(g.values[-4:], 0.0)
    assert g.frame_offset == 4
    np.testing.assert_allclose(g.abs_coords(0), f.abs_coords(0) + 2.0)


def test_shift_refused_when_front_touches_downstream_band():
    d = Domain.line(-10, 10, 0.5)
    u = np.ones(d.shape)
    with pytest.raises(WindowTooSmall, match="window too small"):
        shift_frame(Field(d, u), 4)


def test_shift_refused_when_discarded_band_not_invaded():
    d = Domain.line(-10, 10, 0.5)
    u = np.where(d.coords(0) < -8, 1.0, 0.0)
    with pytest.raises(WindowTooSmall, match="window too small"):
        shift_frame(Field(d, u), 8)


def test_shift_transparency_against_wide_static_run():
    # pushed (bistable) fronts do not feel the far boundary, so the two runs agree closely
    bist = ReactionSpec.bistable(0.25)
    wide = init_from_support(HALF_LINE, Domain.line(-40, 140, 0.1))
    narrow = init_from_support(HALF_LINE, Domain.line(-40, 80, 0.1))
    rw = advance(wide, bist, SolverConfig(max_time=200.0), [LevelObserver()])
    rn = advance(narrow, bist, SolverConfig(max_time=200.0, frame_policy=TrackLevel(0.5, 0.75, 0.25)),
                 [LevelObserver()])
    assert rn.shifts and rn.shifts[0]["cells"] >= 10
    _, Xw = rw.level_series(0.5).column()
    _, Xn = rn.level_series(0.5).column()
    assert np.max(np.abs(Xw - Xn)) <= 1e-6


def test_absolute_level_continuous_across_shifts():
    d = Domain.line(-50, 150, 0.1)
    f = init_from_support(HALF_LINE, d)
    cfg = SolverConfig(max_time=500.0, cadence=0.025, frame_policy=TrackLevel(0.5, 0.75))
    rec = advance(f, LOGISTIC, cfg, [LevelObserver()])
    assert len(rec.shifts) > 5
    _, X = rec.level_series(0.5).column()
    assert np.max(np.abs(np.diff(X))) <= 0.1


def test_frame_tracks_slowest_column():
    d = Domain.plane((0, 10), (-60, 40), 0.25)
    f = init_from_support(SupportSpec.subgraph(GammaSpec.linear(-1.0)), d)
    cfg = SolverConfig(max_time=20.0, frame_policy=TrackLevel(0.5, 0.6, 0.1, column="min"))
    rec = advance(f, LOGISTIC, cfg, [LevelObserver()])
    assert rec.shifts
    X = rec.level_series(0.5).slices[-1].X
    assert np.all(np.isfinite(X))


# records ---------------------------------------------------------------------------------------

def test_field_save_load_round_trip(tmp_path):
    d = Domain.plane((0, 2), (-1, 3), 0.5)
    f = Field(d, np.random.default_rng(0).random(d.shape), 3.5, 7)
    save_field(f, str(tmp_path / "f"))
    g = load_field(str(tmp_path / "f"))
    np.testing.assert_array_equal(g.values, f.values)
    assert (g.time, g.frame_offset, g.domain) == (3.5, 7, d)


def test_run_record_save_is_deterministic(tmp_path):
    d = Domain.line(-10, 30, 0.1)
    f = init_from_support(HALF_LINE, d)
    cfg = SolverConfig(max_time=5.0)
    obs = lambda: [LevelObserver((0.2, 0.5)), SnapshotObserver([5.0]), MaxObserver()]
    a = advance(f, LOGISTIC, cfg, obs())
    b = advance(f, LOGISTIC, cfg, obs())
    a.save(str(tmp_path / "a"))
    b.save(str(tmp_path / "b"))
    for name in ["metadata.json", "levels_lambda0.5.csv", "levels_lambda0.2.csv",
                 "fields/field_t0000005.0000.bin"]:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_solver_config_round_trip():
    cfg = SolverConfig("strang_split", 0.01, TrackLevel(0.5, 0.3, 0.1), 10.0, 0.5)
    assert SolverConfig.from_dict(cfg.to_dict()) == cfg


def test_discrete_minimal_speed_converges_to_two():
    speeds = [discrete_minimal_speed(LOGISTIC, h, 0.2 * h * h) for h in (0.2, 0.1, 0.05)]
    assert speeds[0] < speeds[1] < speeds[2] < 2.0
    assert 2.0 - speeds[2] < 1e-3


def test_radial_small_ball_needs_no_axis_margin():
    d = Domain.radial(2, 30.0, 0.25)
    f = init_from_support(SupportSpec.ball([0.0, 0.0], 2.0), d)
    assert f.values[0] == 1.0 and f.values[-1] == 0.0
