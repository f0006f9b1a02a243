import math

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from frontlab.support import (ANGLE_GRID, DirectionSet, GammaSpec, SupportSpec, _below_slope_set,
                              cloud_to_csv, direction_sets, dist_to_support, dist_to_support_many,
                              envelope_distance, envelope_w, erode, erode_bruteforce, hausdorff,
                              sample_grid)

PI = math.pi


def lin(alpha):
    return SupportSpec.subgraph(GammaSpec.linear(alpha))


# gamma families ------------------------------------------------------------------------------

def test_gamma_families_values():
    assert GammaSpec.linear(2.0)(-3.0) == 6.0
    assert GammaSpec.log_coercive(-3.0)(math.e - 1) == pytest.approx(-3.0)
    assert GammaSpec.bounded(1.5)(100.0) == 1.5
    s = 4.0 * PI**2 * 9
    assert GammaSpec.sqrt_sine()(s) == pytest.approx(0.0, abs=1e-12)
    assert GammaSpec.conical(1.0, 1.0)(5.0) == -5.0
    assert GammaSpec.radial_profile([0, 1, 2], [0, 1, 3])(4.0) == 7.0


@pytest.mark.parametrize("g", [GammaSpec.sqrt_sine(), GammaSpec.conical(2.0, 1.5)])
def test_capped_families_are_c1_at_the_cap(g):
    r0 = 1.0 if g.family == "sqrt_sine" else 1.5
    eps = 1e-6
    left = (g(r0) - g(r0 - eps)) / eps
    right = (g(r0 + eps) - g(r0)) / eps
    assert g(r0 - 1e-12) == pytest.approx(g(r0 + 1e-12), abs=1e-10)
    assert left == pytest.approx(right, abs=1e-4)


def test_sqrt_sine_cap_is_c2():
    g = GammaSpec.sqrt_sine()
    e = 1e-4
    d2 = lambda r: (g(r + e) - 2 * g(r) + g(r - e)) / e**2
    assert d2(1.0 - 2 * e) == pytest.approx(d2(1.0 + 2 * e), abs=1e-2)


def test_gamma_dict_round_trip():
    for g in [GammaSpec.linear(1.0), GammaSpec.log_coercive(-3.0), GammaSpec.bounded(0.5),
              GammaSpec.sqrt_sine(), GammaSpec.conical(1.0, 2.0),
              GammaSpec.radial_profile([0.0, 1.0, 2.0], [0.0, -1.0, -4.0])]:
        assert GammaSpec.from_dict(g.to_dict()) == g


def test_gamma_rejects_bad_parameters():
    with pytest.raises(ValueError):
        GammaSpec("linear", ())
    with pytest.raises(ValueError):
        GammaSpec.conical(-1.0)
    with pytest.raises(ValueError):
        GammaSpec("spiral", ())


def test_asymptotic_slopes():
    assert GammaSpec.linear(0.7).asymptotic_slope == 0.7
    assert GammaSpec.conical(2.0).asymptotic_slope == -2.0
    for g in [GammaSpec.log_coercive(-3.0), GammaSpec.bounded(1.0), GammaSpec.sqrt_sine()]:
        assert g.asymptotic_slope == 0.0


# membership ----------------------------------------------------------------------------------

def test_indicator_examples():
    assert SupportSpec.ball([0.0, 0.0], 1.0).indicator([0.5, 0.0])
    assert not lin(1.0).indicator([1.0, 1.5])
    ann = SupportSpec.annuli_union(6)
    for n in range(7):
        assert ann.indicator([2.0**n, 0.0])
    assert not ann.indicator([5.5, 0.0])
    assert not ann.indicator([300.0, 0.0])  # beyond the truncation


def test_support_dict_round_trip():
    for s in [lin(1.0), SupportSpec.ball([0.0, 0.0], 2.0), SupportSpec.half_space([0.0, 1.0], 1.0),
              SupportSpec.cone(1.0), SupportSpec.v_shape(0.3), SupportSpec.annuli_union(5)]:
        assert SupportSpec.from_dict(s.to_dict()) == s


def test_cone_and_v_shape_are_subgraphs():
    assert SupportSpec.cone(2.0).as_gamma() == GammaSpec.linear(2.0)
    g = SupportSpec.v_shape(PI / 4).as_gamma()
    assert g(3.0) == pytest.approx(3.0)


# distances -----------------------------------------------------------------------------------

def test_distance_examples():
    assert dist_to_support(SupportSpec.half_space([0.0, 1.0], 0.0), [5.0, 3.0]) == 3.0
    assert dist_to_support(SupportSpec.ball([0.0, 0.0], 1.0), [0.0, 2.0]) == 1.0
    assert dist_to_support(lin(1.0), [0.0, 5.0]) == pytest.approx(5.0 / math.sqrt(2), abs=1e-12)


def _brute_subgraph_distance(g, x):
    ys = np.linspace(x[0] - 40, x[0] + 40, 400001)
    d2 = (ys - x[0]) ** 2 + np.maximum(x[1] - g(ys), 0.0) ** 2
    return math.sqrt(d2.min())


@pytest.mark.parametrize("g", [GammaSpec.log_coercive(-3.0), GammaSpec.sqrt_sine(),
                               GammaSpec.conical(1.0, 1.0), GammaSpec.bounded(-2.0)])
@pytest.mark.parametrize("x", [(0.0, 5.0), (3.0, 2.0), (10.0, -1.0), (25.0, 8.0)])
def test_subgraph_distance_against_dense_search(g, x):
    s = SupportSpec.subgraph(g)
    assert dist_to_support(s, x) == pytest.approx(_brute_subgraph_distance(g, x), abs=2e-4)


def test_distance_zero_exactly_on_closure():
    rng = np.random.default_rng(3)
    s = SupportSpec.subgraph(GammaSpec.log_coercive(-3.0))
    h = 0.05
    for _ in range(50):
        xp = rng.uniform(-20, 20)
        g = s.gamma(xp)
        assert dist_to_support(s, [xp, g - 1e-9]) == 0.0
        assert dist_to_support(s, [xp, g + h]) <= h
        assert dist_to_support(s, [xp, g + h]) > 0.0


def test_distance_many_matches_scalar():
    pts = np.random.default_rng(0).uniform(-10, 10, size=(40, 2))
    for s in [lin(1.0), lin(-0.5), SupportSpec.ball([0.0, 0.0], 2.0),
              SupportSpec.subgraph(GammaSpec.log_coercive(-1.0))]:
        many = dist_to_support_many(s, pts)
        one = np.array([dist_to_support(s, p) for p in pts])
        np.testing.assert_allclose(many, one, atol=1e-9)


def test_annuli_distance():
    ann = SupportSpec.annuli_union(5)
    assert dist_to_support(ann, [5.5, 0.0]) == pytest.approx(0.5)
    assert dist_to_support(ann, [0.0, 12.0]) == pytest.approx(3.0)


# direction sets ------------------------------------------------------------------------------

def test_linear_subgraph_directions():
    rep = direction_sets(lin(1.0))
    U, B = rep.U, rep.B
    for th in [0.0, PI / 4, 3 * PI / 4, PI, 3 * PI / 2]:
        assert U.contains(th) and not B.contains(th)
    for th in [PI / 2, PI / 4 + 1e-6, 3 * PI / 4 - 1e-6]:
        assert B.contains(th) and not U.contains(th)
    assert rep.covers


def test_superlinear_downward_set_is_single_direction():
    U = _below_slope_set(-math.inf)
    assert U.contains(3 * PI / 2)
    assert not U.contains(3 * PI / 2 + 1e-3)
    assert U.measure() == pytest.approx(0.0)


def test_ball_has_empty_u():
    rep = direction_sets(SupportSpec.ball([0.0, 0.0], 3.0))
    assert rep.U.is_empty
    assert rep.B.measure() == pytest.approx(2 * PI)


def test_half_space_directions():
    rep = direction_sets(SupportSpec.half_space([0.0, 1.0], 0.0))
    assert rep.U.contains(0.0) and rep.U.contains(PI) and rep.U.contains(3 * PI / 2)
    assert rep.B.contains(PI / 2)


def test_complement_of_arc_away_from_zero_wraps():
    U = DirectionSet(((1.0, 2.0),), True)
    B = U.complement()
    assert B.contains(0.0) and B.contains(6.0) and B.contains(0.5)
    assert not B.contains(1.0) and not B.contains(1.5)
    assert B.measure() == pytest.approx(2 * PI - 1.0)
    assert B.complement().contains(1.5) and not B.complement().contains(0.0)


def test_complement_keeps_points_between_touching_open_arcs():
    S = DirectionSet(((0.0, 1.0), (1.0, 2.0), (5.0, 2 * PI)), False)
    C = S.complement()
    assert C.closed
    assert C.contains(0.0) and C.contains(1.0) and C.contains(3.0)
    assert not C.contains(0.5) and not C.contains(5.5)
    assert C.measure() == pytest.approx(3.0)


def test_complement_of_arc_wrapping_past_first_start():
    S = DirectionSet(((0.5, 1.0), (3.0, 2 * PI + 2.0)), True)
    C = S.complement()
    assert C.arcs == ((2.0, 3.0),) and not C.closed


@pytest.mark.parametrize("support", [lin(1.0), lin(-0.5), SupportSpec.cone(2.0),
                                     SupportSpec.subgraph(GammaSpec.log_coercive(-3.0)),
                                     SupportSpec.subgraph(GammaSpec.conical(1.0, 1.0)),
                                     SupportSpec.ball([0.0, 0.0], 1.0),
                                     SupportSpec.annuli_union(12)],
                         ids=lambda s: s.variant)
def test_u_and_b_disjoint(support):
    rep = direction_sets(support)
    th = np.linspace(0, 2 * PI, 7200, endpoint=False)
    assert not np.any(rep.U.contains(th) & rep.B.contains(th))


@pytest.mark.parametrize("support", [lin(1.0), SupportSpec.subgraph(GammaSpec.log_coercive(-3.0)),
                                     SupportSpec.subgraph(GammaSpec.conical(1.0, 1.0)),
                                     SupportSpec.ball([0.0, 0.0], 1.0)],
                         ids=lambda s: s.variant)
def test_u_and_b_cover_when_hypothesis_holds(support):
    assert direction_sets(support).covers


def test_annuli_union_fails_to_cover():
    rep = direction_sets(SupportSpec.annuli_union(12))
    assert not rep.covers
    assert rep.U.is_empty and rep.B.is_empty


def test_annuli_numeric_sees_oscillation():
    rep = direction_sets(SupportSpec.annuli_union(14), numeric=True, n_angles=24)
    assert rep.U.is_empty and rep.B.is_empty
    assert not rep.indeterminate


@pytest.mark.parametrize("support", [lin(1.0), SupportSpec.cone(2.0),
                                     SupportSpec.subgraph(GammaSpec.conical(1.0, 1.0)),
                                     SupportSpec.ball([0.0, 0.0], 1.0)], ids=lambda s: s.variant)
def test_numeric_agrees_with_analytic_away_from_boundary(support):
    n = 72
    num = direction_sets(support, numeric=True, n_angles=n)
    ana = direction_sets(support)
    th = (np.arange(n) + 0.5) * 2 * PI / n
    checked = 0
    for t in th:
        inside = ana.U.contains(t)
        if inside != ana.U.contains(t + 0.05) or inside != ana.U.contains(t - 0.05):
            continue
        assert num.U.contains(t) == inside
        assert num.B.contains(t) == ana.B.contains(t)
        checked += 1
    assert checked >= n - 8


def test_numeric_superlinear_custom_support():
    def dist(x):
        a, b = x
        if b <= -a * a:
            return 0.0
        r = minimize_scalar(lambda y: (y - a) ** 2 + (b + y * y) ** 2,
                            bounds=(-abs(a) - abs(b) - 1, abs(a) + abs(b) + 1),
                            method="bounded", options={"xatol": 1e-12})
        return math.sqrt(r.fun)

    s = SupportSpec.custom(lambda p: p[1] <= -p[0] ** 2, [(-50, 50), (-2500, 10)], distance=dist)
    rep = direction_sets(s, numeric=True, n_angles=72)
    assert rep.U.is_empty
    # only the two samples next to -e_N are left undecided at finite tau
    assert len(rep.indeterminate) == 2
    assert all(abs(t - 3 * PI / 2) < 0.05 for t in rep.indeterminate)


# envelope ------------------------------------------------------------------------------------

def test_envelope_linear_slope_one():
    env = envelope_w(lin(1.0), 2.0)
    assert np.all(env.w >= 2.0)
    # W = {x_N < |x'| + 2 sqrt 2}: the ray e_N leaves W at 2 sqrt 2
    j = int(np.argmin(np.abs(env.theta - PI / 2)))
    assert env.w[j] == pytest.approx(2 * math.sqrt(2), rel=1e-12)
    pts = np.array([[0.0, 2.8], [0.0, 2.9], [3.0, 5.8], [3.0, 5.9], [-3.0, 5.8]])
    np.testing.assert_array_equal(env.contains(pts), [True, False, True, False, True])
    assert np.all(env.unbounded == env.U.contains(env.theta))


def test_envelope_flat_subgraph():
    env = envelope_w(lin(0.0), 2.0)
    up = (env.theta > 0) & (env.theta < PI)
    np.testing.assert_allclose(env.w[up], 2.0 / np.sin(env.theta[up]), rtol=1e-12)
    assert np.all(np.isinf(env.w[~up]))


def test_envelope_ball():
    env = envelope_w(SupportSpec.ball([0.0, 0.0], 5.0), 2.0)
    np.testing.assert_array_equal(env.w, 2.0)
    assert len(env.theta) == ANGLE_GRID


@pytest.mark.parametrize("support", [lin(1.0), lin(-1.0), SupportSpec.subgraph(
    GammaSpec.log_coercive(-3.0)), SupportSpec.subgraph(GammaSpec.conical(1.0, 1.0))])
def test_envelope_continuous_where_finite(support):
    env = envelope_w(support, 2.0)
    w = np.append(env.w, env.w[0])
    dth = 2 * PI / len(env.theta)
    finite = np.isfinite(w[1:]) & np.isfinite(w[:-1])
    # w = c*/sin(d) has |dw/dtheta| <= w^2/c*: adjacent finite samples never jump
    hi = np.maximum(w[1:], w[:-1])[finite]
    with np.errstate(invalid="ignore"):
        jumps = np.abs(np.diff(w))[finite]
    assert np.all(jumps <= 1.01 * dth * hi**2 / 2.0 + 1e-12)


def test_envelope_csv(tmp_path):
    env = envelope_w(lin(1.0), 2.0, n_angles=8)
    env.to_csv(tmp_path / "e.csv")
    lines = (tmp_path / "e.csv").read_text().splitlines()
    assert lines[0] == "theta,w" and len(lines) == 9


def test_envelope_distance_empty_set_is_norm():
    pts = np.array([[3.0, 4.0], [0.0, -2.0]])
    np.testing.assert_allclose(envelope_distance(DirectionSet.empty(), pts), [5.0, 2.0])


# erosion -------------------------------------------------------------------------------------

def test_erode_ball():
    h = 0.05
    pts = erode(SupportSpec.ball([0.0, 0.0], 2.0), 1.0, h, [(-2.5, 2.5), (-2.5, 2.5)])
    r = np.linalg.norm(pts, axis=1)
    assert r.max() <= 1.0 + h
    _, grid = sample_grid([(-2.5, 2.5), (-2.5, 2.5)], h)
    assert np.all(np.isin(np.round(grid[np.linalg.norm(grid, axis=1) <= 1.0 - h] / h),
                          np.round(pts / h)).all(axis=1))


def test_erode_half_space_is_shifted():
    h = 0.05
    pts = erode(SupportSpec.half_space([0.0, 1.0], 0.0), 1.0, h, [(-1, 1), (-3, 1)])
    assert pts[:, 1].max() == pytest.approx(-1.0, abs=h)
    assert np.all(pts[:, 1] <= -1.0 + h + 1e-9)


def test_erode_annuli_core_only():
    h = 0.05
    ann = SupportSpec.annuli_union(3)
    pts = erode(ann, 1.5, h, [(-10, 10), (-10, 10)])
    # the annuli of radius 8 have half-width 1 < 1.5; only the core disk of radius 5 survives
    r = np.linalg.norm(pts, axis=1)
    assert pts.size and r.max() <= 3.5 + h
    strip = [(0.0, 10.0), (0.0, 0.5)]
    np.testing.assert_array_equal(erode(ann, 1.5, h, strip), erode_bruteforce(ann, 1.5, h, strip))


def test_erode_requires_fine_sampling():
    with pytest.raises(ValueError):
        erode(SupportSpec.ball([0.0, 0.0], 2.0), 1.0, 0.3, [(-2, 2), (-2, 2)])


def test_erode_empty_result_is_valid():
    pts = erode(SupportSpec.ball([0.0, 0.0], 1.0), 1.5, 0.1, [(-2, 2), (-2, 2)])
    assert pts.shape[0] == 0


# Hausdorff -----------------------------------------------------------------------------------

def test_hausdorff_examples():
    A = np.random.default_rng(1).random((30, 2))
    assert hausdorff(A, A) == 0.0
    assert hausdorff([[0.0, 0.0]], [[3.0, 4.0]]) == 5.0


def test_hausdorff_empty_conventions():
    assert hausdorff(np.zeros((0, 2)), np.zeros((0, 2))) == 0.0
    assert hausdorff(np.zeros((0, 2)), [[1.0, 1.0]]) == math.inf


def test_hausdorff_discs():
    h = 0.05
    _, g = sample_grid([(-2.2, 2.2), (-2.2, 2.2)], h)
    r = np.linalg.norm(g, axis=1)
    d = hausdorff(g[r <= 1], g[r <= 2])
    assert abs(d - 1.0) <= 2 * h


def test_hausdorff_brute_and_tree_agree():
    rng = np.random.default_rng(7)
    for _ in range(5):
        A, B = rng.random((200, 2)) * 10, rng.random((150, 2)) * 10
        assert hausdorff(A, B, "brute") == hausdorff(A, B, "tree")


def test_cloud_csv(tmp_path):
    cloud_to_csv(np.array([[1.0, 2.0], [3.0, 4.0]]), tmp_path / "c.csv")
    assert (tmp_path / "c.csv").read_text().splitlines() == ["x1,x2", "1.0,2.0", "3.0,4.0"]
