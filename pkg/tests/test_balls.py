import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from waistlab.balls import (
    BallSystem,
    ContractionPath,
    interpolate,
    kp_experiment,
    kp_scenarios,
    lens_area,
    pairwise_monotonicity_check,
    planar_lipschitz_content_check,
    union_volume,
)
from waistlab.errors import ValidationError
from waistlab.geometry import unit_ball_volume
from waistlab.minkowski import circle_set, polyline_set


def test_union_volume_closed_forms():
    assert union_volume(BallSystem([[0.0, 0.0]], 1.0), 10_000, 0) == (math.pi, 0.0)
    v, _ = union_volume(BallSystem([[0.0, 0.0], [2.0, 0.0]], 1.0), 10_000, 0)
    assert v == pytest.approx(2 * math.pi)
    v, _ = union_volume(BallSystem([[0.0, 0.0], [1.0, 0.0]], 1.0), 10_000, 0)
    assert v == pytest.approx(2 * math.pi - (2 * math.pi / 3 - math.sqrt(3) / 2), rel=1e-14)


def test_lens_formula_against_monte_carlo():
    for dist in (0.3, 1.0, 1.7):
        s = BallSystem([[0.0, 0.0], [dist, 0.0]], 1.0)
        v, se = union_volume(s, 400_000, 1, exact=False)
        assert abs(v - lens_area(1.0, dist)) < 4 * se


def test_union_volume_three_dimensional_single_ball():
    v, se = union_volume(BallSystem([[0.0, 0.0, 0.0]], 0.5), 200_000, 2)
    assert abs(v - unit_ball_volume(3) / 8) < 4 * se


def test_union_volume_many_centers_uses_tree():
    rng = np.random.default_rng(0)
    c = rng.uniform(0, 1, (200, 2))
    v_tree, se = union_volume(BallSystem(c, 0.05), 100_000, 3)
    pts = np.random.default_rng(9).uniform(-0.05, 1.05, (200_000, 2))
    inside = np.min(np.linalg.norm(pts[:, None, :] - c[None], axis=2), axis=1) <= 0.05
    brute = 1.1**2 * inside.mean()
    assert abs(v_tree - brute) < 5 * se


def test_union_volume_monotone_in_balls_and_radius():
    rng = np.random.default_rng(4)
    c = rng.uniform(-1, 1, (6, 3))
    v5, s5 = union_volume(BallSystem(c[:5], 0.4), 200_000, 5)
    v6, s6 = union_volume(BallSystem(c, 0.4), 200_000, 5)
    v6b, s6b = union_volume(BallSystem(c, 0.5), 200_000, 5)
    assert v6 >= v5 - 3 * math.hypot(s5, s6)
    assert v6b >= v6 - 3 * math.hypot(s6, s6b)


def test_ball_system_validation():
    with pytest.raises(ValidationError):
        BallSystem([[0.0, 0.0], [0.0, 0.0]], 1.0)
    with pytest.raises(ValidationError):
        BallSystem([[0.0, 0.0]], 0.0)
    with pytest.raises(ValidationError):
        BallSystem([[np.nan, 0.0]], 1.0)
    with pytest.raises(ValidationError):
        union_volume(BallSystem([[0.0, 0.0, 0.0]], 1.0), 100, 0)


def test_interpolate_endpoints_and_distance():
    x = np.array([[0.0, 0.0], [2.0, 0.0]])
    fx = np.array([[0.0, 0.0], [1.0, 0.0]])
    path = ContractionPath(x, fx)
    assert np.allclose(interpolate(path, 0.0), np.hstack([x, np.zeros_like(x)]))
    assert np.allclose(interpolate(path, math.pi / 2), np.hstack([np.zeros_like(x), fx]), atol=1e-15)
    mid = interpolate(path, math.pi / 4)
    assert np.linalg.norm(mid[0] - mid[1]) == pytest.approx(math.sqrt(2.5))
    with pytest.raises(ValidationError):
        interpolate(path, 2.0)


def test_pairwise_monotonicity():
    rng = np.random.default_rng(1)
    x = rng.uniform(-1, 1, (20, 2))
    rep = pairwise_monotonicity_check(ContractionPath(x, x.copy()))
    assert rep.passed and rep.constant_pairs == 190
    rep = pairwise_monotonicity_check(ContractionPath(x, np.zeros_like(x)), np.linspace(0, math.pi / 2, 50))
    assert rep.passed and rep.strictly_decreasing_pairs == 190
    c = x.mean(axis=0)
    rep = pairwise_monotonicity_check(ContractionPath(x, c + 0.5 * (x - c)), np.linspace(0, math.pi / 2, 50))
    assert rep.passed
    with pytest.raises(ValidationError, match="not 1-Lipschitz"):
        pairwise_monotonicity_check(ContractionPath(x, 2 * x))


def test_kp_two_ball_merge_follows_lens_formula():
    path, t = kp_scenarios()["two-balls-merge"]
    rep = kp_experiment(path, t, 10_000, 0)
    assert rep.exact and rep.passed
    assert rep.volumes[0] == pytest.approx(2 * math.pi)
    assert rep.volumes[-1] == pytest.approx(math.pi)
    for a, v in zip(rep.alpha, rep.volumes):
        assert v == pytest.approx(lens_area(1.0, 2 * math.cos(a)), rel=1e-14)


@pytest.mark.parametrize("name", ["identity", "projection-15", "contraction-20", "fold-line"])
def test_kp_scenarios_nonincreasing(name):
    path, t = kp_scenarios()[name]
    rep = kp_experiment(path, t, 200_000, 1)
    assert rep.passed, rep.as_dict()
    assert rep.to_csv().splitlines()[0] == "alpha,volume,stderr"


def test_kp_detects_expansion():
    rng = np.random.default_rng(2)
    x = rng.uniform(-0.5, 0.5, (10, 2))
    path = ContractionPath(x, 2 * x)
    with pytest.raises(ValidationError):
        kp_experiment(path, 0.3, 20_000, 0)


def test_kp_worker_independence():
    path, t = kp_scenarios()["projection-15"]
    a = kp_experiment(path, t, 150_000, 3, workers=1)
    b = kp_experiment(path, t, 150_000, 3, workers=3)
    assert np.array_equal(a.volumes, b.volumes) and np.array_equal(a.diffs, b.diffs)


def test_planar_lipschitz_circle_projection():
    ts = [0.2, 0.1, 0.05]
    proj = lambda p: np.column_stack([p[:, 0], np.zeros(len(p))])
    rep = planar_lipschitz_content_check(circle_set(), proj, ts, 200_000, 1)
    assert rep.passed
    for t, vs, vi, se in zip(rep.t, rep.source_volumes, rep.image_volumes, rep.stderr):
        assert abs(vs - 4 * math.pi * t) < 4 * se
        assert abs(vi - (4 * t + math.pi * t * t)) < 4 * se


def test_planar_lipschitz_identity_and_scaling():
    rng = np.random.default_rng(5)
    verts = np.cumsum(rng.uniform(-0.5, 0.5, (6, 2)), axis=0)
    X = polyline_set(verts)
    rep = planar_lipschitz_content_check(X, lambda p: p, [0.1, 0.05], 100_000, 2)
    assert rep.passed
    for vs, vi, se in zip(rep.source_volumes, rep.image_volumes, rep.stderr):
        assert abs(vs - vi) < 4 * se
    rep = planar_lipschitz_content_check(X, lambda p: 0.8 * p, [0.1, 0.05], 100_000, 2)
    assert rep.passed
    assert all(vi < vs - 5 * se for vs, vi, se in zip(rep.source_volumes, rep.image_volumes, rep.stderr))
    with pytest.raises(ValidationError):
        planar_lipschitz_content_check(X, lambda p: 1.5 * p, [0.1], 10_000, 2)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.0, 1.0), st.integers(2, 8), st.integers(0, 10_000))
def test_homotopy_distances_nonincreasing_property(lam, m, seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((m, 3))
    q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    fx = lam * x @ q.T
    rep = pairwise_monotonicity_check(ContractionPath(x, fx), np.linspace(0, math.pi / 2, 20))
    assert rep.passed
    # single-ball volume is unchanged by interpolation: radii are fixed
    for a in (0.0, 0.7, math.pi / 2):
        assert interpolate(ContractionPath(x, fx), a).shape == (m, 6)
