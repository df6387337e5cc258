import math

import numpy as np
import pytest
from scipy import integrate as spi

from waistlab.errors import DomainError, NumericError, ValidationError
from waistlab.surfaces import (
    RotSymSurface,
    exp_map,
    log_map,
    max_curvature,
    metric_norm,
    model_distance,
    surface_distance,
    validate_profile,
)


def _random_disk(rng, m, radius):
    r = radius * np.sqrt(rng.uniform(0, 1, m))
    th = rng.uniform(-math.pi, math.pi, m)
    return np.column_stack([r * np.cos(th), r * np.sin(th)])


@pytest.mark.parametrize("kappa", [-1.0, 0.0, 1.0])
def test_exp_of_zero_is_base(kappa):
    surf = RotSymSurface.model(kappa)
    base = np.array([0.3, -0.2])
    assert np.allclose(exp_map(surf, base, np.zeros(2)), base, atol=1e-15)


def test_flat_exp_and_log():
    surf = RotSymSurface.model(0.0)
    rng = np.random.default_rng(0)
    base = rng.standard_normal((50, 2))
    v = rng.standard_normal((50, 2))
    assert np.allclose(exp_map(surf, np.zeros(2), v[0]), v[0], atol=1e-12)
    assert np.allclose(exp_map(surf, base, v), base + v, atol=1e-10)
    assert np.allclose(log_map(surf, base, base + v), v, atol=1e-9)


def test_right_angle_hyperbolic_endpoints():
    surf = RotSymSurface.model(-1.0)
    o = np.zeros(2)
    p = exp_map(surf, o, np.array([0.5, 0.0]))
    q = exp_map(surf, o, np.array([0.0, 0.5]))
    d = surface_distance(surf, p, q)[0]
    assert d == pytest.approx(math.acosh(math.cosh(0.5) ** 2), abs=1e-9)


def test_radial_log_has_norm_equal_to_arc_length():
    surf = RotSymSurface.model(-1.0)
    # a radial ray is a geodesic; its length is the quadrature of the unit radial speed
    for d in (0.2, 0.9, 1.5):
        length, _ = spi.quad(lambda r: 1.0, 0.0, d)
        v = log_map(surf, np.zeros(2), np.array([d / math.sqrt(2), d / math.sqrt(2)]))
        assert np.linalg.norm(v) == pytest.approx(length, abs=1e-9)
        assert np.allclose(v / np.linalg.norm(v), [1 / math.sqrt(2)] * 2, atol=1e-10)


def test_log_of_base_is_zero():
    surf = RotSymSurface.model(1.0)
    base = np.array([0.4, 0.1])
    assert np.allclose(log_map(surf, base, base), 0.0)


@pytest.mark.parametrize("kappa", [-1.0, 1.0, -4.0])
def test_round_trip_and_closed_form_distance(kappa):
    surf = RotSymSurface.model(kappa)
    rng = np.random.default_rng(11)
    radius = 1.0 if abs(kappa) <= 1 else 0.5
    p = _random_disk(rng, 1000, radius)
    q = _random_disk(rng, 1000, radius)
    v = log_map(surf, p, q)
    back = exp_map(surf, p, v)
    assert np.max(np.hypot(*(back - q).T)) < 1e-8
    d = metric_norm(surf, p, v)
    assert np.max(np.abs(d - model_distance(kappa, p, q))) < 1e-8


def test_exp_leaving_chart_raises():
    surf = RotSymSurface.model(1.0)
    with pytest.raises(DomainError):
        exp_map(surf, np.zeros(2), np.array([3.5, 0.0]))
    with pytest.raises(DomainError):
        exp_map(surf, np.array([3.2, 0.0]), np.zeros(2))


def test_log_reports_failure_with_residual():
    surf = RotSymSurface.model(-1.0)
    with pytest.raises(NumericError) as info:
        log_map(surf, np.array([0.5, 0.0]), np.array([0.0, 1.0]), max_iter=0)
    assert info.value.residual > 0


def test_curvature_of_models_and_custom_profile():
    for kappa in (-2.0, -1.0, 0.0, 0.5):
        surf = RotSymSurface.model(kappa)
        r = np.linspace(0.05, 1.0, 20)
        assert np.allclose(surf.curvature(r), kappa, atol=1e-12)
    bump = RotSymSurface(
        h=lambda r: np.sin(r) * (1 - 0.2 * r**2),
        dh=lambda r: np.cos(r) * (1 - 0.2 * r**2) - 0.4 * r * np.sin(r),
    )
    assert max_curvature(bump, 1.0) > 1.0
    validate_profile(bump, 1.0)


def test_validate_profile_rejects_nonpositive_h():
    bad = RotSymSurface(h=lambda r: np.sin(r) - 0.5 * r, dh=lambda r: np.cos(r) - 0.5)
    with pytest.raises(ValidationError):
        validate_profile(bad, 3.0)


def test_metric_norm_tangential_scaling():
    surf = RotSymSurface.model(-1.0)
    x = np.array([[1.0, 0.0]])
    v = np.array([[0.0, 1.0]])
    assert metric_norm(surf, x, v)[0] == pytest.approx(math.sinh(1.0), rel=1e-12)
