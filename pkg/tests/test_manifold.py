"""Circle projection, normal score field, and normal/tangent decomposition."""

import numpy as np
import pytest

from clvr import ToyManifold, decompose, normal_score, project

UNIT = ToyManifold(radius=1.0)


def test_manifold_validation():
    with pytest.raises(ValueError, match="kind"):
        ToyManifold(radius=1.0, kind="sphere")
    with pytest.raises(ValueError, match="radius"):
        ToyManifold(radius=0.0)


def test_project_pulls_outside_points_radially():
    np.testing.assert_allclose(project(UNIT, (2.0, 0.0)), (1.0, 0.0), atol=1e-15)


def test_project_pushes_inside_points_outward():
    got = project(UNIT, (0.0, 0.25))
    np.testing.assert_allclose(got, (0.0, 1.0), atol=1e-15)


def test_project_fixes_points_on_the_circle():
    theta = 0.7
    x = (np.cos(theta), np.sin(theta))
    np.testing.assert_allclose(project(UNIT, x), x, atol=1e-15)


def test_project_respects_center_and_radius():
    m = ToyManifold(radius=2.0, center=(3.0, -1.0))
    np.testing.assert_allclose(project(m, (6.0, -1.0)), (5.0, -1.0), atol=1e-14)


def test_project_undefined_at_center():
    with pytest.raises(ValueError, match="center"):
        project(UNIT, (0.0, 0.0))


def test_normal_score_points_back_to_the_circle():
    got = normal_score(UNIT, (1.1, 0.0), sigma=0.1)
    np.testing.assert_allclose(got, (-10.0, 0.0), atol=1e-10)


def test_normal_score_quadruples_when_sigma_halves():
    x = (0.0, 0.8)
    wide = normal_score(UNIT, x, sigma=0.2)
    narrow = normal_score(UNIT, x, sigma=0.1)
    np.testing.assert_allclose(narrow, 4.0 * wide, rtol=1e-12)


def test_normal_score_is_radial():
    rng = np.random.default_rng(0)
    for _ in range(100):
        theta = rng.uniform(0, 2 * np.pi)
        r = rng.uniform(0.2, 1.8)
        x = np.array([r * np.cos(theta), r * np.sin(theta)])
        s = normal_score(UNIT, x, sigma=0.3)
        # parallel to the radial direction: zero cross product
        cross = s[0] * x[1] - s[1] * x[0]
        assert abs(cross) < 1e-9


def test_normal_score_requires_tubular_neighborhood():
    with pytest.raises(ValueError, match="tubular"):
        normal_score(UNIT, (2.5, 0.0), sigma=0.1)
    with pytest.raises(ValueError, match="sigma"):
        normal_score(UNIT, (1.1, 0.0), sigma=0.0)


def test_decompose_splits_radial_and_tangential_exactly():
    x = (2.0, 0.0)
    v_n, v_t = decompose(UNIT, x, (3.0, 4.0))
    np.testing.assert_allclose(v_n, (3.0, 0.0), atol=1e-15)
    np.testing.assert_allclose(v_t, (0.0, 4.0), atol=1e-15)


def test_decompose_parts_sum_to_the_vector():
    rng = np.random.default_rng(1)
    for _ in range(200):
        x = rng.standard_normal(2) * 2 + (0.1, 0.1)
        v = rng.standard_normal(2)
        v_n, v_t = decompose(UNIT, x, v)
        np.testing.assert_allclose(v_n + v_t, v, atol=1e-15)
        assert abs(float(np.dot(v_n, v_t))) < 1e-12


def test_decompose_satisfies_pythagoras():
    rng = np.random.default_rng(2)
    for _ in range(200):
        x = rng.standard_normal(2) + (0.05, 0.05)
        v = rng.standard_normal(2) * 3
        v_n, v_t = decompose(UNIT, x, v)
        lhs = float(np.dot(v, v))
        rhs = float(np.dot(v_n, v_n)) + float(np.dot(v_t, v_t))
        assert lhs == pytest.approx(rhs, rel=1e-12)


def test_decompose_undefined_at_center():
    with pytest.raises(ValueError, match="center"):
        decompose(UNIT, (0.0, 0.0), (1.0, 0.0))
