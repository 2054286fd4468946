"""Tests for the direct least-squares conic/ellipse fit.

The fit is exercised against synthetically sampled conics where every
geometric quantity is known in closed form.
"""

import numpy as np
import pytest

from spotdepth.conic import (DegeneratePointsError, conic_geometry, fit_conic,
                             fit_ellipse_geometry)


def ellipse_points(cx, cy, a, b, angle, n=100, t0=0.0):
    """Exact points on an ellipse with semi-axes a >= b."""
    t = t0 + np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    x = a * np.cos(t)
    y = b * np.sin(t)
    ca, sa = np.cos(angle), np.sin(angle)
    return np.column_stack([cx + ca * x - sa * y, cy + sa * x + ca * y])


class TestExactRecovery:
    def test_circle_radius_30(self):
        pts = ellipse_points(300.0, 250.0, 30.0, 30.0, 0.0, n=64)
        cx, cy, major, minor, _ = fit_ellipse_geometry(pts)
        assert abs(major - 30.0) < 1e-9
        assert abs(minor - 30.0) < 1e-9
        assert abs(cx - 300.0) < 1e-9
        assert abs(cy - 250.0) < 1e-9

    def test_random_ellipses(self):
        rng = np.random.default_rng(42)
        for _ in range(50):
            a = rng.uniform(5.0, 80.0)
            b = rng.uniform(1.0, 1.0) * rng.uniform(0.3, 1.0) * a
            cx, cy = rng.uniform(-200.0, 200.0, size=2)
            ang = rng.uniform(0.0, np.pi)
            pts = ellipse_points(cx, cy, a, b, ang, n=int(rng.integers(12, 200)))
            fx, fy, fa, fb, fang = fit_ellipse_geometry(pts)
            assert abs(fx - cx) < 1e-8
            assert abs(fy - cy) < 1e-8
            assert abs(fa - a) < 1e-8
            assert abs(fb - b) < 1e-8
            if a / b > 1.01:
                assert min(abs(fang - ang), np.pi - abs(fang - ang)) < 1e-7

    def test_six_points_suffice(self):
        pts = ellipse_points(1.0, -2.0, 7.0, 3.0, 0.4, n=6)
        _, _, fa, fb, _ = fit_ellipse_geometry(pts)
        assert abs(fa - 7.0) < 1e-8
        assert abs(fb - 3.0) < 1e-8


class TestInvariance:
    def test_rotation_invariance_of_axes(self):
        pts = ellipse_points(10.0, 20.0, 40.0, 15.0, 0.3, n=73)
        _, _, a0, b0, _ = fit_ellipse_geometry(pts)
        rng = np.random.default_rng(7)
        for _ in range(20):
            ang = rng.uniform(0.0, 2.0 * np.pi)
            c, s = np.cos(ang), np.sin(ang)
            rot = pts @ np.array([[c, s], [-s, c]])
            _, _, a1, b1, _ = fit_ellipse_geometry(rot)
            assert abs(a1 - a0) < 1e-9
            assert abs(b1 - b0) < 1e-9

    def test_translation_invariance_of_axes(self):
        pts = ellipse_points(0.0, 0.0, 25.0, 9.0, 1.1, n=50)
        _, _, a0, b0, _ = fit_ellipse_geometry(pts)
        _, _, a1, b1, _ = fit_ellipse_geometry(pts + np.array([1234.5, -987.25]))
        assert abs(a1 - a0) < 1e-9
        assert abs(b1 - b0) < 1e-9

    def test_small_noise_small_axis_error(self):
        rng = np.random.default_rng(3)
        pts = ellipse_points(50.0, 60.0, 35.0, 20.0, 0.8, n=400)
        noisy = pts + rng.normal(0.0, 0.05, size=pts.shape)
        _, _, fa, fb, _ = fit_ellipse_geometry(noisy)
        assert abs(fa - 35.0) < 0.1
        assert abs(fb - 20.0) < 0.1


class TestDegenerateInputs:
    def test_too_few_points(self):
        pts = ellipse_points(0.0, 0.0, 10.0, 5.0, 0.0, n=5)
        with pytest.raises(DegeneratePointsError):
            fit_conic(pts)

    def test_collinear_points(self):
        t = np.linspace(0.0, 1.0, 20)
        pts = np.column_stack([t, 2.0 * t + 1.0])
        with pytest.raises(DegeneratePointsError):
            fit_conic(pts)

    def test_coincident_points(self):
        pts = np.full((10, 2), 3.5)
        with pytest.raises(DegeneratePointsError):
            fit_conic(pts)

    def test_bad_shape(self):
        with pytest.raises(ValueError):
            fit_conic(np.zeros((4, 3)))


class TestConicGeometry:
    def test_axis_aligned_conic(self):
        # x^2/25 + y^2/9 = 1
        cx, cy, a, b, ang = conic_geometry([1.0 / 25.0, 0.0, 1.0 / 9.0, 0.0, 0.0, -1.0])
        assert abs(cx) < 1e-12 and abs(cy) < 1e-12
        assert abs(a - 5.0) < 1e-12
        assert abs(b - 3.0) < 1e-12
        assert ang < 1e-12 or abs(ang - np.pi) < 1e-12

    def test_negated_coefficients_same_geometry(self):
        coeffs = np.array([1.0 / 25.0, 0.0, 1.0 / 9.0, 0.0, 0.0, -1.0])
        g1 = conic_geometry(coeffs)
        g2 = conic_geometry(-coeffs)
        assert np.allclose(g1[:4], g2[:4], atol=1e-12)

    def test_hyperbola_rejected(self):
        with pytest.raises(DegeneratePointsError):
            conic_geometry([1.0, 0.0, -1.0, 0.0, 0.0, -1.0])
