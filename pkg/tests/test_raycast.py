"""Tests for the ray-cast footprint oracle.

The oracle is itself the reference for the closed-form models, so these
tests pin it against independently derived conic algebra: for a cone of
half-angle ``a`` (slope ``tan a``) hitting a plane tilted ``phi`` at axial
apex distance ``m``, the intersection conic has

    semi-major A = m tan(a) cos(phi) / (cos(phi)^2 - tan(a)^2 sin(phi)^2)
    semi-minor B = m tan(a) cos(phi) / sqrt(cos(phi)^2 - tan(a)^2 sin(phi)^2)

while the half-chord through the axis piercing point perpendicular to the
tilt is exactly ``m tan(a)`` at any tilt.
"""

import math

import numpy as np
import pytest

from spotdepth.conic import fit_ellipse_geometry
from spotdepth.geometry import ConeModel, cone_from_angle, distance_on_plane, distance_on_sphere
from spotdepth.raycast import NoIntersectionError, Plane, Sphere, raycast_oracle

Z = np.array([0.0, 0.0, 1.0])


def tilted_plane(phi, z0=3.0, point_xy=(0.0, 0.0)):
    n = np.array([math.sin(phi), 0.0, -math.cos(phi)])
    return Plane(point=[point_xy[0], point_xy[1], z0], normal=n)


class TestPlaneCase:
    def test_perpendicular_circle(self):
        cone = cone_from_angle(math.radians(60.0))
        res = raycast_oracle([0, 0, 0], Z, cone, Plane([0, 0, 3.0], [0, 0, -1.0]))
        want = 3.0 * math.tan(math.radians(30.0))
        assert res.ellipse.e1 == pytest.approx(want, abs=1e-12)
        assert res.ellipse.e2 == pytest.approx(want, abs=1e-12)
        assert res.distance == pytest.approx(3.0, abs=1e-12)

    def test_oblique_minor_axis_reproduces_distance(self):
        cone = cone_from_angle(math.radians(60.0))
        res = raycast_oracle([0, 0, 0], Z, cone, tilted_plane(math.radians(40.0), z0=4.0))
        assert distance_on_plane(cone, res.ellipse.e1) == pytest.approx(res.distance, abs=1e-9)

    def test_oblique_major_axis_matches_conic_algebra(self):
        phi = math.radians(35.0)
        theta = math.radians(50.0)
        cone = cone_from_angle(theta, b=-0.8)
        res = raycast_oracle([0.2, -0.4, 0.1], Z, cone, tilted_plane(phi, z0=3.6))
        m = res.distance - cone.b  # apex-to-plane axial distance
        beta = math.tan(theta / 2.0)
        c1, s1 = math.cos(phi), math.sin(phi)
        a_want = m * beta * c1 / (c1 * c1 - beta * beta * s1 * s1)
        assert res.ellipse.e2 == pytest.approx(a_want, rel=1e-9)
        assert res.ellipse.e1 == pytest.approx(m * beta, rel=1e-9)

    def test_chord_convention_vs_full_conic_fit(self):
        # the piercing-point chord is slightly shorter than the true conic
        # semi-minor at nonzero tilt; both are computed here and compared
        phi = math.radians(40.0)
        theta = math.radians(60.0)
        cone = cone_from_angle(theta)
        res = raycast_oracle([0, 0, 0], Z, cone, tilted_plane(phi, z0=3.0))
        n = np.array([math.sin(phi), 0.0, -math.cos(phi)])
        t1 = np.array([math.cos(phi), 0.0, math.sin(phi)])
        t2 = np.array([0.0, 1.0, 0.0])
        rel = res.points - res.points.mean(axis=0)
        uv = np.column_stack([rel @ t1, rel @ t2])
        _, _, a_fit, b_fit, _ = fit_ellipse_geometry(uv)
        beta = math.tan(theta / 2.0)
        c1, s1 = math.cos(phi), math.sin(phi)
        b_want = res.distance * beta * c1 / math.sqrt(c1 * c1 - beta * beta * s1 * s1)
        assert b_fit == pytest.approx(b_want, rel=1e-9)
        assert b_fit > res.ellipse.e1  # strict at nonzero tilt
        assert a_fit == pytest.approx(res.ellipse.e2, rel=1e-9)

    def test_random_cases_are_exact(self):
        rng = np.random.default_rng(123)
        for _ in range(200):
            theta = rng.uniform(math.radians(10.0), math.radians(119.0))
            tilt_max = min(math.radians(60.0), math.radians(88.0) - theta / 2.0)
            phi = rng.uniform(0.0, max(tilt_max, 1e-3))
            d = rng.uniform(0.05, 10.0)
            b = rng.uniform(-8.0, 0.5)
            cone = cone_from_angle(theta, b=min(b, d - 1e-3))
            res = raycast_oracle([0, 0, 0], Z, cone, tilted_plane(phi, z0=d))
            assert abs(distance_on_plane(cone, res.ellipse.e1) - res.distance) < 1e-9


class TestSphereCase:
    def test_radial_approach_is_exact(self):
        cone = ConeModel.from_slope(k=2.0, b=0.0)
        d = 2.044532584492515
        res = raycast_oracle([0, 0, 0], Z, cone, Sphere([0, 0, d - 11.25], 11.25))
        assert res.ellipse.e1 == pytest.approx(1.0, abs=1e-9)
        assert res.distance == pytest.approx(d, abs=1e-12)
        assert distance_on_sphere(cone, 11.25, res.ellipse.e1) == pytest.approx(d, abs=1e-9)

    def test_tilted_approach_within_tolerance(self):
        cone = ConeModel.from_slope(k=2.0, b=0.0)
        g = math.radians(15.0)
        u = np.array([math.sin(g), 0.0, math.cos(g)])
        errs = []
        for r in (10.0, 11.25, 12.5):
            for d_t in (0.5, 1.2, 2.0):
                zc = math.sqrt(r * r - (d_t * math.sin(g)) ** 2) - d_t * math.cos(g)
                res = raycast_oracle([0, 0, zc], u, cone, Sphere([0, 0, 0], r))
                assert res.ellipse.e1 <= 1.05
                errs.append(abs(distance_on_sphere(cone, r, res.ellipse.e1) - res.distance))
        assert max(errs) < 0.05

    def test_error_grows_with_spot_size(self):
        cone = ConeModel.from_slope(k=2.0, b=0.0)
        g = math.radians(15.0)
        u = np.array([math.sin(g), 0.0, math.cos(g)])
        r = 11.25
        errs = []
        for d_t in np.linspace(0.2, 2.0, 8):
            zc = math.sqrt(r * r - (d_t * math.sin(g)) ** 2) - d_t * math.cos(g)
            res = raycast_oracle([0, 0, zc], u, cone, Sphere([0, 0, 0], r))
            errs.append(abs(distance_on_sphere(cone, r, res.ellipse.e1) - res.distance))
        assert all(b > a - 1e-4 for a, b in zip(errs, errs[1:]))
        assert errs[-1] > errs[0]


class TestFailureModes:
    def test_plane_behind_tip(self):
        cone = cone_from_angle(math.radians(30.0))
        with pytest.raises(NoIntersectionError):
            raycast_oracle([0, 0, 0], Z, cone, Plane([0, 0, -1.0], [0, 0, -1.0]))

    def test_mantle_ray_parallel_to_plane(self):
        # tilt + theta/2 > 90 deg: part of the mantle never meets the plane
        cone = cone_from_angle(math.radians(80.0))
        with pytest.raises(NoIntersectionError):
            raycast_oracle([0, 0, 0], Z, cone, tilted_plane(math.radians(55.0), z0=2.0))

    def test_sphere_missed(self):
        cone = cone_from_angle(math.radians(30.0))
        with pytest.raises(NoIntersectionError):
            raycast_oracle([0, 0, 0], Z, cone, Sphere([50.0, 0.0, -3.0], 1.0))

    def test_sample_count_validation(self):
        cone = cone_from_angle(math.radians(30.0))
        plane = Plane([0, 0, 1.0], [0, 0, -1.0])
        with pytest.raises(ValueError):
            raycast_oracle([0, 0, 0], Z, cone, plane, samples=32)
        with pytest.raises(ValueError):
            raycast_oracle([0, 0, 0], Z, cone, plane, samples=66)

    def test_unsupported_surface(self):
        cone = cone_from_angle(math.radians(30.0))
        with pytest.raises(TypeError):
            raycast_oracle([0, 0, 0], Z, cone, "plane")


class TestResultStructure:
    def test_point_count_and_piercing(self):
        cone = cone_from_angle(math.radians(40.0))
        res = raycast_oracle([0, 0, 0], Z, cone, Plane([0, 0, 2.0], [0, 0, -1.0]),
                             samples=128)
        assert res.points.shape == (128, 3)
        assert np.allclose(res.piercing, [0.0, 0.0, 2.0], atol=1e-12)
        # every footprint point lies on the surface
        assert np.allclose(res.points[:, 2], 2.0, atol=1e-12)
