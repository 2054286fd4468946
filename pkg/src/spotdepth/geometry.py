"""Closed-form models relating projected-spot size to tip-to-surface distance.

A fiber tip emits a cone of light with full opening angle ``theta``. Where the
cone meets a surface it paints a bright spot; the half-width of that spot,
measured through the point where the beam axis pierces the surface and
perpendicular to the surface-gradient direction, grows linearly with the
axial tip-to-surface distance:

    d = k * e1 + b,         k = 1 / tan(theta / 2)

``b`` shifts the virtual cone apex along the beam axis (negative values place
it behind the physical tip, matching fibers whose spot has nonzero size at
contact). On a sphere of radius ``r`` viewed from inside, the chord the spot
spans sits proud of the surface by the sagitta ``r - sqrt(r^2 - e1^2)``, which
adds to the axial distance.

Unit conventions
----------------
Lengths in mm, angles in radians. Metric spot extents (``e1``, ``e2``) are
half-widths. Pixel measurements entering the ``*_from_image`` helpers are
half-widths in px; callers working with full-axis pixel measurements (the
tracker convention) divide by two first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

_K_CONSISTENCY_TOL = 1e-9


@dataclass(frozen=True)
class ConeModel:
    """Beam cone: opening angle ``theta``, slope ``k = 1/tan(theta/2)``, offset ``b``.

    ``b`` (mm, may be negative) is the axial position of the virtual apex
    relative to the physical tip, so the spot half-width at axial distance
    ``d`` is ``(d - b) / k``.
    """

    theta: float
    k: float
    b: float

    def __post_init__(self):
        if not 0.0 < self.theta < math.pi:
            raise ValueError(f"theta must be in (0, pi), got {self.theta}")
        if self.k <= 0.0:
            raise ValueError(f"k must be positive, got {self.k}")
        if abs(self.k * math.tan(self.theta / 2.0) - 1.0) > _K_CONSISTENCY_TOL:
            raise ValueError("k does not match 1/tan(theta/2)")

    @classmethod
    def from_slope(cls, k: float, b: float) -> "ConeModel":
        """Build a cone from its slope; theta is recovered as 2*atan(1/k)."""
        if k <= 0.0:
            raise ValueError(f"k must be positive, got {k}")
        return cls(theta=2.0 * math.atan(1.0 / k), k=k, b=b)


@dataclass(frozen=True)
class PixelScale:
    """Image scale ``delta`` in mm per pixel."""

    delta: float

    def __post_init__(self):
        if self.delta <= 0.0:
            raise ValueError(f"delta must be positive, got {self.delta}")


@dataclass(frozen=True)
class SphereViewGeometry:
    """Spherical surface seen from inside: radius ``r``, lateral spot offset ``c``.

    ``c`` is the distance from the optical axis (which passes through the
    sphere center) to the spot location; ``v`` is the lateral extent of the
    view, so spots within the view have ``c <= v/2``.
    """

    r: float
    c: float
    v: float = 10.0

    def __post_init__(self):
        if self.r <= 0.0:
            raise ValueError(f"r must be positive, got {self.r}")
        if not 0.0 <= self.c < self.r:
            raise ValueError(f"c must be in [0, r), got c={self.c}, r={self.r}")
        if not 0.0 < self.v <= 2.0 * self.r:
            raise ValueError(f"v must be in (0, 2r], got v={self.v}, r={self.r}")


@dataclass(frozen=True)
class MetricEllipse:
    """Spot extents on the surface, mm. ``e1`` short half-width, ``e2`` long."""

    e1: float
    e2: float

    def __post_init__(self):
        if not 0.0 < self.e1 <= self.e2:
            raise ValueError(f"need 0 < e1 <= e2, got e1={self.e1}, e2={self.e2}")


def cone_from_angle(theta: float, b: float = 0.0) -> ConeModel:
    """Cone model from the full opening angle.

    >>> cone_from_angle(math.pi / 2).k
    1.0
    """
    if not 0.0 < theta < math.pi:
        raise ValueError(f"theta must be in (0, pi), got {theta}")
    return ConeModel(theta=theta, k=1.0 / math.tan(theta / 2.0), b=b)


def distance_on_plane(cone: ConeModel, e1: float) -> float:
    """Axial tip-to-plane distance from the metric spot half-width ``e1``.

    Exact for a cone-plane intersection at any surface tilt, because the
    half-chord through the axis piercing point perpendicular to the tilt
    direction is tilt-invariant.
    """
    if e1 < 0.0:
        raise ValueError(f"e1 must be >= 0, got {e1}")
    return cone.k * e1 + cone.b


def sphere_sagitta(r: float, e1: float) -> float:
    """Height of a circular arc of radius ``r`` over a half-chord ``e1``.

    Evaluated as ``e1^2 / (r + sqrt(r^2 - e1^2))``, algebraically equal to
    ``r - sqrt(r^2 - e1^2)`` but stable for ``e1 << r``.
    """
    if r <= 0.0:
        raise ValueError(f"r must be positive, got {r}")
    if not 0.0 <= e1 <= r:
        raise ValueError(f"e1 must be in [0, r], got e1={e1}, r={r}")
    return e1 * e1 / (r + math.sqrt(r * r - e1 * e1))


def distance_on_sphere(cone: ConeModel, r: float, e1: float) -> float:
    """Axial distance to a sphere of radius ``r`` from spot half-width ``e1``.

    The spot's chord plane is treated as locally flat and the sagitta of the
    sphere over that chord is added; exact for a beam aimed at the sphere
    center, and within 0.05 mm for e1 <= 1 mm at retinal radii.
    """
    return distance_on_plane(cone, e1) + sphere_sagitta(r, e1)


def metric_minor_axis_from_image(scale: PixelScale, geom: SphereViewGeometry,
                                 e1_px: float) -> float:
    """Metric spot half-width on the sphere from its image half-width in px.

    The surface at lateral offset ``c`` is tilted from the image plane, so the
    imaged extent is corrected by ``cos(atan(c / sqrt(r^2 - c^2)))``.
    """
    if e1_px < 0.0:
        raise ValueError(f"e1_px must be >= 0, got {e1_px}")
    return scale.delta * e1_px * _view_tilt_cos(geom)


def _view_tilt_cos(geom: SphereViewGeometry) -> float:
    return math.cos(math.atan(geom.c / math.sqrt(geom.r**2 - geom.c**2)))


def distance_from_image_plane(cone: ConeModel, scale: PixelScale,
                              e1_px: float) -> float:
    """Plane-surface distance directly from the image half-width in px."""
    if e1_px < 0.0:
        raise ValueError(f"e1_px must be >= 0, got {e1_px}")
    return cone.k * scale.delta * e1_px + cone.b


def distance_from_image_sphere(cone: ConeModel, scale: PixelScale,
                               geom: SphereViewGeometry, e1_px: float) -> float:
    """Sphere-surface distance from the image half-width in px.

    Applies the view-tilt correction to get the metric half-width, then the
    linear cone model plus the sagitta of the sphere over the spot chord.
    """
    e1 = metric_minor_axis_from_image(scale, geom, e1_px)
    return cone.k * e1 + cone.b + sphere_sagitta(geom.r, e1)


def min_angle_sde(geom: SphereViewGeometry, e1: float) -> float:
    """Angle (radians) quantifying how close the spot chord is to the local tangent.

    Larger values mean the flat-chord treatment of the sphere is more
    accurate; the angle approaches pi/2 as the spot shrinks. For retinal
    radii with spots inside a 10 mm view it stays above 87 degrees.
    """
    if e1 <= 0.0:
        raise ValueError(f"e1 must be positive, got {e1}")
    if geom.c <= 0.0:
        raise ValueError("c must be positive for the view-angle bound")
    r, c = geom.r, geom.c
    return math.atan((r + math.sqrt(r * r - c * c))
                     * math.cos(math.asin(c / r) / 2.0) / e1)
