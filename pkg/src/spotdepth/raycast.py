"""Brute-force spot-footprint oracle via analytic ray casting.

Casts rays uniformly around the beam-cone mantle, intersects each with the
surface analytically, and measures the footprint independently of the
closed-form models in :mod:`spotdepth.geometry`. Used to validate those
models and to generate analytic ground truth for the synthetic renderer.

Footprint extents are reported as half-widths (mm) of chords through the
point where the beam axis pierces the surface:

* plane case -- ``e1`` is the half-chord perpendicular to the surface-gradient
  direction (tilt-invariant, equals ``(d - b)/k`` exactly) and ``e2`` the
  half-chord along it, which spans the exact major axis of the intersection
  conic because the piercing point lies on the major-axis line;
* sphere case -- the 3-D intersection curve is projected onto the tangent
  plane at the axial hit point and a least-squares conic is fit; ``e1``/``e2``
  are its semi-axes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .conic import fit_ellipse_geometry
from .geometry import ConeModel, MetricEllipse


class NoIntersectionError(RuntimeError):
    """A mantle ray (or the beam axis) does not hit the surface."""


def _unit(v, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=float).reshape(3)
    n = np.linalg.norm(v)
    if n <= 0.0:
        raise ValueError(f"{name} must be a nonzero vector")
    return v / n


@dataclass(frozen=True)
class Plane:
    """Plane through ``point`` with unit ``normal``."""

    point: np.ndarray
    normal: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "point", np.asarray(self.point, dtype=float).reshape(3))
        object.__setattr__(self, "normal", _unit(self.normal, "normal"))


@dataclass(frozen=True)
class Sphere:
    """Sphere with ``center`` and ``radius`` (mm)."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(3))
        if self.radius <= 0.0:
            raise ValueError(f"radius must be positive, got {self.radius}")


@dataclass
class RaycastResult:
    ellipse: MetricEllipse
    distance: float                      # axial tip-to-surface distance, mm
    piercing: np.ndarray                 # beam axis hit point on the surface
    points: np.ndarray = field(repr=False)  # (N, 3) footprint curve


def _frame(axis: np.ndarray, prefer: np.ndarray | None) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal pair completing ``axis``; ``e1`` aligned with ``prefer`` if possible."""
    e1 = None
    if prefer is not None:
        p = prefer - np.dot(prefer, axis) * axis
        n = np.linalg.norm(p)
        if n > 1e-12:
            e1 = p / n
    if e1 is None:
        helper = np.array([1.0, 0.0, 0.0])
        if abs(np.dot(helper, axis)) > 0.9:
            helper = np.array([0.0, 1.0, 0.0])
        e1 = helper - np.dot(helper, axis) * axis
        e1 /= np.linalg.norm(e1)
    e2 = np.cross(axis, e1)
    return e1, e2


# rays hitting the surface exactly at their origin (tip at contact) are only
# legal for the axial distance ray; mantle rays start at the apex behind the
# tip and must travel a strictly positive distance
_CONTACT_TOL = 1e-9


def _ray_plane(origins: np.ndarray, dirs: np.ndarray, plane: Plane,
               allow_zero: bool = False) -> np.ndarray:
    denom = dirs @ plane.normal
    num = (plane.point - origins) @ plane.normal
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(np.abs(denom) > 0.0, num / denom, -1.0)
    if allow_zero:
        t = np.where(np.abs(t) <= _CONTACT_TOL, 0.0, t)
        bad = t < 0.0
    else:
        bad = t <= 0.0
    if np.any(~np.isfinite(t)) or np.any(bad):
        raise NoIntersectionError("a cone ray does not reach the plane")
    return origins + t[..., None] * dirs


def _ray_sphere(origins: np.ndarray, dirs: np.ndarray, sphere: Sphere,
                allow_zero: bool = False) -> np.ndarray:
    oc = origins - sphere.center
    b = 2.0 * np.einsum("...i,...i->...", dirs, oc)
    c = np.einsum("...i,...i->...", oc, oc) - sphere.radius**2
    disc = b * b - 4.0 * c
    if np.any(disc <= 0.0):
        raise NoIntersectionError("a cone ray does not reach the sphere")
    sq = np.sqrt(disc)
    # numerically stable quadratic roots
    q = -0.5 * (b + np.sign(b) * sq)
    q = np.where(q == 0.0, -0.5 * sq, q)
    r1 = q
    r2 = c / q
    if allow_zero:
        r1 = np.where(np.abs(r1) <= _CONTACT_TOL, 0.0, r1)
        r2 = np.where(np.abs(r2) <= _CONTACT_TOL, 0.0, r2)
        lo = np.minimum(r1, r2)
        hi = np.maximum(r1, r2)
        t = np.where(lo >= 0.0, lo, hi)
        if np.any(t < 0.0):
            raise NoIntersectionError("a cone ray does not reach the sphere")
    else:
        lo = np.minimum(r1, r2)
        hi = np.maximum(r1, r2)
        t = np.where(lo > 0.0, lo, hi)
        if np.any(t <= 0.0):
            raise NoIntersectionError("a cone ray does not reach the sphere")
    return origins + t[..., None] * dirs


def _surface_normal(surface, point: np.ndarray) -> np.ndarray:
    if isinstance(surface, Plane):
        return surface.normal
    return (point - surface.center) / surface.radius


def raycast_oracle(tip, axis, cone: ConeModel, surface, samples: int = 256) -> RaycastResult:
    """Measure the spot footprint by casting ``samples`` mantle rays.

    Parameters
    ----------
    tip : (3,) array_like
        Physical tip position, mm.
    axis : (3,) array_like
        Beam axis direction (normalized internally).
    cone : ConeModel
        The mantle rays start at the virtual apex ``tip + b * axis``.
    surface : Plane or Sphere
    samples : int
        Number of mantle rays, >= 64 and divisible by 4 so that the
        chord-aligned directions are sampled exactly.

    Raises
    ------
    NoIntersectionError
        If the beam axis or any mantle ray misses the surface.
    """
    if samples < 64:
        raise ValueError(f"samples must be >= 64, got {samples}")
    if samples % 4 != 0:
        raise ValueError(f"samples must be divisible by 4, got {samples}")
    tip = np.asarray(tip, dtype=float).reshape(3)
    axis = _unit(axis, "axis")
    apex = tip + cone.b * axis

    if isinstance(surface, Plane):
        hit = _ray_plane(tip[None, :], axis[None, :], surface, allow_zero=True)[0]
    elif isinstance(surface, Sphere):
        hit = _ray_sphere(tip[None, :], axis[None, :], surface, allow_zero=True)[0]
    else:
        raise TypeError(f"unsupported surface type {type(surface).__name__}")
    distance = float(np.dot(hit - tip, axis))

    e1_dir, e2_dir = _frame(axis, _surface_normal(surface, hit))
    half = cone.theta / 2.0
    psi = 2.0 * np.pi * np.arange(samples) / samples
    dirs = (np.cos(half) * axis[None, :]
            + np.sin(half) * (np.cos(psi)[:, None] * e1_dir[None, :]
                              + np.sin(psi)[:, None] * e2_dir[None, :]))
    origins = np.broadcast_to(apex, dirs.shape)
    if isinstance(surface, Plane):
        points = _ray_plane(origins, dirs, surface)
    else:
        points = _ray_sphere(origins, dirs, surface)

    if isinstance(surface, Plane):
        q = samples // 4
        e1 = 0.5 * float(np.linalg.norm(points[q] - points[3 * q]))
        e2 = 0.5 * float(np.linalg.norm(points[0] - points[samples // 2]))
        if e1 > e2:  # perpendicular incidence up to roundoff
            e1, e2 = e2, e1
    else:
        normal = _surface_normal(surface, hit)
        t1, t2 = _frame(normal, axis)
        rel = points - hit
        in_plane = rel - np.outer(rel @ normal, normal)
        uv = np.column_stack([in_plane @ t1, in_plane @ t2])
        _, _, semi_major, semi_minor, _ = fit_ellipse_geometry(uv)
        e1, e2 = semi_minor, semi_major

    return RaycastResult(ellipse=MetricEllipse(e1=e1, e2=e2), distance=distance,
                         piercing=hit, points=points)
