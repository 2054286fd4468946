"""Direct least-squares ellipse fitting on point sets.

Fits the conic ``a x^2 + b x y + c y^2 + d x + e y + f = 0`` subject to the
ellipse constraint ``4ac - b^2 = 1``, which guarantees an elliptical solution
for any non-degenerate input. The constrained problem reduces to a 3x3
eigendecomposition of scatter-matrix blocks, solved here in float64.

Points are shifted to their centroid and isotropically scaled before the fit
and the conic is mapped back afterwards, so recovered axes are invariant to
translation/rotation of the input set to well below 1e-9.
"""

from __future__ import annotations

import numpy as np


class DegeneratePointsError(ValueError):
    """Raised when the input points do not determine an ellipse."""


def _normalize(points: np.ndarray):
    centroid = points.mean(axis=0)
    shifted = points - centroid
    rms = np.sqrt((shifted**2).sum(axis=1).mean())
    if rms <= 0.0:
        raise DegeneratePointsError("all points coincide")
    scale = np.sqrt(2.0) / rms
    return shifted * scale, centroid, scale


def _denormalize_conic(coeffs: np.ndarray, centroid: np.ndarray, s: float) -> np.ndarray:
    # conic was fit in u = s (x - mx), v = s (y - my)
    A, B, C, D, E, F = coeffs
    mx, my = centroid
    s2 = s * s
    a = A * s2
    b = B * s2
    c = C * s2
    d = -2.0 * A * s2 * mx - B * s2 * my + D * s
    e = -B * s2 * mx - 2.0 * C * s2 * my + E * s
    f = (A * s2 * mx * mx + B * s2 * mx * my + C * s2 * my * my
         - D * s * mx - E * s * my + F)
    out = np.array([a, b, c, d, e, f])
    return out / np.linalg.norm(out)


def fit_conic(points) -> np.ndarray:
    """Fit an ellipse-constrained conic to ``points``.

    Parameters
    ----------
    points : (N, 2) array_like
        At least 6 non-collinear points.

    Returns
    -------
    (6,) ndarray
        Conic coefficients ``[a, b, c, d, e, f]`` (unit norm) in the input
        coordinate frame.

    Raises
    ------
    DegeneratePointsError
        Fewer than 6 points, collinear points, or no elliptical solution.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError(f"expected (N, 2) points, got shape {pts.shape}")
    if pts.shape[0] < 6:
        raise DegeneratePointsError(f"need at least 6 points, got {pts.shape[0]}")
    if not np.all(np.isfinite(pts)):
        raise ValueError("points contain non-finite values")

    norm, centroid, scale = _normalize(pts)
    x = norm[:, 0]
    y = norm[:, 1]
    d1 = np.column_stack([x * x, x * y, y * y])
    d2 = np.column_stack([x, y, np.ones_like(x)])
    s1 = d1.T @ d1
    s2 = d1.T @ d2
    s3 = d2.T @ d2
    try:
        t = -np.linalg.solve(s3, s2.T)
    except np.linalg.LinAlgError as exc:
        raise DegeneratePointsError("points are collinear or rank-deficient") from exc
    m = s1 + s2 @ t
    # premultiply by inv(C1) for constraint matrix C1 = [[0,0,2],[0,-1,0],[2,0,0]]
    m = np.array([m[2] / 2.0, -m[1], m[0] / 2.0])
    eigval, eigvec = np.linalg.eig(m)
    a1 = None
    for i in range(3):
        if abs(np.imag(eigval[i])) > 1e-9 * max(1.0, abs(eigval[i])):
            continue
        v = np.real(eigvec[:, i])
        if 4.0 * v[0] * v[2] - v[1] ** 2 > 0.0:
            a1 = v
            break
    if a1 is None:
        raise DegeneratePointsError("no elliptical solution for these points")
    coeffs = np.concatenate([a1, t @ a1])
    return _denormalize_conic(coeffs, centroid, scale)


def conic_geometry(coeffs):
    """Center, semi-axes, and orientation of an elliptical conic.

    Parameters
    ----------
    coeffs : (6,) array_like
        Conic ``[a, b, c, d, e, f]``.

    Returns
    -------
    (cx, cy, semi_major, semi_minor, angle)
        ``angle`` is the major-axis direction in radians, in ``[0, pi)``.

    Raises
    ------
    DegeneratePointsError
        If the conic is not a real ellipse.
    """
    a, b, c, d, e, f = np.asarray(coeffs, dtype=float)
    m33 = np.array([[a, b / 2.0], [b / 2.0, c]])
    det = np.linalg.det(m33)
    if det <= 0.0:
        raise DegeneratePointsError("conic is not an ellipse")
    cx, cy = np.linalg.solve(2.0 * m33, [-d, -e])
    # conic value at the center; (p-c)^T m33 (p-c) = -f0 on the curve
    f0 = (a * cx * cx + b * cx * cy + c * cy * cy + d * cx + e * cy + f)
    lam, vec = np.linalg.eigh(m33)
    axes_sq = -f0 / lam
    if np.any(axes_sq <= 0.0):
        raise DegeneratePointsError("conic has no real points")
    semi = np.sqrt(axes_sq)
    major = int(np.argmax(semi))
    major_dir = vec[:, major]
    angle = float(np.arctan2(major_dir[1], major_dir[0])) % np.pi
    return float(cx), float(cy), float(semi[major]), float(semi[1 - major]), angle


def fit_ellipse_geometry(points):
    """Convenience composition of :func:`fit_conic` and :func:`conic_geometry`."""
    return conic_geometry(fit_conic(points))
