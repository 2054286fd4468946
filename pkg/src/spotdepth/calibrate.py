"""Fitting the distance model to measured (spot size, reference distance) pairs.

Calibration works entirely in tracker units: the spot size is the full
minor axis in pixels and the reference distance is in mm. A straight line

    d = slope * a_min_px + intercept

is fit by least squares; its coefficients convert to the metric cone model
via ``CalibrationFit.cone``. For spots on a sphere away from the optical
axis, :func:`fit_sphere_offset` additionally recovers the lateral offset
``c`` that best explains the data under the view-tilt + sagitta model.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .geometry import (ConeModel, PixelScale, SphereViewGeometry,
                       distance_from_image_sphere)

SAMPLE_FIELDS = ("e1_px", "d_r_mm")
RESIDUAL_FIELDS = ("e1_px", "d_r_mm", "d_hat_mm", "residual_mm")


@dataclass(frozen=True)
class DistanceSample:
    """One calibration pair: spot full minor axis (px), reference distance (mm)."""

    e1_px: float
    d_r_mm: float

    def __post_init__(self):
        if not math.isfinite(self.e1_px) or self.e1_px <= 0.0:
            raise ValueError(f"e1_px must be positive and finite, got {self.e1_px}")
        if not math.isfinite(self.d_r_mm):
            raise ValueError(f"d_r_mm must be finite, got {self.d_r_mm}")


@dataclass(frozen=True)
class GoodnessMetrics:
    """Fit quality over a sample set; errors are predicted minus reference, mm."""

    r2: float
    rmse: float
    mean_abs: float
    max_abs: float
    std: float
    n: int


@dataclass(frozen=True)
class CalibrationFit:
    """Fitted line ``d = slope * a_min_px + intercept`` with its goodness."""

    slope: float
    intercept: float
    metrics: GoodnessMetrics

    def cone(self, scale: PixelScale) -> ConeModel:
        """Equivalent metric cone: full-px slope to half-width-mm slope."""
        return ConeModel.from_slope(k=2.0 * self.slope / scale.delta,
                                    b=self.intercept)

    def predict(self, e1_px):
        return self.slope * np.asarray(e1_px, dtype=float) + self.intercept


@dataclass(frozen=True)
class SphereFit:
    """Lateral offset recovered on a sphere, with the resulting goodness."""

    c: float
    metrics: GoodnessMetrics


def goodness_metrics(predicted, reference) -> GoodnessMetrics:
    """Error statistics of ``predicted`` against ``reference`` (both mm).

    ``r2`` is the coefficient of determination; NaN when the reference has
    zero variance. ``rmse`` uses the plain 1/n divisor.
    """
    pred = np.asarray(predicted, dtype=float)
    ref = np.asarray(reference, dtype=float)
    if pred.shape != ref.shape or pred.ndim != 1 or pred.size == 0:
        raise ValueError("predicted and reference must be equal-length 1-D arrays")
    err = pred - ref
    ss_res = float(np.sum(err**2))
    ss_tot = float(np.sum((ref - ref.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0.0 else float("nan")
    return GoodnessMetrics(r2=r2,
                           rmse=float(np.sqrt(np.mean(err**2))),
                           mean_abs=float(np.mean(np.abs(err))),
                           max_abs=float(np.max(np.abs(err))),
                           std=float(np.std(err)),
                           n=int(err.size))


def fit_plane_model(samples, ddof: int = 0) -> CalibrationFit:
    """Least-squares line through (a_min_px, d_mm) calibration pairs.

    ``ddof`` only affects the reported RMSE divisor ``n - ddof`` (use 2 for
    the unbiased regression estimate); the coefficients are plain OLS.
    """
    if len(samples) < 2:
        raise ValueError(f"need at least 2 samples, got {len(samples)}")
    x = np.array([s.e1_px for s in samples])
    d = np.array([s.d_r_mm for s in samples])
    if np.ptp(x) == 0.0:
        raise ValueError("spot sizes have zero spread, cannot fit a slope")
    if not 0 <= ddof < len(samples):
        raise ValueError(f"ddof must be in [0, n), got {ddof}")
    a = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(a, d, rcond=None)
    pred = slope * x + intercept
    metrics = goodness_metrics(pred, d)
    if ddof:
        rmse = float(np.sqrt(np.sum((pred - d) ** 2) / (len(samples) - ddof)))
        metrics = GoodnessMetrics(r2=metrics.r2, rmse=rmse, mean_abs=metrics.mean_abs,
                                  max_abs=metrics.max_abs, std=metrics.std, n=metrics.n)
    return CalibrationFit(slope=float(slope), intercept=float(intercept),
                          metrics=metrics)


def _sphere_predictions(samples, plane_fit: CalibrationFit, scale: PixelScale,
                        r: float, c: float) -> np.ndarray:
    cone = plane_fit.cone(scale)
    geom = SphereViewGeometry(r=r, c=c, v=2.0 * r)
    return np.array([distance_from_image_sphere(cone, scale, geom, s.e1_px / 2.0)
                     for s in samples])


def fit_sphere_offset(samples, plane_fit: CalibrationFit, scale: PixelScale,
                      r: float, c_max_frac: float = 0.95,
                      tol: float = 1e-4) -> SphereFit:
    """Recover the lateral spot offset ``c`` on a sphere of known radius.

    Minimizes the RMSE of the sphere-model distance predictions over
    ``c in [0, c_max_frac * r]`` by golden-section search (the objective is
    smooth and unimodal in ``c``: the view-tilt factor decreases
    monotonically). ``plane_fit`` supplies the cone slope and offset.
    """
    if not samples:
        raise ValueError("no samples")
    if not 0.0 < c_max_frac < 1.0:
        raise ValueError(f"c_max_frac must be in (0, 1), got {c_max_frac}")
    d_ref = np.array([s.d_r_mm for s in samples])

    def objective(c):
        err = _sphere_predictions(samples, plane_fit, scale, r, c) - d_ref
        return float(np.sqrt(np.mean(err**2)))

    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    lo, hi = 0.0, c_max_frac * r
    x1 = hi - invphi * (hi - lo)
    x2 = lo + invphi * (hi - lo)
    f1, f2 = objective(x1), objective(x2)
    while hi - lo > tol:
        if f1 < f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - invphi * (hi - lo)
            f1 = objective(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + invphi * (hi - lo)
            f2 = objective(x2)
    c_hat = (lo + hi) / 2.0
    pred = _sphere_predictions(samples, plane_fit, scale, r, c_hat)
    return SphereFit(c=c_hat, metrics=goodness_metrics(pred, d_ref))


def write_samples_csv(path, samples) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SAMPLE_FIELDS)
        for s in samples:
            writer.writerow([repr(float(s.e1_px)), repr(float(s.d_r_mm))])


def read_samples_csv(path) -> list[DistanceSample]:
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != list(SAMPLE_FIELDS):
            raise ValueError(f"{path}: unexpected samples header {reader.fieldnames}")
        for rec in reader:
            out.append(DistanceSample(e1_px=float(rec["e1_px"]),
                                      d_r_mm=float(rec["d_r_mm"])))
    return out


def write_residuals_csv(path, samples, predictions) -> None:
    if len(samples) != len(predictions):
        raise ValueError("samples and predictions length mismatch")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESIDUAL_FIELDS)
        for s, d_hat in zip(samples, predictions):
            writer.writerow([repr(float(s.e1_px)), repr(float(s.d_r_mm)),
                             repr(float(d_hat)),
                             repr(float(d_hat) - float(s.d_r_mm))])


def format_fit_report(fit: CalibrationFit, sphere: SphereFit | None = None,
                      header: dict | None = None) -> str:
    """Flat key=value report, one entry per line, reproducible byte for byte."""
    lines = []
    for key, value in (header or {}).items():
        lines.append(f"{key}={value}")
    lines.append(f"slope_mm_per_px={fit.slope!r}")
    lines.append(f"intercept_mm={fit.intercept!r}")
    for name, value in vars(fit.metrics).items():
        lines.append(f"fit_{name}={value!r}")
    if sphere is not None:
        lines.append(f"sphere_c_mm={sphere.c!r}")
        for name, value in vars(sphere.metrics).items():
            lines.append(f"sphere_{name}={value!r}")
    return "\n".join(lines) + "\n"
