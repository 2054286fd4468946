"""Distance estimation from tracked spots, and accuracy-vs-speed analysis.

Estimation applies a calibrated line (slope per full-axis pixel plus
intercept) to tracked minor axes; on a sphere the view-tilt and sagitta
corrections are folded in. The dynamic analysis bins the absolute
estimation error by instrument tip speed to find how fast the tip can
move before the estimate degrades.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .calibrate import CalibrationFit
from .geometry import (PixelScale, SphereViewGeometry,
                       distance_from_image_plane, distance_from_image_sphere)

RECORD_FIELDS = ("frame", "t_s", "speed_mm_s", "a_min_px",
                 "d_hat_mm", "d_true_mm", "error_mm")
TRAJECTORY_FIELDS = ("t_s", "x_mm", "y_mm", "z_mm", "ax", "ay", "az")


@dataclass(frozen=True)
class PlaneSurface:
    """Flat target; the calibrated line applies unchanged."""


@dataclass(frozen=True)
class SphereSurface:
    """Spherical target of radius ``r`` with the spot ``c`` off the optical axis."""

    r: float
    c: float = 0.0

    def __post_init__(self):
        if self.r <= 0.0:
            raise ValueError(f"r must be positive, got {self.r}")
        if not 0.0 <= self.c < self.r:
            raise ValueError(f"c must be in [0, r), got c={self.c}, r={self.r}")


@dataclass(frozen=True)
class EstimationRecord:
    """Per-frame estimate next to ground truth (NaN where unavailable)."""

    frame: int
    t_s: float
    speed_mm_s: float
    a_min_px: float
    d_hat_mm: float
    d_true_mm: float
    error_mm: float


def estimate_distance(a_min_px: float, fit: CalibrationFit, scale: PixelScale,
                      surface: PlaneSurface | SphereSurface) -> float:
    """Tip-to-surface distance (mm) from a tracked full minor axis (px)."""
    if not math.isfinite(a_min_px):
        return float("nan")
    cone = fit.cone(scale)
    if isinstance(surface, PlaneSurface):
        return distance_from_image_plane(cone, scale, a_min_px / 2.0)
    if isinstance(surface, SphereSurface):
        geom = SphereViewGeometry(r=surface.r, c=surface.c, v=2.0 * surface.r)
        return distance_from_image_sphere(cone, scale, geom, a_min_px / 2.0)
    raise TypeError(f"unsupported surface {type(surface).__name__}")


def tip_speed(times, positions) -> np.ndarray:
    """Tip speed (mm/s) by central differences, one-sided at the ends.

    ``times`` must be strictly increasing; ``positions`` is (N, 3) in mm.
    """
    t = np.asarray(times, dtype=float)
    p = np.asarray(positions, dtype=float)
    if t.ndim != 1 or p.shape != (t.size, 3):
        raise ValueError("need times (N,) and positions (N, 3)")
    if t.size < 2:
        raise ValueError("need at least 2 samples for a speed")
    if np.any(np.diff(t) <= 0.0):
        raise ValueError("times must be strictly increasing")
    vel = np.gradient(p, t, axis=0)
    return np.linalg.norm(vel, axis=1)


def build_records(observations, ground_truth, fit: CalibrationFit,
                  scale: PixelScale, surface, speeds=None) -> list[EstimationRecord]:
    """Join tracked observations with ground truth into estimation records.

    ``observations`` and ``ground_truth`` are matched by list position and
    must agree on frame numbers. ``speeds`` is an optional per-frame array.
    """
    if len(observations) != len(ground_truth):
        raise ValueError("observations and ground truth length mismatch")
    if speeds is None:
        speeds = np.full(len(observations), float("nan"))
    records = []
    for obs, gt, speed in zip(observations, ground_truth, speeds):
        if obs.frame != gt.frame:
            raise ValueError(f"frame mismatch: {obs.frame} vs {gt.frame}")
        d_hat = estimate_distance(obs.a_min_px, fit, scale, surface)
        records.append(EstimationRecord(
            frame=obs.frame, t_s=gt.t_s, speed_mm_s=float(speed),
            a_min_px=obs.a_min_px, d_hat_mm=d_hat, d_true_mm=gt.d_true_mm,
            error_mm=d_hat - gt.d_true_mm))
    return records


@dataclass(frozen=True)
class SpeedErrorAnalysis:
    """Absolute estimation error binned by tip speed.

    ``threshold_speed`` is the top edge of the largest contiguous run of
    speed bins, starting from rest, whose mean absolute error stays within
    the accuracy limit; None if already the slowest bin fails. Empty bins
    inside the run are skipped rather than ending it.
    """

    bin_edges: np.ndarray
    bin_mean_abs: np.ndarray
    bin_counts: np.ndarray
    spearman_rho: float
    spearman_defined: bool
    threshold_speed: float | None
    accuracy_limit_mm: float

    @property
    def bin_centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])


def speed_error_analysis(speeds, errors, bin_width: float = 0.25,
                         accuracy_limit_mm: float = 0.5) -> SpeedErrorAnalysis:
    """Bin |error| by speed and rank-correlate the two.

    NaN errors (lost frames) are dropped. The Spearman coefficient is
    reported as 0 with ``spearman_defined=False`` when it cannot be
    computed (fewer than 2 valid frames or zero variance).
    """
    speeds = np.asarray(speeds, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if speeds.shape != errors.shape or speeds.ndim != 1:
        raise ValueError("speeds and errors must be equal-length 1-D arrays")
    if bin_width <= 0.0:
        raise ValueError("bin_width must be positive")
    keep = np.isfinite(speeds) & np.isfinite(errors)
    speeds = speeds[keep]
    abs_err = np.abs(errors[keep])
    if speeds.size == 0:
        raise ValueError("no valid (speed, error) pairs")

    n_bins = max(int(np.ceil(speeds.max() / bin_width)), 1)
    edges = np.arange(n_bins + 1) * bin_width
    idx = np.minimum((speeds / bin_width).astype(int), n_bins - 1)
    counts = np.bincount(idx, minlength=n_bins)
    sums = np.bincount(idx, weights=abs_err, minlength=n_bins)
    with np.errstate(invalid="ignore"):
        means = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)

    rho, defined = 0.0, False
    if speeds.size >= 2 and np.ptp(speeds) > 0.0 and np.ptp(abs_err) > 0.0:
        rho = float(stats.spearmanr(speeds, abs_err).statistic)
        if math.isfinite(rho):
            defined = True
        else:
            rho = 0.0

    threshold = None
    for i in range(n_bins):
        if counts[i] == 0:
            continue
        if means[i] <= accuracy_limit_mm:
            threshold = edges[i + 1]
        else:
            break
    return SpeedErrorAnalysis(bin_edges=edges, bin_mean_abs=means,
                              bin_counts=counts, spearman_rho=rho,
                              spearman_defined=defined, threshold_speed=threshold,
                              accuracy_limit_mm=accuracy_limit_mm)


def format_speed_report(analysis: SpeedErrorAnalysis,
                        header: dict | None = None) -> str:
    """Flat key=value report with one bin_<lo>_<hi> entry per speed bin."""
    lines = []
    for key, value in (header or {}).items():
        lines.append(f"{key}={value}")
    lines.append(f"spearman_rho={analysis.spearman_rho!r}")
    lines.append(f"spearman_defined={analysis.spearman_defined}")
    lines.append(f"accuracy_limit_mm={analysis.accuracy_limit_mm!r}")
    threshold = analysis.threshold_speed
    lines.append(f"threshold_speed_mm_s={'' if threshold is None else repr(float(threshold))}")
    for i in range(analysis.bin_counts.size):
        lo, hi = analysis.bin_edges[i], analysis.bin_edges[i + 1]
        mean = analysis.bin_mean_abs[i]
        mean_txt = "" if not math.isfinite(mean) else repr(float(mean))
        lines.append(f"bin_{lo:g}_{hi:g}=count:{int(analysis.bin_counts[i])},"
                     f"mean_abs_mm:{mean_txt}")
    return "\n".join(lines) + "\n"


def write_records_csv(path, records) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RECORD_FIELDS)
        for r in records:
            writer.writerow([r.frame] + [repr(float(v)) for v in
                                         (r.t_s, r.speed_mm_s, r.a_min_px,
                                          r.d_hat_mm, r.d_true_mm, r.error_mm)])


def read_records_csv(path) -> list[EstimationRecord]:
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != list(RECORD_FIELDS):
            raise ValueError(f"{path}: unexpected records header {reader.fieldnames}")
        for rec in reader:
            out.append(EstimationRecord(
                frame=int(rec["frame"]), t_s=float(rec["t_s"]),
                speed_mm_s=float(rec["speed_mm_s"]), a_min_px=float(rec["a_min_px"]),
                d_hat_mm=float(rec["d_hat_mm"]), d_true_mm=float(rec["d_true_mm"]),
                error_mm=float(rec["error_mm"])))
    return out


def write_trajectory_csv(path, samples) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRAJECTORY_FIELDS)
        for s in samples:
            writer.writerow([repr(float(s.t))]
                            + [repr(float(v)) for v in s.position]
                            + [repr(float(v)) for v in s.axis])


def read_trajectory_csv(path):
    from .synth import TrajectorySample
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != list(TRAJECTORY_FIELDS):
            raise ValueError(f"{path}: unexpected trajectory header {reader.fieldnames}")
        for rec in reader:
            out.append(TrajectorySample(
                t=float(rec["t_s"]),
                position=[float(rec["x_mm"]), float(rec["y_mm"]), float(rec["z_mm"])],
                axis=[float(rec["ax"]), float(rec["ay"]), float(rec["az"])]))
    return out
