"""Spot detection and frame-to-frame tracking in microscope images.

The tracker crops a square patch around the last known spot position,
cleans it up (median filter then Gaussian), thresholds at a fixed
intensity, keeps the largest bright connected component, follows its
outer border, and fits an ellipse to the border pixels. The fitted
center reseeds the patch for the next frame, so the pipeline needs one
seed point and then runs unattended.

Reported axes are full axis lengths in pixels. The geometric distance
model consumes metric half-widths, so callers halve ``a_min_px`` and
fold in the pixel pitch before applying it.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import cv2
import numpy as np

from .conic import DegeneratePointsError, fit_ellipse_geometry

OBSERVATION_FIELDS = ("frame", "a_min_px", "a_maj_px", "ex_px", "ey_px", "status")

STATUS_OK = "ok"
STATUS_EMPTY = "empty"
STATUS_OVERSIZE = "oversize"


@dataclass(frozen=True)
class TrackerConfig:
    """Tunables for the patch tracker.

    ``patch_half`` is half the square patch side; ``min_area`` rejects
    specks, ``max_minor_px`` rejects blobs too large to be the spot
    (defaults to the patch side, i.e. a spot overflowing the patch).
    """

    patch_half: int = 50
    threshold: int = 200
    min_area: int = 20
    max_minor_px: float | None = None
    median_ksize: int = 3
    gaussian_sigma: float = 1.0

    def __post_init__(self):
        if self.patch_half < 8:
            raise ValueError("patch_half must be at least 8 px")
        if not 0 < self.threshold <= 255:
            raise ValueError("threshold must be in (0, 255]")
        if self.min_area < 1:
            raise ValueError("min_area must be positive")
        if self.median_ksize not in (0, 3, 5, 7):
            raise ValueError("median_ksize must be 0 (off) or an odd size 3..7")
        if self.gaussian_sigma < 0.0:
            raise ValueError("gaussian_sigma must be >= 0")
        if self.max_minor_px is None:
            object.__setattr__(self, "max_minor_px", float(2 * self.patch_half))


@dataclass(frozen=True)
class EllipseObservation:
    """Per-frame detection result; axes are full lengths in px.

    For a non-``ok`` status the numeric fields are NaN.
    """

    frame: int
    a_min_px: float
    a_maj_px: float
    ex_px: float
    ey_px: float
    status: str = STATUS_OK

    @classmethod
    def missing(cls, frame: int, status: str):
        nan = float("nan")
        return cls(frame=frame, a_min_px=nan, a_maj_px=nan,
                   ex_px=nan, ey_px=nan, status=status)

    @property
    def ok(self) -> bool:
        return self.status == STATUS_OK


def _as_gray(image: np.ndarray) -> np.ndarray:
    img = np.asarray(image)
    if img.ndim == 3 and img.shape[2] == 3:
        # BGR luma, same weights the camera pipeline would apply
        img = (0.114 * img[:, :, 0] + 0.587 * img[:, :, 1]
               + 0.299 * img[:, :, 2])
        return np.clip(np.rint(img), 0, 255).astype(np.uint8)
    if img.ndim != 2:
        raise ValueError(f"expected a grayscale or BGR image, got shape {img.shape}")
    if img.dtype != np.uint8:
        raise ValueError("expected a uint8 image")
    return img


def patch_check(point, shape, patch_half: int):
    """Clamp a tracking point so a full patch fits inside the image.

    Returns integer (x, y) with ``x`` in ``[p, cols-p-1]`` and ``y`` in
    ``[p, rows-p-1]``.
    """
    rows, cols = shape[0], shape[1]
    p = patch_half
    if cols < 2 * p + 1 or rows < 2 * p + 1:
        raise ValueError(f"image {cols}x{rows} too small for patch half-size {p}")
    x = min(max(int(round(point[0])), p), cols - p - 1)
    y = min(max(int(round(point[1])), p), rows - p - 1)
    return x, y


def _best_component(mask: np.ndarray, min_area: int, patch_half: int):
    """Label image and the best component id, or None if nothing qualifies."""
    n, labels, stats, centroids = cv2.connectedComponentsWithStats(mask, connectivity=8)
    best = None
    best_key = None
    center = np.array([mask.shape[1] / 2.0, mask.shape[0] / 2.0])
    for i in range(1, n):
        area = int(stats[i, cv2.CC_STAT_AREA])
        if area <= min_area:
            continue
        dist = float(np.hypot(*(centroids[i] - center)))
        key = (-area, dist)
        if best is None or key < best_key:
            best = i
            best_key = key
    return labels, best


def detect_in_patch(patch: np.ndarray, config: TrackerConfig, frame: int = 0):
    """Detect the spot ellipse in a pre-cropped patch.

    Returns an :class:`EllipseObservation` in patch coordinates.
    """
    work = patch
    if config.median_ksize:
        work = cv2.medianBlur(work, config.median_ksize)
    if config.gaussian_sigma > 0.0:
        work = cv2.GaussianBlur(work, (0, 0), sigmaX=config.gaussian_sigma)
    mask = (work >= config.threshold).astype(np.uint8)
    labels, best = _best_component(mask, config.min_area, config.patch_half)
    if best is None:
        return EllipseObservation.missing(frame, STATUS_EMPTY)
    blob = (labels == best).astype(np.uint8)
    contours, _ = cv2.findContours(blob, cv2.RETR_EXTERNAL, cv2.CHAIN_APPROX_NONE)
    points = max(contours, key=len).reshape(-1, 2).astype(float)
    try:
        cx, cy, semi_major, semi_minor, _ = fit_ellipse_geometry(points)
    except DegeneratePointsError:
        return EllipseObservation.missing(frame, STATUS_EMPTY)
    a_min = 2.0 * semi_minor
    a_maj = 2.0 * semi_major
    if a_min >= config.max_minor_px:
        return EllipseObservation.missing(frame, STATUS_OVERSIZE)
    return EllipseObservation(frame=frame, a_min_px=a_min, a_maj_px=a_maj,
                              ex_px=cx, ey_px=cy, status=STATUS_OK)


def detect_spot(image: np.ndarray, seed, config: TrackerConfig | None = None,
                frame: int = 0) -> EllipseObservation:
    """Detect the spot near ``seed`` (x, y) in one image, image coordinates."""
    config = config or TrackerConfig()
    gray = _as_gray(image)
    x, y = patch_check(seed, gray.shape, config.patch_half)
    p = config.patch_half
    patch = gray[y - p:y + p, x - p:x + p]
    obs = detect_in_patch(patch, config, frame)
    if not obs.ok:
        return obs
    return EllipseObservation(frame=frame, a_min_px=obs.a_min_px, a_maj_px=obs.a_maj_px,
                              ex_px=obs.ex_px + (x - p), ey_px=obs.ey_px + (y - p),
                              status=STATUS_OK)


def seed_from_brightest(image: np.ndarray, sigma: float = 15.0):
    """Initial seed: location of the brightest point after heavy smoothing."""
    gray = _as_gray(image).astype(np.float32)
    smooth = cv2.GaussianBlur(gray, (0, 0), sigmaX=sigma)
    idx = int(np.argmax(smooth))
    y, x = np.unravel_index(idx, smooth.shape)
    return float(x), float(y)


def track_pattern(images, seed=None, config: TrackerConfig | None = None):
    """Track the spot across ``images``, reseeding on each detection.

    ``seed`` is the initial (x, y); if None it is taken from the brightest
    region of the first frame. Missed frames keep the previous seed.
    Returns a list of :class:`EllipseObservation`, one per frame.
    """
    config = config or TrackerConfig()
    observations = []
    point = seed
    for frame, image in enumerate(images):
        if point is None:
            point = seed_from_brightest(image)
        obs = detect_spot(image, point, config, frame)
        observations.append(obs)
        if obs.ok:
            point = (obs.ex_px, obs.ey_px)
    return observations


def write_observations_csv(path, observations) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(OBSERVATION_FIELDS)
        for obs in observations:
            if obs.ok:
                writer.writerow([obs.frame]
                                + [repr(float(v)) for v in
                                   (obs.a_min_px, obs.a_maj_px, obs.ex_px, obs.ey_px)]
                                + [obs.status])
            else:
                writer.writerow([obs.frame, "", "", "", "", obs.status])


def read_observations_csv(path) -> list[EllipseObservation]:
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != list(OBSERVATION_FIELDS):
            raise ValueError(f"{path}: unexpected observations header {reader.fieldnames}")
        for rec in reader:
            if rec["status"] == STATUS_OK:
                out.append(EllipseObservation(
                    frame=int(rec["frame"]), a_min_px=float(rec["a_min_px"]),
                    a_maj_px=float(rec["a_maj_px"]), ex_px=float(rec["ex_px"]),
                    ey_px=float(rec["ey_px"]), status=STATUS_OK))
            else:
                out.append(EllipseObservation.missing(int(rec["frame"]), rec["status"]))
    return out
