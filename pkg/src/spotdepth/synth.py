"""Synthetic scene renderer: a reproducible substitute for the physical rig.

Renders the spot a cone-shaped beam paints on a plane or on the inside of a
sphere, viewed by a downward-looking orthographic camera with constant
mm-per-pixel scale. Each frame comes with analytic ground truth (axial
tip-to-surface distance, full minor axis of the projected footprint in px,
and its center) computed from the ray-cast oracle, never from pixels.

Photometric model
-----------------
The spot is a flat top at ``peak`` intensity with a 1 px linear anti-aliased
falloff at its rim, composited over the background (flat gray or a texture).
The falloff ramp is positioned ``edge_offset_px`` inside the analytic
boundary (negative = outside). The default places the ramp so that the
reference tracker (median 3, Gaussian sigma 1.0, threshold 200) localizes
the boundary through binary-contour pixel centers without bias; threshold
binarization plus border following otherwise systematically shrinks the
recovered footprint by about a pixel.

Motion blur is the union of ``n_sub`` sub-exposure footprints interpolated
across the exposure window, so a moving spot grows a full-brightness tail.
Ground truth for a blurred frame refers to the exposure midpoint.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

import cv2
import numpy as np

from .geometry import ConeModel, PixelScale
from .raycast import Plane, RaycastResult, Sphere, raycast_oracle
from .conic import fit_ellipse_geometry

# Ramp placement (px, relative to the analytic boundary; negative = outside)
# calibrated so the default tracker recovers the analytic footprint with
# |axis bias| < 0.2 px over plane, tilted-plane, and in-sphere scenes.
DEFAULT_EDGE_OFFSET_PX = -1.45

GROUND_TRUTH_FIELDS = ("frame", "t_s", "d_true_mm", "e1_true_px", "cx_px", "cy_px")


@dataclass(frozen=True)
class Camera:
    """Orthographic camera: ``delta`` mm/px, image size, principal point.

    World +z runs along the optical axis away from the camera; world (0, 0)
    maps to the principal point.
    """

    scale: PixelScale
    width: int = 1024
    height: int = 768
    cx: float | None = None
    cy: float | None = None

    def __post_init__(self):
        if self.width < 16 or self.height < 16:
            raise ValueError("image must be at least 16x16")
        if self.cx is None:
            object.__setattr__(self, "cx", self.width / 2.0)
        if self.cy is None:
            object.__setattr__(self, "cy", self.height / 2.0)

    def world_to_px(self, xy: np.ndarray) -> np.ndarray:
        xy = np.asarray(xy, dtype=float)
        return np.column_stack([xy[..., 0] / self.scale.delta + self.cx,
                                xy[..., 1] / self.scale.delta + self.cy])


@dataclass(frozen=True)
class NoiseModel:
    """Additive Gaussian noise plus salt-and-pepper outliers, seeded."""

    gaussian_sigma: float = 0.0
    salt_pepper_fraction: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.gaussian_sigma < 0.0:
            raise ValueError("gaussian_sigma must be >= 0")
        if not 0.0 <= self.salt_pepper_fraction < 1.0:
            raise ValueError("salt_pepper_fraction must be in [0, 1)")


@dataclass(frozen=True)
class TrajectorySample:
    """Tip pose at time ``t`` (s): position (mm) and beam axis direction."""

    t: float
    position: np.ndarray
    axis: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float).reshape(3))
        ax = np.asarray(self.axis, dtype=float).reshape(3)
        n = np.linalg.norm(ax)
        if n <= 0.0:
            raise ValueError("axis must be a nonzero vector")
        object.__setattr__(self, "axis", ax / n)


@dataclass(frozen=True)
class GroundTruth:
    frame: int
    t_s: float
    d_true_mm: float
    e1_true_px: float
    cx_px: float
    cy_px: float


@dataclass(frozen=True)
class SceneSpec:
    """Everything needed to render one spot: surface, beam, pose, camera."""

    surface: Plane | Sphere
    cone: ConeModel
    tip: np.ndarray
    axis: np.ndarray
    camera: Camera
    background: int | np.ndarray = 80
    peak: int = 255
    edge_offset_px: float = DEFAULT_EDGE_OFFSET_PX

    def __post_init__(self):
        object.__setattr__(self, "tip", np.asarray(self.tip, dtype=float).reshape(3))
        ax = np.asarray(self.axis, dtype=float).reshape(3)
        n = np.linalg.norm(ax)
        if n <= 0.0:
            raise ValueError("axis must be a nonzero vector")
        object.__setattr__(self, "axis", ax / n)
        if not isinstance(self.background, np.ndarray):
            if not 0 <= int(self.background) <= 255:
                raise ValueError("background level must be in [0, 255]")
        else:
            bg = self.background
            if bg.shape != (self.camera.height, self.camera.width) or bg.dtype != np.uint8:
                raise ValueError("background texture must be uint8 with the camera shape")
        if not 200 < int(self.peak) <= 255:
            raise ValueError("peak intensity must exceed the nominal detection "
                             f"threshold 200 and fit in 8 bits, got {self.peak}")


def _surface_depth(surface, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """z of the camera-facing surface at lateral world coords (x, y); NaN if none."""
    if isinstance(surface, Plane):
        n = surface.normal
        if abs(n[2]) < 1e-9:
            raise ValueError("plane is edge-on to the camera")
        return (surface.point @ n - n[0] * x - n[1] * y) / n[2]
    rx = x - surface.center[0]
    ry = y - surface.center[1]
    h2 = surface.radius**2 - rx * rx - ry * ry
    with np.errstate(invalid="ignore"):
        return np.where(h2 >= 0.0, surface.center[2] + np.sqrt(np.maximum(h2, 0.0)), np.nan)


def _footprint(scene: SceneSpec, tip, axis) -> RaycastResult:
    return raycast_oracle(tip, axis, scene.cone, scene.surface)


def _footprint_bbox(scene: SceneSpec, res: RaycastResult, pad: int):
    px = scene.camera.world_to_px(res.points[:, :2])
    cam = scene.camera
    u0 = max(int(np.floor(px[:, 0].min())) - pad, 0)
    u1 = min(int(np.ceil(px[:, 0].max())) + pad + 1, cam.width)
    v0 = max(int(np.floor(px[:, 1].min())) - pad, 0)
    v1 = min(int(np.ceil(px[:, 1].max())) + pad + 1, cam.height)
    if u0 >= u1 or v0 >= v1:
        raise ValueError("spot footprint falls outside the image")
    return u0, u1, v0, v1


def _coverage(scene: SceneSpec, tip, axis, bbox) -> np.ndarray:
    """Anti-aliased spot coverage in [0, 1] over the bbox pixel grid."""
    u0, u1, v0, v1 = bbox
    cam = scene.camera
    u = np.arange(u0, u1, dtype=float)
    v = np.arange(v0, v1, dtype=float)
    x = (u - cam.cx) * cam.scale.delta
    y = (v - cam.cy) * cam.scale.delta
    xx, yy = np.meshgrid(x, y)
    zz = _surface_depth(scene.surface, xx, yy)
    apex = tip + scene.cone.b * axis
    dx = xx - apex[0]
    dy = yy - apex[1]
    dz = zz - apex[2]
    norm = np.sqrt(dx * dx + dy * dy + dz * dz)
    # inside-the-cone indicator field; zero level set = analytic spot boundary
    g = (dx * axis[0] + dy * axis[1] + dz * axis[2]) / norm - math.cos(scene.cone.theta / 2.0)
    g = np.where(np.isfinite(g), g, -1.0)
    gy, gx = np.gradient(g)
    grad = np.sqrt(gx * gx + gy * gy)
    s = g / np.maximum(grad, 1e-15)  # approx signed distance to the boundary, px
    return np.clip(s - scene.edge_offset_px, 0.0, 1.0)


def _apply_noise(img: np.ndarray, noise: NoiseModel | None, frame: int) -> np.ndarray:
    if noise is None or (noise.gaussian_sigma == 0.0 and noise.salt_pepper_fraction == 0.0):
        return np.clip(np.rint(img), 0, 255).astype(np.uint8)
    rng = np.random.default_rng(np.random.SeedSequence(entropy=noise.seed,
                                                       spawn_key=(frame,)))
    out = img.astype(float)
    if noise.gaussian_sigma > 0.0:
        out = out + rng.normal(0.0, noise.gaussian_sigma, size=out.shape)
    if noise.salt_pepper_fraction > 0.0:
        hits = rng.random(out.shape) < noise.salt_pepper_fraction
        values = np.where(rng.random(out.shape) < 0.5, 0.0, 255.0)
        out = np.where(hits, values, out)
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def _ground_truth(scene: SceneSpec, res: RaycastResult, frame: int, t: float) -> GroundTruth:
    px = scene.camera.world_to_px(res.points[:, :2])
    cx, cy, semi_major, semi_minor, _ = fit_ellipse_geometry(px)
    return GroundTruth(frame=frame, t_s=t, d_true_mm=res.distance,
                       e1_true_px=2.0 * semi_minor, cx_px=cx, cy_px=cy)


def _background(scene: SceneSpec) -> np.ndarray:
    cam = scene.camera
    if isinstance(scene.background, np.ndarray):
        return scene.background.astype(float)
    return np.full((cam.height, cam.width), float(scene.background))


def render_frame(scene: SceneSpec, noise: NoiseModel | None = None,
                 frame: int = 0, t: float = 0.0):
    """Render one stationary frame.

    Returns ``(image, ground_truth)`` with ``image`` uint8 (H, W).
    """
    res = _footprint(scene, scene.tip, scene.axis)
    bbox = _footprint_bbox(scene, res, pad=8)
    cov = _coverage(scene, scene.tip, scene.axis, bbox)
    img = _background(scene)
    u0, u1, v0, v1 = bbox
    patch = img[v0:v1, u0:u1]
    img[v0:v1, u0:u1] = patch * (1.0 - cov) + float(scene.peak) * cov
    return _apply_noise(img, noise, frame), _ground_truth(scene, res, frame, t)


def _interp_pose(trajectory: list[TrajectorySample], t: float):
    times = np.array([s.t for s in trajectory])
    pos = np.array([s.position for s in trajectory])
    axes = np.array([s.axis for s in trajectory])
    p = np.array([np.interp(t, times, pos[:, i]) for i in range(3)])
    a = np.array([np.interp(t, times, axes[:, i]) for i in range(3)])
    n = np.linalg.norm(a)
    if n <= 0.0:
        raise ValueError("interpolated axis degenerated to zero")
    return p, a / n


def render_sequence(trajectory: list[TrajectorySample], scene: SceneSpec,
                    frame_rate: float = 10.0, exposure: float = 0.05,
                    noise: NoiseModel | None = None, n_sub: int = 16):
    """Render a motion sequence along ``trajectory``.

    Frames start at the first trajectory timestamp and are spaced
    ``1/frame_rate``; each one integrates ``n_sub`` sub-exposures across
    ``exposure`` seconds as a union of footprints. Ground truth refers to
    the exposure midpoint. Returns a list of ``(image, ground_truth)``.
    """
    if not trajectory:
        raise ValueError("trajectory is empty")
    times = [s.t for s in trajectory]
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ValueError("trajectory timestamps must be strictly increasing")
    if frame_rate <= 0.0:
        raise ValueError("frame_rate must be positive")
    if not 0.0 < exposure <= 1.0 / frame_rate:
        raise ValueError("exposure must be in (0, 1/frame_rate]")
    if n_sub < 1:
        raise ValueError("n_sub must be >= 1")

    background = _background(scene)
    frames = []
    k = 0
    while times[0] + k / frame_rate + exposure <= times[-1] + 1e-9:
        t0 = times[0] + k / frame_rate
        if n_sub == 1:
            sub_times = [t0 + exposure / 2.0]
        else:
            sub_times = [t0 + exposure * j / (n_sub - 1) for j in range(n_sub)]
        poses = [_interp_pose(trajectory, ts) for ts in sub_times]
        results = [_footprint(scene, p, a) for p, a in poses]
        boxes = [_footprint_bbox(scene, r, pad=8) for r in results]
        u0 = min(b[0] for b in boxes)
        u1 = max(b[1] for b in boxes)
        v0 = min(b[2] for b in boxes)
        v1 = max(b[3] for b in boxes)
        bbox = (u0, u1, v0, v1)
        cov = np.zeros((v1 - v0, u1 - u0))
        for p, a in poses:
            np.maximum(cov, _coverage(scene, p, a, bbox), out=cov)
        img = background.copy()
        patch = img[v0:v1, u0:u1]
        img[v0:v1, u0:u1] = patch * (1.0 - cov) + float(scene.peak) * cov

        t_mid = t0 + exposure / 2.0
        p_mid, a_mid = _interp_pose(trajectory, t_mid)
        gt = _ground_truth(scene, _footprint(scene, p_mid, a_mid), k, t_mid)
        frames.append((_apply_noise(img, noise, k), gt))
        k += 1
    if not frames:
        raise ValueError("trajectory too short for a single exposure")
    return frames


def make_retina_texture(height: int, width: int, seed: int = 0,
                        low: int = 60, high: int = 110) -> np.ndarray:
    """Smooth blotchy background texture in [low, high], deterministic by seed."""
    rng = np.random.default_rng(seed)
    base = rng.random((height, width))
    blurred = cv2.GaussianBlur(base, (0, 0), sigmaX=12.0)
    lo, hi = blurred.min(), blurred.max()
    span = hi - lo if hi > lo else 1.0
    return (low + (blurred - lo) / span * (high - low)).astype(np.uint8)


def write_ground_truth_csv(path, rows: list[GroundTruth]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(GROUND_TRUTH_FIELDS)
        for gt in rows:
            writer.writerow([gt.frame] + [repr(float(v)) for v in
                                          (gt.t_s, gt.d_true_mm, gt.e1_true_px,
                                           gt.cx_px, gt.cy_px)])


def read_ground_truth_csv(path) -> list[GroundTruth]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != list(GROUND_TRUTH_FIELDS):
            raise ValueError(f"{path}: unexpected ground-truth header {reader.fieldnames}")
        for rec in reader:
            rows.append(GroundTruth(frame=int(rec["frame"]), t_s=float(rec["t_s"]),
                                    d_true_mm=float(rec["d_true_mm"]),
                                    e1_true_px=float(rec["e1_true_px"]),
                                    cx_px=float(rec["cx_px"]), cy_px=float(rec["cy_px"])))
    return rows


# ---------------------------------------------------------------------------
# standard synthetic rig used by the experiments and tests

RIG_DELTA = 0.02          # mm per px
RIG_K = 13.21             # cone slope; delta*k/2 = 0.1321 mm per full-axis px
RIG_B = -5.117            # virtual-apex offset, mm
RIG_SURFACE_Z = 20.0      # depth of the surface point under the beam, mm
RIG_SPHERE_R = 11.25      # default eyeball radius, mm


def rig_camera() -> Camera:
    return Camera(scale=PixelScale(RIG_DELTA))


def rig_cone() -> ConeModel:
    return ConeModel.from_slope(k=RIG_K, b=RIG_B)


def make_plane_scene(d: float, tilt: float = 0.0, lateral=(0.0, 0.0),
                     background: int | np.ndarray = 80) -> SceneSpec:
    """Plane at axial distance ``d`` below the tip, optionally tilted (radians)."""
    normal = np.array([math.sin(tilt), 0.0, -math.cos(tilt)])
    x0, y0 = lateral
    plane = Plane(point=[x0, y0, RIG_SURFACE_Z], normal=normal)
    tip = np.array([x0, y0, RIG_SURFACE_Z - d])
    return SceneSpec(surface=plane, cone=rig_cone(), tip=tip, axis=[0.0, 0.0, 1.0],
                     camera=rig_camera(), background=background)


def make_sphere_scene(d: float, c: float = 0.0, r: float = RIG_SPHERE_R,
                      background: int | np.ndarray = 80) -> SceneSpec:
    """Inside-sphere scene: tip at lateral offset ``c``, beam straight down.

    The sphere center sits on the optical axis with its far pole at the rig
    depth, so the surface under the beam is at ``center_z + sqrt(r^2 - c^2)``.
    """
    if not 0.0 <= c < r:
        raise ValueError(f"need 0 <= c < r, got c={c}, r={r}")
    center_z = RIG_SURFACE_Z - r
    surf_z = center_z + math.sqrt(r * r - c * c)
    sphere = Sphere(center=[0.0, 0.0, center_z], radius=r)
    tip = np.array([c, 0.0, surf_z - d])
    return SceneSpec(surface=sphere, cone=rig_cone(), tip=tip, axis=[0.0, 0.0, 1.0],
                     camera=rig_camera(), background=background)


def scene_at(scene: SceneSpec, tip, axis=None) -> SceneSpec:
    """Copy of ``scene`` with a new tip pose."""
    return replace(scene, tip=np.asarray(tip, dtype=float),
                   axis=scene.axis if axis is None else np.asarray(axis, dtype=float))


def make_speed_staircase(n_segments: int = 12, bin_width: float = 0.25,
                         segment_time: float = 1.2, d0: float = 2.5,
                         lateral0=(0.0, 0.0), axial_fraction: float = 0.866):
    """Piecewise-linear trajectory stepping through the speed bins.

    Segment ``j`` moves at the center of speed bin ``j`` (``(j+0.5)*bin_width``)
    along a fixed line with axial direction cosine ``axial_fraction``,
    reversing direction every segment so the tip oscillates around its start
    instead of drifting. The default covers 0 to 3 mm/s in 0.25 mm/s bins
    with the tip staying roughly 1 to 4 mm from the rig surface.
    """
    if n_segments < 1:
        raise ValueError("n_segments must be >= 1")
    if bin_width <= 0.0 or segment_time <= 0.0:
        raise ValueError("bin_width and segment_time must be positive")
    if not 0.0 < axial_fraction < 1.0:
        raise ValueError("axial_fraction must be in (0, 1)")
    lateral = math.sqrt(1.0 - axial_fraction**2)
    axis = np.array([0.0, 0.0, 1.0])
    pos = np.array([lateral0[0], lateral0[1], RIG_SURFACE_Z - d0])
    samples = [TrajectorySample(t=0.0, position=pos.copy(), axis=axis)]
    for j in range(n_segments):
        speed = (j + 0.5) * bin_width
        sign = 1.0 if j % 2 == 0 else -1.0
        step = sign * speed * segment_time * np.array([lateral, 0.0, axial_fraction])
        pos = pos + step
        samples.append(TrajectorySample(t=(j + 1) * segment_time,
                                        position=pos.copy(), axis=axis))
    return samples
