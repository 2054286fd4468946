"""Distance-from-spot-size estimation for intraocular instruments.

A light cone projected from an instrument tip paints an elliptical spot on
the surface below; the spot's minor axis grows linearly with tip-to-surface
distance. This package provides the geometric model, a synthetic renderer
with a ray-cast oracle for validation, the spot tracker, calibration and
distance estimation, and a speed/error analysis for motion-blurred
sequences, plus a CLI that chains them into reproducible experiments.
"""

from .calibrate import (CalibrationFit, DistanceSample, GoodnessMetrics,
                        SphereFit, fit_plane_model, fit_sphere_offset,
                        goodness_metrics)
from .conic import fit_ellipse_geometry
from .detect import (EllipseObservation, TrackerConfig, detect_spot,
                     seed_from_brightest, track_pattern)
from .estimate import (EstimationRecord, PlaneSurface, SpeedErrorAnalysis,
                       SphereSurface, build_records, estimate_distance,
                       speed_error_analysis, tip_speed)
from .geometry import (ConeModel, PixelScale, SphereViewGeometry,
                       cone_from_angle, distance_from_image_plane,
                       distance_from_image_sphere, distance_on_plane,
                       distance_on_sphere, metric_minor_axis_from_image,
                       min_angle_sde, sphere_sagitta)
from .raycast import Plane, RaycastResult, Sphere, raycast_oracle
from .synth import (Camera, GroundTruth, NoiseModel, SceneSpec,
                    TrajectorySample, make_plane_scene, make_speed_staircase,
                    make_sphere_scene, render_frame, render_sequence)

__version__ = "0.1.0"

__all__ = [
    "CalibrationFit", "DistanceSample", "GoodnessMetrics", "SphereFit",
    "fit_plane_model", "fit_sphere_offset", "goodness_metrics",
    "fit_ellipse_geometry",
    "EllipseObservation", "TrackerConfig", "detect_spot",
    "seed_from_brightest", "track_pattern",
    "EstimationRecord", "PlaneSurface", "SpeedErrorAnalysis", "SphereSurface",
    "build_records", "estimate_distance", "speed_error_analysis", "tip_speed",
    "ConeModel", "PixelScale", "SphereViewGeometry", "cone_from_angle",
    "distance_from_image_plane", "distance_from_image_sphere",
    "distance_on_plane", "distance_on_sphere", "metric_minor_axis_from_image",
    "min_angle_sde", "sphere_sagitta",
    "Plane", "RaycastResult", "Sphere", "raycast_oracle",
    "Camera", "GroundTruth", "NoiseModel", "SceneSpec", "TrajectorySample",
    "make_plane_scene", "make_speed_staircase", "make_sphere_scene",
    "render_frame", "render_sequence",
]
