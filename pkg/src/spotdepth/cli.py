"""Command-line experiment harness.

Subcommands chain the library stages into reproducible experiments driven
by a flat key=value config file plus flag overrides:

    render        write a distance-sweep frame stack and its ground truth
    track         run the tracker over a frame stack, write observations
    calibrate     fit the distance model to tracked + reference data
    static-eval   render/track/fit a sweep in memory, report fit quality
    dynamic-eval  render a blurred motion sequence, report error vs speed

Every experiment is fully determined by (config, seed); reports embed the
resolved config so a rerun reproduces output files byte for byte.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from . import calibrate as cal
from . import detect, estimate, synth
from .geometry import PixelScale
from .imgio import read_image, write_image

DEFAULTS = {
    "surface": "plane",      # plane | sphere
    "r": "11.25",            # sphere radius, mm
    "c": "0.0",              # lateral spot offset on the sphere, mm
    "tilt_deg": "0.0",       # plane tilt, degrees
    "background": "80",      # flat background level
    "texture": "0",          # 1 = blotchy seeded background texture
    "noise_sigma": "0.0",    # gaussian intensity noise
    "salt_pepper": "0.0",    # salt-and-pepper pixel fraction
    "d_start": "0.0",        # sweep start distance, mm
    "d_stop": "5.0",
    "d_step": "0.05",
    "patch_half": "50",      # tracker patch half-size, px
    "threshold": "200",
    "min_area": "20",
    "seed_x": "",            # tracker seed point; empty = brightest region
    "seed_y": "",
    "frame_rate": "10.0",    # dynamic sequence, Hz
    "exposure": "0.1",       # s
    "n_sub": "16",           # sub-exposures per frame
    "n_segments": "12",      # speed-staircase segments
    "bin_width": "0.25",     # speed bin width, mm/s
    "segment_time": "1.2",   # s per staircase segment
    "d0": "2.5",             # staircase start distance, mm
    "accuracy_limit": "0.5", # |error| limit defining the speed threshold, mm
}

MAX_LOSS_FRACTION = 0.10


class ConfigError(ValueError):
    pass


def parse_config_file(path) -> dict:
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, value = line.split("=", 1)
            key = key.strip()
            if key != "seed" and key not in DEFAULTS:
                raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
            out[key] = value.strip()
    return out


def resolve_config(args) -> dict:
    """Defaults, then config file, then CLI flags; returns flat str->str."""
    config = dict(DEFAULTS)
    config["seed"] = ""
    if args.config:
        config.update(parse_config_file(args.config))
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        if key != "seed" and key not in DEFAULTS:
            raise ConfigError(f"--set: unknown config key {key!r}")
        config[key] = value
    if args.surface:
        config["surface"] = args.surface
    if args.seed is not None:
        config["seed"] = str(args.seed)
    if config["surface"] not in ("plane", "sphere"):
        raise ConfigError(f"surface must be plane or sphere, got {config['surface']!r}")
    return config


def _f(config, key) -> float:
    try:
        return float(config[key])
    except ValueError as exc:
        raise ConfigError(f"config {key}={config[key]!r} is not a number") from exc


def _i(config, key) -> int:
    try:
        return int(config[key])
    except ValueError as exc:
        raise ConfigError(f"config {key}={config[key]!r} is not an integer") from exc


def _seed(config) -> int | None:
    return int(config["seed"]) if config["seed"] != "" else None


def _noise_model(config) -> synth.NoiseModel | None:
    sigma = _f(config, "noise_sigma")
    saltpep = _f(config, "salt_pepper")
    if sigma == 0.0 and saltpep == 0.0:
        return None
    seed = _seed(config)
    if seed is None:
        raise ConfigError("noise requested but no seed given; set --seed")
    return synth.NoiseModel(gaussian_sigma=sigma, salt_pepper_fraction=saltpep,
                            seed=seed)


def _background(config):
    if _i(config, "texture"):
        cam = synth.rig_camera()
        return synth.make_retina_texture(cam.height, cam.width,
                                         seed=_seed(config) or 0)
    return _i(config, "background")


def _scene(config, d: float, surface: str | None = None) -> synth.SceneSpec:
    surface = surface or config["surface"]
    background = _background(config)
    if surface == "plane":
        return synth.make_plane_scene(d, tilt=math.radians(_f(config, "tilt_deg")),
                                      background=background)
    return synth.make_sphere_scene(d, c=_f(config, "c"), r=_f(config, "r"),
                                   background=background)


def _sweep_distances(config) -> np.ndarray:
    d0, d1, step = _f(config, "d_start"), _f(config, "d_stop"), _f(config, "d_step")
    if step <= 0.0 or d1 < d0:
        raise ConfigError("need d_step > 0 and d_stop >= d_start")
    n = int(round((d1 - d0) / step)) + 1
    return d0 + step * np.arange(n)


def _tracker_config(config) -> detect.TrackerConfig:
    return detect.TrackerConfig(patch_half=_i(config, "patch_half"),
                                threshold=_i(config, "threshold"),
                                min_area=_i(config, "min_area"))


def _tracker_seed(config):
    sx, sy = config["seed_x"], config["seed_y"]
    if (sx == "") != (sy == ""):
        raise ConfigError("set both seed_x and seed_y, or neither")
    if sx == "":
        return None
    return float(sx), float(sy)


def _render_sweep(config, surface: str | None = None):
    """Render the static distance sweep; yields (image, ground_truth)."""
    noise = _noise_model(config)
    for frame, d in enumerate(_sweep_distances(config)):
        scene = _scene(config, float(d), surface)
        yield synth.render_frame(scene, noise=noise, frame=frame, t=float(frame))


def _loss_fraction(observations) -> float:
    lost = sum(1 for o in observations if not o.ok)
    return lost / len(observations) if observations else 0.0


def _check_loss(observations, allow_loss: bool) -> int:
    frac = _loss_fraction(observations)
    if frac > MAX_LOSS_FRACTION and not allow_loss:
        print(f"error: tracking lost {frac:.1%} of frames "
              f"(limit {MAX_LOSS_FRACTION:.0%}); pass --allow-loss to continue",
              file=sys.stderr)
        return 2
    return 0


def _config_header(config) -> dict:
    return {f"config_{k}": config[k] for k in sorted(config)}


def _write_text(path, text: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _samples_from(observations, truths) -> list[cal.DistanceSample]:
    samples = []
    for obs, gt in zip(observations, truths):
        if obs.ok:
            samples.append(cal.DistanceSample(e1_px=obs.a_min_px, d_r_mm=gt.d_true_mm))
    return samples


# ---------------------------------------------------------------------------
# subcommands

def cmd_render(args) -> int:
    config = resolve_config(args)
    frames_dir = os.path.join(args.out_dir, "frames")
    os.makedirs(frames_dir, exist_ok=True)
    truths = []
    for frame, (img, gt) in enumerate(_render_sweep(config)):
        write_image(os.path.join(frames_dir, f"frame_{frame:04d}.pgm"), img)
        truths.append(gt)
    synth.write_ground_truth_csv(os.path.join(args.out_dir, "ground_truth.csv"), truths)
    _write_text(os.path.join(args.out_dir, "config_used.txt"),
                "".join(f"{k}={config[k]}\n" for k in sorted(config)))
    print(f"rendered {len(truths)} frames to {frames_dir}")
    return 0


def cmd_track(args) -> int:
    config = resolve_config(args)
    frames_dir = os.path.join(args.out_dir, "frames")
    if not os.path.isdir(frames_dir):
        print(f"error: no frames directory at {frames_dir}; run render first",
              file=sys.stderr)
        return 1
    names = sorted(n for n in os.listdir(frames_dir)
                   if n.startswith("frame_") and n.endswith((".pgm", ".png")))
    if not names:
        print(f"error: no frame_*.pgm images in {frames_dir}", file=sys.stderr)
        return 1
    images = (read_image(os.path.join(frames_dir, n)) for n in names)
    observations = detect.track_pattern(images, seed=_tracker_seed(config),
                                        config=_tracker_config(config))
    detect.write_observations_csv(os.path.join(args.out_dir, "observations.csv"),
                                  observations)
    print(f"tracked {len(observations)} frames, "
          f"lost {_loss_fraction(observations):.1%}")
    return _check_loss(observations, args.allow_loss)


def cmd_calibrate(args) -> int:
    config = resolve_config(args)
    obs_path = os.path.join(args.out_dir, "observations.csv")
    gt_path = os.path.join(args.out_dir, "ground_truth.csv")
    for path in (obs_path, gt_path):
        if not os.path.isfile(path):
            print(f"error: missing {path}; run render and track first", file=sys.stderr)
            return 1
    observations = detect.read_observations_csv(obs_path)
    truths = synth.read_ground_truth_csv(gt_path)
    if len(observations) != len(truths):
        print("error: observations and ground truth disagree on frame count",
              file=sys.stderr)
        return 1
    samples = _samples_from(observations, truths)
    if len(samples) < 2:
        print("error: fewer than 2 usable frames to calibrate on", file=sys.stderr)
        return 1
    fit = cal.fit_plane_model(samples)
    sphere_fit = None
    if config["surface"] == "sphere":
        sphere_fit = cal.fit_sphere_offset(samples, fit,
                                           PixelScale(synth.RIG_DELTA),
                                           r=_f(config, "r"))
    cal.write_samples_csv(os.path.join(args.out_dir, "samples.csv"), samples)
    cal.write_residuals_csv(os.path.join(args.out_dir, "residuals.csv"), samples,
                            fit.predict([s.e1_px for s in samples]))
    report = cal.format_fit_report(fit, sphere=sphere_fit,
                                   header=_config_header(config))
    _write_text(os.path.join(args.out_dir, "fit_report.txt"), report)
    print(report, end="")
    return 0


def run_static_experiment(config, out_dir, allow_loss: bool = False):
    """Render/track/fit the static sweep; returns (summary dict, exit code).

    On a plane the sweep itself is the calibration data and the report is
    the fitted line plus its goodness. On a sphere a plane sweep with the
    same settings calibrates the cone first, then the sphere sweep recovers
    the lateral offset and the report adds the sphere-model goodness.
    """
    os.makedirs(out_dir, exist_ok=True)
    tracker = _tracker_config(config)
    seed_pt = _tracker_seed(config)

    pairs = list(_render_sweep(config, surface="plane"))
    observations = detect.track_pattern((img for img, _ in pairs), seed=seed_pt,
                                        config=tracker)
    plane_samples = _samples_from(observations, [gt for _, gt in pairs])
    if len(plane_samples) < 2:
        raise ConfigError("fewer than 2 usable calibration frames")
    fit = cal.fit_plane_model(plane_samples)
    summary = {"slope": fit.slope, "intercept": fit.intercept,
               "r2": fit.metrics.r2, "rmse": fit.metrics.rmse,
               "loss_fraction": _loss_fraction(observations)}
    sphere_fit = None

    if config["surface"] == "sphere":
        pairs = list(_render_sweep(config, surface="sphere"))
        observations = detect.track_pattern((img for img, _ in pairs), seed=seed_pt,
                                            config=tracker)
        samples = _samples_from(observations, [gt for _, gt in pairs])
        if len(samples) < 2:
            raise ConfigError("fewer than 2 usable sphere frames")
        sphere_fit = cal.fit_sphere_offset(samples, fit, PixelScale(synth.RIG_DELTA),
                                           r=_f(config, "r"))
        surface = estimate.SphereSurface(r=_f(config, "r"), c=sphere_fit.c)
        predictions = [estimate.estimate_distance(s.e1_px, fit,
                                                  PixelScale(synth.RIG_DELTA), surface)
                       for s in samples]
        summary.update({"c_hat": sphere_fit.c,
                        "mean_abs": sphere_fit.metrics.mean_abs,
                        "max_abs": sphere_fit.metrics.max_abs,
                        "loss_fraction": _loss_fraction(observations)})
    else:
        samples = plane_samples
        predictions = fit.predict([s.e1_px for s in samples])

    cal.write_samples_csv(os.path.join(out_dir, "samples.csv"), samples)
    cal.write_residuals_csv(os.path.join(out_dir, "residuals.csv"), samples,
                            predictions)
    report = cal.format_fit_report(fit, sphere=sphere_fit,
                                   header=_config_header(config))
    _write_text(os.path.join(out_dir, "fit_report.txt"), report)
    code = _check_loss(observations, allow_loss)
    return summary, code


def run_dynamic_experiment(config, out_dir, allow_loss: bool = False,
                           trajectory=None):
    """Blurred motion sequence end to end; returns (summary dict, exit code).

    Calibrates on a noiseless static plane sweep, renders the staircase (or
    supplied) trajectory with motion blur, tracks it, and bins |error| by
    tip speed.
    """
    os.makedirs(out_dir, exist_ok=True)
    tracker = _tracker_config(config)

    # calibration pass: same rig, no noise, no motion
    calib_config = dict(config, noise_sigma="0.0", salt_pepper="0.0")
    pairs = list(_render_sweep(calib_config, surface="plane"))
    calib_obs = detect.track_pattern((img for img, _ in pairs), config=tracker)
    fit = cal.fit_plane_model(_samples_from(calib_obs, [gt for _, gt in pairs]))

    if trajectory is None:
        trajectory = synth.make_speed_staircase(
            n_segments=_i(config, "n_segments"), bin_width=_f(config, "bin_width"),
            segment_time=_f(config, "segment_time"), d0=_f(config, "d0"))
    estimate.write_trajectory_csv(os.path.join(out_dir, "trajectory.csv"), trajectory)

    scene = _scene(config, _f(config, "d0"))
    frames = synth.render_sequence(trajectory, scene,
                                   frame_rate=_f(config, "frame_rate"),
                                   exposure=_f(config, "exposure"),
                                   noise=_noise_model(config),
                                   n_sub=_i(config, "n_sub"))
    observations = detect.track_pattern((img for img, _ in frames),
                                        seed=_tracker_seed(config), config=tracker)
    truths = [gt for _, gt in frames]

    times = np.array([gt.t_s for gt in truths])
    traj_t = np.array([s.t for s in trajectory])
    traj_p = np.array([s.position for s in trajectory])
    positions = np.column_stack([np.interp(times, traj_t, traj_p[:, i])
                                 for i in range(3)])
    speeds = estimate.tip_speed(times, positions)

    if config["surface"] == "sphere":
        surface = estimate.SphereSurface(r=_f(config, "r"), c=_f(config, "c"))
    else:
        surface = estimate.PlaneSurface()
    records = estimate.build_records(observations, truths, fit,
                                     PixelScale(synth.RIG_DELTA), surface,
                                     speeds=speeds)
    estimate.write_records_csv(os.path.join(out_dir, "records.csv"), records)

    analysis = estimate.speed_error_analysis(
        speeds, np.array([r.error_mm for r in records]),
        bin_width=_f(config, "bin_width"),
        accuracy_limit_mm=_f(config, "accuracy_limit"))
    report = estimate.format_speed_report(analysis, header=_config_header(config))
    _write_text(os.path.join(out_dir, "speed_report.txt"), report)

    summary = {"frames": len(records),
               "loss_fraction": _loss_fraction(observations),
               "spearman_rho": analysis.spearman_rho,
               "spearman_defined": analysis.spearman_defined,
               "threshold_speed": analysis.threshold_speed,
               "bin_mean_abs": analysis.bin_mean_abs,
               "bin_counts": analysis.bin_counts}
    return summary, _check_loss(observations, allow_loss)


def cmd_static_eval(args) -> int:
    config = resolve_config(args)
    summary, code = run_static_experiment(config, args.out_dir,
                                          allow_loss=args.allow_loss)
    for key, value in summary.items():
        print(f"{key}={value}")
    return code


def cmd_dynamic_eval(args) -> int:
    config = resolve_config(args)
    trajectory = None
    if args.trajectory:
        trajectory = estimate.read_trajectory_csv(args.trajectory)
    summary, code = run_dynamic_experiment(config, args.out_dir,
                                           allow_loss=args.allow_loss,
                                           trajectory=trajectory)
    for key in ("frames", "loss_fraction", "spearman_rho", "threshold_speed"):
        print(f"{key}={summary[key]}")
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spotdepth",
        description="Synthetic experiments for spot-size distance estimation.")
    sub = parser.add_subparsers(dest="command", required=True)
    specs = (("render", cmd_render, "render a distance sweep to PGM frames"),
             ("track", cmd_track, "track the spot over rendered frames"),
             ("calibrate", cmd_calibrate, "fit the model to tracked data"),
             ("static-eval", cmd_static_eval, "end-to-end static evaluation"),
             ("dynamic-eval", cmd_dynamic_eval, "end-to-end blurred-motion evaluation"))
    for name, func, help_text in specs:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="key=value config file")
        p.add_argument("--seed", type=int, default=None, help="rng seed")
        p.add_argument("--out-dir", default="out", help="artifact directory")
        p.add_argument("--surface", choices=("plane", "sphere"), default=None)
        p.add_argument("--allow-loss", action="store_true",
                       help="tolerate >10%% tracking loss")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a single config key")
        if name == "dynamic-eval":
            p.add_argument("--trajectory", help="trajectory CSV instead of the "
                                                "built-in speed staircase")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
