"""Calibration tests: OLS against a textbook-sums oracle, sphere-offset
recovery on model-generated samples, and report/CSV round trips."""

import math

import numpy as np
import pytest

import oracles
from spotdepth.calibrate import (CalibrationFit, DistanceSample,
                                 GoodnessMetrics, fit_plane_model,
                                 fit_sphere_offset, format_fit_report,
                                 goodness_metrics, read_samples_csv,
                                 write_residuals_csv, write_samples_csv)
from spotdepth.geometry import (ConeModel, PixelScale, SphereViewGeometry,
                                distance_from_image_sphere)

RIG_SCALE = PixelScale(0.02)


def make_samples(x, d):
    return [DistanceSample(e1_px=a, d_r_mm=b) for a, b in zip(x, d)]


class TestPlaneFit:
    def test_exact_line_recovered(self):
        x = np.linspace(30.0, 80.0, 25)
        d = 0.1321 * x - 5.117
        fit = fit_plane_model(make_samples(x, d))
        assert fit.slope == pytest.approx(0.1321, abs=1e-12)
        assert fit.intercept == pytest.approx(-5.117, abs=1e-10)
        assert fit.metrics.r2 == pytest.approx(1.0, abs=1e-12)
        assert fit.metrics.rmse == pytest.approx(0.0, abs=1e-10)

    def test_matches_normal_equation_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            n = int(rng.integers(3, 60))
            x = rng.uniform(20.0, 90.0, n)
            d = rng.uniform(0.1, 0.2) * x + rng.normal(0.0, 0.3, n)
            fit = fit_plane_model(make_samples(x, d))
            slope, intercept = oracles.ols_line(list(x), list(d))
            assert fit.slope == pytest.approx(slope, abs=1e-12)
            assert fit.intercept == pytest.approx(intercept, abs=1e-12)

    def test_ddof_scales_rmse(self):
        rng = np.random.default_rng(1)
        x = rng.uniform(30.0, 70.0, 40)
        d = 0.13 * x - 5.0 + rng.normal(0.0, 0.1, 40)
        plain = fit_plane_model(make_samples(x, d))
        unbiased = fit_plane_model(make_samples(x, d), ddof=2)
        assert unbiased.metrics.rmse == pytest.approx(
            plain.metrics.rmse * math.sqrt(40 / 38), rel=1e-12)
        assert unbiased.slope == plain.slope

    def test_cone_conversion_halves_pixels(self):
        fit = fit_plane_model(make_samples([30.0, 50.0, 70.0],
                                           [0.1321 * v - 5.117 for v in (30, 50, 70)]))
        cone = fit.cone(RIG_SCALE)
        assert cone.k == pytest.approx(2.0 * 0.1321 / 0.02, rel=1e-12)
        assert cone.b == pytest.approx(-5.117, abs=1e-10)

    def test_degenerate_inputs_rejected(self):
        with pytest.raises(ValueError, match="at least 2"):
            fit_plane_model(make_samples([40.0], [1.0]))
        with pytest.raises(ValueError, match="zero spread"):
            fit_plane_model(make_samples([40.0, 40.0], [1.0, 2.0]))
        samples = make_samples([30.0, 40.0, 50.0], [1.0, 2.0, 3.0])
        with pytest.raises(ValueError, match="ddof"):
            fit_plane_model(samples, ddof=3)
        with pytest.raises(ValueError, match="e1_px"):
            DistanceSample(e1_px=-1.0, d_r_mm=2.0)


class TestGoodnessMetrics:
    def test_hand_computed_example(self):
        m = goodness_metrics([1.0, 2.0, 4.0], [1.0, 2.0, 3.0])
        assert m.r2 == pytest.approx(0.5, abs=1e-15)
        assert m.rmse == pytest.approx(math.sqrt(1.0 / 3.0), abs=1e-15)
        assert m.mean_abs == pytest.approx(1.0 / 3.0, abs=1e-15)
        assert m.max_abs == 1.0
        assert m.std == pytest.approx(math.sqrt(2.0 / 9.0), abs=1e-15)
        assert m.n == 3

    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            n = int(rng.integers(2, 50))
            ref = rng.normal(2.0, 1.0, n)
            pred = ref + rng.normal(0.0, 0.2, n)
            m = goodness_metrics(pred, ref)
            r2, rmse, mean_abs, max_abs, std = oracles.error_stats(list(pred), list(ref))
            assert m.r2 == pytest.approx(r2, abs=1e-12)
            assert m.rmse == pytest.approx(rmse, abs=1e-12)
            assert m.mean_abs == pytest.approx(mean_abs, abs=1e-12)
            assert m.max_abs == pytest.approx(max_abs, abs=1e-12)
            assert m.std == pytest.approx(std, abs=1e-12)

    def test_zero_variance_reference_gives_nan_r2(self):
        m = goodness_metrics([1.0, 1.1], [1.0, 1.0])
        assert math.isnan(m.r2)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            goodness_metrics([1.0], [1.0, 2.0])


def model_sphere_samples(cone, r, c, e1_values):
    """Samples that the view-tilt + sagitta model maps back exactly to ``c``."""
    tilt_cos = math.cos(math.atan(c / math.sqrt(r * r - c * c)))
    samples = []
    for e1 in e1_values:
        d = cone.k * e1 + cone.b + (r - math.sqrt(r * r - e1 * e1))
        e1_px = 2.0 * e1 / (RIG_SCALE.delta * tilt_cos)
        samples.append(DistanceSample(e1_px=e1_px, d_r_mm=d))
    return samples


def plane_fit_for(cone) -> CalibrationFit:
    dummy = GoodnessMetrics(r2=1.0, rmse=0.0, mean_abs=0.0, max_abs=0.0,
                            std=0.0, n=0)
    return CalibrationFit(slope=cone.k * RIG_SCALE.delta / 2.0,
                          intercept=cone.b, metrics=dummy)


class TestSphereOffset:
    CONE = ConeModel.from_slope(k=13.21, b=-5.117)

    def test_recovers_generating_offset(self):
        for c_true in (0.0, 2.5, 4.584, 6.982):
            samples = model_sphere_samples(self.CONE, 11.25, c_true,
                                           np.linspace(0.2, 0.9, 30))
            fit = fit_sphere_offset(samples, plane_fit_for(self.CONE),
                                    RIG_SCALE, r=11.25)
            assert fit.c == pytest.approx(c_true, abs=1e-3)
            # search tol 1e-4 in c leaves a residual that grows with c
            assert fit.metrics.rmse < 1e-4

    def test_predictions_match_geometry_chain(self):
        c = 5.531
        samples = model_sphere_samples(self.CONE, 11.25, c, [0.3, 0.6])
        fit = fit_sphere_offset(samples, plane_fit_for(self.CONE),
                                RIG_SCALE, r=11.25)
        geom = SphereViewGeometry(r=11.25, c=fit.c, v=22.5)
        for s in samples:
            d_hat = distance_from_image_sphere(self.CONE, RIG_SCALE, geom,
                                               s.e1_px / 2.0)
            assert d_hat == pytest.approx(s.d_r_mm, abs=1e-4)

    def test_validation(self):
        samples = model_sphere_samples(self.CONE, 11.25, 3.0, [0.3, 0.6])
        with pytest.raises(ValueError, match="c_max_frac"):
            fit_sphere_offset(samples, plane_fit_for(self.CONE), RIG_SCALE,
                              r=11.25, c_max_frac=1.5)
        with pytest.raises(ValueError, match="samples"):
            fit_sphere_offset([], plane_fit_for(self.CONE), RIG_SCALE, r=11.25)


class TestCsvAndReport:
    def test_samples_roundtrip(self, tmp_path):
        samples = make_samples([30.5, 44.25], [1.0 / 3.0, 2.044532584492515])
        path = tmp_path / "samples.csv"
        write_samples_csv(path, samples)
        assert read_samples_csv(path) == samples

    def test_samples_header_enforced(self, tmp_path):
        path = tmp_path / "samples.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(ValueError, match="header"):
            read_samples_csv(path)

    def test_residuals_file_layout(self, tmp_path):
        samples = make_samples([30.0, 40.0], [1.0, 2.0])
        path = tmp_path / "residuals.csv"
        write_residuals_csv(path, samples, [1.1, 1.9])
        lines = path.read_text().splitlines()
        assert lines[0] == "e1_px,d_r_mm,d_hat_mm,residual_mm"
        assert len(lines) == 3
        assert float(lines[1].split(",")[3]) == pytest.approx(0.1)

    def test_report_contains_fit_and_header(self):
        fit = fit_plane_model(make_samples([30.0, 50.0, 70.0], [1.0, 3.0, 5.0]))
        text = format_fit_report(fit, header={"config_seed": "7"})
        assert text.startswith("config_seed=7\n")
        assert "slope_mm_per_px=" in text
        assert "fit_rmse=" in text
        assert text.endswith("\n")

    def test_report_sphere_section(self):
        samples = model_sphere_samples(TestSphereOffset.CONE, 11.25, 3.0,
                                       [0.3, 0.5, 0.7])
        plane = plane_fit_for(TestSphereOffset.CONE)
        sphere = fit_sphere_offset(samples, plane, RIG_SCALE, r=11.25)
        text = format_fit_report(plane, sphere=sphere)
        assert "sphere_c_mm=" in text
        assert "sphere_rmse=" in text
