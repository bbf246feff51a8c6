import numpy as np
import pytest

from drillscan import (
    CalibrationBlock,
    DrillSpec,
    OcclusionModel,
    PointLabel,
    ScanMeta,
    inject_outliers,
    scan_calibration_block,
    scan_drill,
)
from drillscan.errors import ConfigurationError, SimulationError
from drillscan.simulator import Region, band_profile
from drillscan.scan import scan_to_measurement_cloud

from conftest import standard_meta


class TestDrillSpec:
    def test_band_widths_must_fit_period(self):
        with pytest.raises(ConfigurationError):
            DrillSpec(back_width_deg=120.0, lip_width_deg=90.0, flute_count=2)

    def test_true_coaxiality_is_twice_apex_offset(self):
        spec = DrillSpec(bend_amplitude=0.2)
        assert spec.true_coaxiality == pytest.approx(0.4)

    def test_axis_offset_zero_on_shank_and_peak_at_apex(self):
        spec = DrillSpec(bend_amplitude=0.3)
        assert spec.axis_offset(np.array([0.0, spec.shank_length])) == pytest.approx([0.0, 0.0])
        assert spec.axis_offset(spec.bend_apex_x) == pytest.approx(0.3)
        assert spec.axis_offset(spec.total_length) == pytest.approx(0.0, abs=1e-12)


class TestScanDrill:
    def test_straight_drill_surface_on_reference_circle(self, straight_cylinder_scan, small_meta):
        spec, scan, truth = straight_cylinder_scan
        nominal = truth.regions != Region.LIP
        back_depth = truth.pre_noise_depth[(truth.regions == Region.BACK)]
        assert np.allclose(back_depth, small_meta.axis_distance - spec.radius, atol=1e-9)

    def test_vertical_bend_projects_onto_opposite_pair(self):
        meta = standard_meta(frames=720, points=675)
        spec = DrillSpec(bend_amplitude=0.25, bend_phi_deg=0.0)
        from drillscan import analytic_sensor_depth
        x = np.array([spec.bend_apex_x])
        z0 = analytic_sensor_depth(spec, meta.axis_distance, x, np.array([0.0]))
        z180 = analytic_sensor_depth(spec, meta.axis_distance, x, np.array([np.pi]))
        z90 = analytic_sensor_depth(spec, meta.axis_distance, x, np.array([np.pi / 2]))
        z270 = analytic_sensor_depth(spec, meta.axis_distance, x, np.array([3 * np.pi / 2]))
        assert abs(z180[0] - z0[0]) == pytest.approx(0.5, abs=1e-6)
        assert abs(z270[0] - z90[0]) == pytest.approx(0.0, abs=1e-6)

    def test_oblique_bend_splits_between_pairs(self):
        meta = standard_meta(frames=720, points=675)
        spec = DrillSpec(bend_amplitude=0.25, bend_phi_deg=45.0)
        from drillscan import analytic_sensor_depth
        x = np.array([spec.bend_apex_x])
        pairs = []
        for a, b in ((0.0, np.pi), (np.pi / 2, 3 * np.pi / 2)):
            za = analytic_sensor_depth(spec, meta.axis_distance, x, np.array([a]))
            zb = analytic_sensor_depth(spec, meta.axis_distance, x, np.array([b]))
            pairs.append(abs(zb[0] - za[0]))
        assert pairs[0] == pytest.approx(pairs[1], abs=1e-6)
        assert np.hypot(*pairs) == pytest.approx(0.5, abs=1e-6)

    def test_deterministic_for_fixed_seed(self, small_meta):
        spec = DrillSpec(bend_amplitude=0.1)
        a, truth_a = scan_drill(spec, small_meta, noise_sigma=0.004, seed=99)
        b, truth_b = scan_drill(spec, small_meta, noise_sigma=0.004, seed=99)
        assert len(a) == len(b)
        for fa, fb in zip(a.frames, b.frames):
            assert np.array_equal(fa.x, fb.x)
            assert np.array_equal(fa.z, fb.z)
        assert np.array_equal(truth_a.labels, truth_b.labels)

    def test_labels_match_analytic_regions(self, small_bent_scan, small_meta):
        spec, scan, truth = small_bent_scan
        x = np.concatenate([f.x for f in scan.frames])
        beta = np.concatenate([
            np.full(len(f), 2 * np.pi * f.index / small_meta.frame_count) for f in scan.frames])
        s = small_meta.axis_distance - truth.pre_noise_depth
        py = s * np.sin(beta)
        pz = s * np.cos(beta)
        cy, cz = spec.axis_center(x)
        psi = np.arctan2(py - cy, pz - cz)
        _, _, region = band_profile(spec, psi, x)
        assert np.array_equal(region, truth.regions)

    def test_occlusion_monotone_in_incidence_limit(self, small_meta):
        spec = DrillSpec(bend_amplitude=0.1)
        loose, _ = scan_drill(spec, small_meta, occlusion=OcclusionModel(incidence_limit_deg=70.0))
        tight, _ = scan_drill(spec, small_meta, occlusion=OcclusionModel(incidence_limit_deg=40.0))
        for fl, ft in zip(loose.frames, tight.frames):
            assert np.isin(ft.x, fl.x).all()
        assert tight.total_points() <= loose.total_points()

    def test_fov_violation_names_frame(self, small_meta):
        spec = DrillSpec()
        with pytest.raises(SimulationError, match="frame 0"):
            scan_drill(spec, small_meta, occlusion=OcclusionModel(fov_range=(0.0, 50.0)))

    def test_axis_distance_must_clear_drill(self):
        meta = ScanMeta(frame_count=360, points_per_frame=100, axis_distance=5.0, gamma=5.0)
        with pytest.raises(ConfigurationError):
            scan_drill(DrillSpec(), meta)

    def test_three_flutes_give_three_bands_per_revolution(self):
        meta = standard_meta(frames=720, points=200)
        spec = DrillSpec(flute_count=3, back_width_deg=50.0, lip_width_deg=25.0)
        scan, truth = scan_drill(spec, meta)
        # count blade-back runs over the revolution at a fixed working-part x
        xs = np.concatenate([f.x for f in scan.frames])
        target = xs[np.argmin(np.abs(xs - 70.0))]
        per_frame = np.full(meta.frame_count, False)
        pos = 0
        for f in scan.frames:
            m = len(f)
            sel = np.isclose(f.x, target)
            if sel.any():
                per_frame[f.index] = (truth.regions[pos:pos + m][sel] == Region.BACK).any()
            pos += m
        runs = int(np.sum(per_frame & ~np.roll(per_frame, 1)))
        assert runs == 3


class TestCalibrationBlockScan:
    def test_ladder_jump_in_every_frame(self, small_meta):
        block = CalibrationBlock()
        scan, _ = scan_calibration_block(block, small_meta, eccentricity=0.003)
        for f in scan.frames:
            assert np.abs(np.diff(f.z)).max() > 0.5 * block.step_height

    def test_true_distance_is_meta_distance(self, small_meta):
        _, true_d = scan_calibration_block(CalibrationBlock(), small_meta)
        assert true_d == small_meta.axis_distance

    def test_deterministic(self, small_meta):
        a, _ = scan_calibration_block(CalibrationBlock(), small_meta, noise_sigma=0.003, seed=5)
        b, _ = scan_calibration_block(CalibrationBlock(), small_meta, noise_sigma=0.003, seed=5)
        for fa, fb in zip(a.frames, b.frames):
            assert np.array_equal(fa.z, fb.z)


class TestInjectOutliers:
    def test_bookkeeping_and_determinism(self, small_bent_scan):
        spec, scan, truth = small_bent_scan
        noisy1, t1 = inject_outliers(scan, truth, rate=0.02, seed=8)
        noisy2, t2 = inject_outliers(scan, truth, rate=0.02, seed=8)
        assert np.array_equal(t1.outlier_mask, t2.outlier_mask)
        n = scan.total_points()
        frac = t1.outlier_mask.mean()
        assert 0.015 < frac < 0.025
        assert np.all(t1.labels[t1.outlier_mask] == int(PointLabel.OUTLIER))
        # displaced depths differ from the original scan
        z_old = np.concatenate([f.z for f in scan.frames])
        z_new = np.concatenate([f.z for f in noisy1.frames])
        moved = z_old != z_new
        assert np.array_equal(moved, t1.outlier_mask)
        assert np.abs((z_new - z_old)[moved]).min() >= 0.5
