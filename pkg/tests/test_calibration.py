import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drillscan import (
    CalibrationBlock,
    ScanMeta,
    calibrate,
    check_rule_II,
    locate_closest_frame,
    scan_calibration_block,
    solve_D,
)
from drillscan.calibration import BoundaryMinimumWarning, count_local_minima
from drillscan.errors import ConfigurationError, DegenerateInputError, InsufficientDataError


def markers(xs, zs):
    return np.column_stack([xs, zs])


class TestRuleII:
    def test_straight_evenly_spaced_passes(self):
        m = markers([0.0, 10.0, 20.0, 30.0], [100.000, 100.001, 100.001, 100.002])
        r = check_rule_II(m, delta_z_threshold=0.003)
        assert r.passed and r.delta_z == pytest.approx(0.002)

    def test_outline_drop_fails(self):
        m = markers([0.0, 10.0, 20.0, 30.0], [100.000, 100.001, 100.002, 100.005])
        assert not check_rule_II(m, delta_z_threshold=0.003).passed

    def test_uneven_spacing_fails(self):
        m = markers([0.0, 10.0, 21.0, 30.0], [100.0, 100.0, 100.0, 100.0])
        r = check_rule_II(m, spacing_tolerance=0.5)
        assert not r.passed and r.spacing_residual == pytest.approx(2.0)

    def test_duplicate_x_rejected(self):
        with pytest.raises(DegenerateInputError):
            check_rule_II(markers([0.0, 10.0, 10.0, 30.0], [1.0, 1.0, 1.0, 1.0]))


class TestLocateClosestFrame:
    def test_interior_minimum(self):
        assert locate_closest_frame([150.0, 149.0, 151.0], [151.0, 151.0, 151.0]) == 1

    def test_boundary_minimum_warns(self):
        with pytest.warns(BoundaryMinimumWarning):
            i = locate_closest_frame([150.0, 151.0, 152.0], [150.0, 150.0, 150.0])
        assert i == 0

    def test_matches_bruteforce_on_noisy_parabola(self):
        rng = np.random.default_rng(3)
        i = np.arange(1000)
        zb = 150.0 + 1e-5 * (i - 640.0) ** 2 + rng.normal(0, 0.002, 1000)
        zc = 150.0 + rng.normal(0, 0.002, 1000)
        sums = zb + zc
        expected = min(range(1000), key=lambda j: sums[j])
        assert locate_closest_frame(zb, zc) == expected

    def test_tie_takes_smallest_index(self):
        assert locate_closest_frame([1.0, 1.0, 2.0], [0.0, 0.0, 0.0]) == 0

    def test_mismatched_lengths_rejected(self):
        with pytest.raises(ConfigurationError):
            locate_closest_frame([1.0, 2.0], [1.0])

    def test_empty_rejected(self):
        with pytest.raises(InsufficientDataError):
            locate_closest_frame([], [])

    def test_local_minima_count(self):
        assert count_local_minima(np.array([3.0, 1.0, 2.0, 0.5, 4.0])) == 2


class TestSolveD:
    def test_straddling_endpoints_average(self):
        r = solve_D([150.0, 148.0, 150.0], [153.0, 152.0, 153.0])
        assert r.axis_distance == pytest.approx(150.0)
        assert r.best_frame == 1 and r.pass_rule_III

    def test_symmetric_case(self):
        r = solve_D([151.0, 150.0, 151.0], [151.0, 150.0, 151.0])
        assert r.axis_distance == pytest.approx(150.0)

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.floats(min_value=100, max_value=200), min_size=3, max_size=40))
    def test_swap_invariance(self, zb):
        rng = np.random.default_rng(0)
        zc = np.asarray(zb) + rng.uniform(-1, 1, len(zb))
        a = solve_D(np.asarray(zb), zc).axis_distance
        b = solve_D(zc, np.asarray(zb)).axis_distance
        assert a == pytest.approx(b, abs=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.floats(min_value=100, max_value=200), min_size=3, max_size=40),
           st.floats(min_value=-5, max_value=5))
    def test_constant_shift_moves_d_exactly(self, zb, c):
        zb = np.asarray(zb)
        zc = zb[::-1].copy()
        base = solve_D(zb, zc)
        shifted = solve_D(zb + c, zc + c)
        assert shifted.axis_distance == pytest.approx(base.axis_distance + c, abs=1e-9)


class TestBlockCalibration:
    def test_noiseless_recovery_is_exact(self, small_meta):
        scan, true_d = scan_calibration_block(CalibrationBlock(), small_meta)
        result = calibrate(scan)
        assert abs(result.axis_distance - true_d) < 1e-9
        assert result.pass_rule_II
        assert result.extras["pass_rule_I"]

    def test_noiseless_eccentric_within_eccentricity(self, small_meta):
        scan, true_d = scan_calibration_block(
            CalibrationBlock(), small_meta, eccentricity=0.005, eccentric_phase_deg=123.0)
        result = calibrate(scan)
        assert abs(result.axis_distance - true_d) <= 0.005 + 1e-6
        assert result.pass_rule_III

    def test_noisy_within_budget(self, small_meta):
        # combined budget: sensor repeatability + mounting eccentricity
        worst = 0.0
        for seed in range(5):
            scan, true_d = scan_calibration_block(
                CalibrationBlock(), small_meta, noise_sigma=0.003, seed=seed,
                eccentricity=0.005)
            result = calibrate(scan)
            worst = max(worst, abs(result.axis_distance - true_d))
        assert worst <= 0.008

    def test_step_height_visible_in_every_frame(self, small_meta):
        block = CalibrationBlock()
        scan, _ = scan_calibration_block(block, small_meta)
        for frame in scan.frames:
            jumps = np.abs(np.diff(frame.z))
            assert jumps.max() == pytest.approx(block.step_height, abs=1e-9)

    def test_result_json_keys(self, small_meta):
        scan, _ = scan_calibration_block(CalibrationBlock(), small_meta, eccentricity=0.002)
        payload = calibrate(scan).to_json_dict()
        for key in ("D", "i_star", "delta_z", "pass_rule_II", "pass_rule_III"):
            assert key in payload
