import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from drillscan import (
    GmmModel,
    PointLabel,
    UnrolledCloud,
    build_grid,
    classical_gmm_point_labels,
    classify,
    em_fit,
    grid_patch_modes,
    init_gmm,
    normal_pdf,
    patch_mode,
    segment_cloud,
    sor_filter,
)
from drillscan.errors import DegenerateInputError, InsufficientDataError
from drillscan.segmentation import PatchFeatures

from conftest import label_accuracy


def cloud_from(x, y, z):
    x = np.asarray(x, dtype=float)
    return UnrolledCloud(x, np.asarray(y, dtype=float), np.asarray(z, dtype=float),
                         np.zeros(x.size, dtype=np.int64))


class TestBuildGrid:
    def test_unit_square_corners_one_per_block(self):
        c = cloud_from([0, 0, 1, 1], [0, 1, 0, 1], [0, 0, 0, 0])
        grid = build_grid(c, (2, 2), (1, 1))
        assert np.unique(grid.patch_index).size == 4
        assert np.bincount(grid.patch_index, minlength=4).tolist() == [1, 1, 1, 1]

    def test_single_patch_holds_everything(self):
        c = cloud_from([0, 1, 2], [0, 1, 2], [0, 0, 0])
        grid = build_grid(c, (1, 1), (1, 1))
        assert np.all(grid.patch_index == 0)

    def test_counts_match_bruteforce_binning(self):
        rng = np.random.default_rng(9)
        x = rng.uniform(0, 10, 10000)
        y = rng.uniform(0, 3, 10000)
        grid = build_grid(cloud_from(x, y, np.zeros(10000)), (8, 8), (4, 4))
        cx, cy = grid.cells
        # independent binning: direct per-point loop with the same tiling rule
        counts = np.zeros(cx * cy, dtype=int)
        for xi, yi in zip(x, y):
            ix = min(int((xi - x.min()) / (x.max() - x.min()) * cx), cx - 1)
            iy = min(int((yi - y.min()) / (y.max() - y.min()) * cy), cy - 1)
            counts[ix * cy + iy] += 1
        assert np.array_equal(np.bincount(grid.patch_index, minlength=cx * cy), counts)

    def test_zero_extent_rejected(self):
        c = cloud_from([1, 1, 1], [0, 1, 2], [0, 0, 0])
        with pytest.raises(DegenerateInputError):
            build_grid(c, (2, 1), (1, 1))

    def test_every_point_in_exactly_one_patch(self):
        rng = np.random.default_rng(2)
        c = cloud_from(rng.uniform(0, 5, 500), rng.uniform(0, 5, 500), np.zeros(500))
        grid = build_grid(c, (3, 2), (2, 5))
        assert grid.patch_index.size == 500
        assert grid.patch_index.min() >= 0 and grid.patch_index.max() < grid.n_cells

    def test_patch_maps_to_owning_block(self):
        c = cloud_from([0, 10], [0, 10], [0, 0])
        grid = build_grid(c, (2, 2), (3, 3))
        assert grid.block_of_cell(0) == 0
        assert grid.block_of_cell(grid.n_cells - 1) == 3


class TestPatchMode:
    def test_majority_bin_wins(self):
        assert patch_mode(np.array([1.0, 1.0, 2.0]), 1.0) == pytest.approx(1.0)

    def test_single_point_returns_its_bin_center(self):
        got = patch_mode(np.array([7.5]), 1.0)
        assert got == pytest.approx(np.floor(7.5 / 1.0 + 0.5) * 1.0)

    def test_matches_exhaustive_histogram(self):
        rng = np.random.default_rng(5)
        z = np.concatenate([rng.normal(12, 0.5, 400), rng.normal(18, 0.5, 600)])
        w = 0.25
        got = patch_mode(z, w)
        bins = np.floor(z / w + 0.5).astype(int)
        best_count, best_bin = -1, None
        for b in sorted(set(bins)):
            c = int(np.sum(bins == b))
            if c > best_count:
                best_count, best_bin = c, b
        assert got == pytest.approx(best_bin * w)

    def test_tie_goes_to_lowest_bin(self):
        assert patch_mode(np.array([0.0, 5.0]), 1.0) == pytest.approx(0.0)

    def test_empty_patch_rejected(self):
        with pytest.raises(InsufficientDataError):
            patch_mode(np.array([]), 1.0)


class TestInitGmm:
    def test_two_modes(self):
        model = init_gmm(np.array([10.0, 20.0]))
        assert model.sigmas == pytest.approx([2.5, 2.5])
        assert model.means == pytest.approx([12.5, 17.5])
        assert model.weights == pytest.approx([0.5, 0.5])

    def test_three_modes(self):
        model = init_gmm(np.array([0.0, 4.0, 8.0]))
        assert model.sigmas[0] == pytest.approx(2.0)
        assert model.means == pytest.approx([2.0, 6.0])

    def test_flat_surface_rejected(self):
        with pytest.raises(DegenerateInputError):
            init_gmm(np.full(10, 3.3))


class TestEmFit:
    def test_single_component_closed_form(self):
        data = np.array([-1.0, 0.0, 1.0])
        init = GmmModel([1.0], [0.5], [2.0])
        fit = em_fit(data, init, tol=1e-12, max_iter=500)
        assert fit.model.means[0] == pytest.approx(0.0, abs=1e-9)
        assert fit.model.sigmas[0] == pytest.approx(np.sqrt(2.0 / 3.0), abs=1e-9)
        assert fit.model.weights[0] == pytest.approx(1.0)

    def test_standard_normal_peak_density(self):
        assert normal_pdf(0.0, 0.0, 1.0) == pytest.approx(0.3989422804014327, abs=1e-12)

    def test_recovers_well_separated_mixture(self):
        rng = np.random.default_rng(17)
        data = np.concatenate([rng.normal(12, 0.5, 1000), rng.normal(18, 0.5, 1000)])
        fit = em_fit(data, init_gmm(data))
        means = np.sort(fit.model.means)
        assert abs(means[0] - 12.0) < 0.1 and abs(means[1] - 18.0) < 0.1
        assert fit.converged

    def test_loglik_monotone_and_responsibilities_normalized(self):
        rng = np.random.default_rng(23)
        data = np.concatenate([rng.normal(0, 1, 300), rng.normal(5, 2, 300)])
        fit = em_fit(data, init_gmm(data))
        diffs = np.diff(fit.loglik_trace)
        assert np.all(diffs >= -1e-9 * np.abs(fit.loglik_trace[:-1]))
        assert np.allclose(fit.responsibilities.sum(axis=1), 1.0, atol=1e-12)

    def test_sigma_floor_clamps_collapse(self):
        data = np.array([0.0, 0.0, 0.0, 10.0])
        init = GmmModel([0.5, 0.5], [0.0, 10.0], [1.0, 1.0])
        fit = em_fit(data, init, sigma_floor=0.05)
        assert fit.sigma_clamped
        assert np.all(fit.model.sigmas >= 0.05)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(min_value=0, max_value=10_000))
    def test_mixture_density_integrates_to_one(self, seed):
        rng = np.random.default_rng(seed)
        data = np.concatenate([rng.normal(0, 0.3, 120), rng.normal(2.0, 0.7, 80)])
        model = em_fit(data, init_gmm(data), max_iter=60).model
        lo = model.means.min() - 10 * model.sigmas.max()
        hi = model.means.max() + 10 * model.sigmas.max()
        total, _ = quad(model.pdf, lo, hi, limit=200)
        assert total == pytest.approx(1.0, abs=1e-6)

    def test_depth_shift_equivariance(self):
        rng = np.random.default_rng(31)
        data = np.concatenate([rng.normal(1, 0.2, 200), rng.normal(3, 0.2, 200)])
        base = em_fit(data, init_gmm(data))
        shifted = em_fit(data + 7.5, init_gmm(data + 7.5))
        assert np.allclose(np.sort(shifted.model.means), np.sort(base.model.means) + 7.5, atol=1e-6)
        assert np.allclose(np.sort(shifted.model.sigmas), np.sort(base.model.sigmas), atol=1e-6)


class TestClassify:
    def fit_two(self, fg_mean=1.0, bg_mean=2.0):
        modes = np.array([fg_mean, fg_mean, fg_mean, bg_mean, bg_mean])
        c = cloud_from(np.arange(5), np.zeros(5), modes)
        grid = build_grid(c, (5, 1), (1, 1))
        feats = grid_patch_modes(grid, c.z, 0.1)
        fit = em_fit(feats.modes, init_gmm(feats.modes))
        return grid, feats, fit

    def test_patch_at_foreground_mean_is_blade_back(self):
        grid, feats, fit = self.fit_two()
        result = classify(grid, feats, fit)
        fg = np.argmin(fit.model.means)
        at_fg = np.isclose(feats.modes, np.sort(fit.model.means)[0], atol=0.2)
        assert np.all(result.patch_labels[feats.patch_ids[at_fg]] == int(PointLabel.BLADE_BACK))

    def test_equidistant_tie_goes_to_foreground(self):
        grid, feats, _ = self.fit_two()
        model = GmmModel([0.5, 0.5], [1.0, 2.0], [0.3, 0.3])
        from drillscan.segmentation import EmFitResult
        fake = EmFitResult(model, np.zeros((feats.modes.size, 2)), np.array([0.0]), 1, True)
        feats_mid = PatchFeatures(
            patch_ids=np.array([0]), modes=np.array([1.5]),
            counts=np.array([1]), n_empty=grid.n_cells - 1)
        result = classify(grid, feats_mid, fake)
        assert result.patch_labels[0] == int(PointLabel.BLADE_BACK)

    def test_points_inherit_patch_label(self):
        grid, feats, fit = self.fit_two()
        result = classify(grid, feats, fit)
        assert np.array_equal(result.point_labels, result.patch_labels[grid.patch_index])


class TestSorFilter:
    def test_single_far_point_removed(self):
        rng = np.random.default_rng(1)
        plane = rng.uniform(0, 10, (400, 2))
        pts = np.column_stack([plane, np.zeros(400)])
        pts = np.vstack([pts, [5.0, 5.0, 100.0]])
        keep = sor_filter(pts, k_neighbors=8, std_multiplier=1.0)
        assert not keep[-1]
        assert keep[:-1].mean() > 0.9

    def test_uniform_grid_untouched_at_large_multiplier(self):
        g = np.stack(np.meshgrid(np.arange(15.0), np.arange(15.0), indexing="ij"), axis=-1)
        pts = np.column_stack([g.reshape(-1, 2), np.zeros(225)])
        keep = sor_filter(pts, k_neighbors=8, std_multiplier=10.0)
        assert keep.all()

    def test_too_few_points_skips_with_warning(self):
        with pytest.warns(UserWarning, match="SOR skipped"):
            keep = sor_filter(np.zeros((3, 3)), k_neighbors=8)
        assert keep.all()

    def test_injected_outliers_removed(self, small_bent_scan, small_meta):
        from drillscan import inject_outliers
        from drillscan.scan import scan_to_measurement_cloud
        spec, scan, truth = small_bent_scan
        noisy, truth2 = inject_outliers(scan, truth, rate=0.01, seed=4)
        cloud = scan_to_measurement_cloud(noisy)
        pts = np.column_stack([cloud.x, cloud.y, cloud.z])
        keep = sor_filter(pts, k_neighbors=8, std_multiplier=2.0)
        injected = truth2.outlier_mask
        assert np.mean(~keep[injected]) >= 0.95       # injected points removed
        assert np.mean(~keep[~injected]) <= 0.005     # inliers preserved


class TestEndToEndSegmentation:
    def test_blade_back_accuracy_on_simulated_drill(self, small_measure_result):
        spec, scan, truth, result = small_measure_result
        acc = label_accuracy(result.point_labels, truth.labels)
        assert acc >= 0.99

    def test_segment_cloud_converges(self, small_bent_scan):
        from drillscan.scan import unroll
        spec, scan, truth = small_bent_scan
        seg = segment_cloud(unroll(scan))
        assert seg.converged
        assert seg.model.n_components == 2

    def test_classical_baseline_runs(self):
        rng = np.random.default_rng(8)
        z = np.concatenate([rng.normal(145, 0.01, 500), rng.normal(145.8, 0.01, 300)])
        labels = classical_gmm_point_labels(z)
        assert np.all(labels[:500] == int(PointLabel.BLADE_BACK))
        assert np.all(labels[500:] == int(PointLabel.BACKGROUND))
