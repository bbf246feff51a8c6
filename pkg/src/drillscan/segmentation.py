"""Blade-back extraction from the unrolled cloud.

The unrolled cloud is tiled into blocks, each block into patches, and every
patch is summarized by the modal depth of its z histogram. A two-component
1-D Gaussian mixture over those patch modes is initialized from the mode
spread, solved by expectation-maximization, and each patch (with all its
member points) is assigned to the component with the higher responsibility
at its mode. The component with the smaller mean depth is the foreground
(blade back: the nearer surface). A statistical outlier-removal pass cleans
the extracted points afterwards.

Neighborhood context enters only through the patch summaries; that is what
buys robustness over labeling raw points one at a time (the classical
baseline at the bottom of this module).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConfigurationError,
    DegenerateInputError,
    InsufficientDataError,
    NumericFailureError,
)
from .neighbors import mean_knn_distances
from .scan import PointLabel, UnrolledCloud


@dataclass
class BlockGrid:
    """Uniform block/patch tiling of the cloud's (x, y) bounding box.

    Block counts are (axial, around); each block is subdivided into
    patches_per_block cells, so the composite patch lattice has
    blocks * patches_per_block cells per axis. Every point belongs to
    exactly one patch.
    """

    origin: tuple[float, float]
    extent: tuple[float, float]
    blocks: tuple[int, int]
    patches_per_block: tuple[int, int]
    patch_index: np.ndarray  # per-point flattened cell id

    @property
    def cells(self) -> tuple[int, int]:
        return (self.blocks[0] * self.patches_per_block[0],
                self.blocks[1] * self.patches_per_block[1])

    @property
    def n_cells(self) -> int:
        cx, cy = self.cells
        return cx * cy

    def cell_bounds(self, cell: int) -> tuple[tuple[float, float], tuple[float, float]]:
        cx, cy = self.cells
        ix, iy = divmod(cell, cy)
        wx = self.extent[0] / cx
        wy = self.extent[1] / cy
        x0 = self.origin[0] + ix * wx
        y0 = self.origin[1] + iy * wy
        return (x0, x0 + wx), (y0, y0 + wy)

    def block_of_cell(self, cell: int) -> int:
        cx, cy = self.cells
        ix, iy = divmod(cell, cy)
        bx = ix // self.patches_per_block[0]
        by = iy // self.patches_per_block[1]
        return bx * self.blocks[1] + by


def build_grid(cloud: UnrolledCloud, block_counts: tuple[int, int],
               patch_counts: tuple[int, int]) -> BlockGrid:
    """Tile the cloud bounding box into blocks and patches.

    block_counts / patch_counts are (axial, around). Points on the upper
    boundary fall into the last cell.
    """
    if len(cloud) == 0:
        raise DegenerateInputError("cannot grid an empty cloud")
    bx, by = block_counts
    px, py = patch_counts
    if min(bx, by, px, py) < 1:
        raise ConfigurationError("block and patch counts must be >= 1")
    x0, x1 = float(cloud.x.min()), float(cloud.x.max())
    y0, y1 = float(cloud.y.min()), float(cloud.y.max())
    wx, wy = x1 - x0, y1 - y0
    cx, cy = bx * px, by * py
    if wx == 0.0 and cx > 1:
        raise DegenerateInputError("zero x extent cannot be divided")
    if wy == 0.0 and cy > 1:
        raise DegenerateInputError("zero y extent cannot be divided")
    ix = np.zeros(len(cloud), dtype=np.int64) if wx == 0.0 else np.clip(
        ((cloud.x - x0) * (cx / wx)).astype(np.int64), 0, cx - 1)
    iy = np.zeros(len(cloud), dtype=np.int64) if wy == 0.0 else np.clip(
        ((cloud.y - y0) * (cy / wy)).astype(np.int64), 0, cy - 1)
    return BlockGrid(
        origin=(x0, y0),
        extent=(wx, wy),
        blocks=(bx, by),
        patches_per_block=(px, py),
        patch_index=ix * cy + iy,
    )


def depth_bin_index(z: np.ndarray, bin_width: float) -> np.ndarray:
    """Histogram bin of each depth; bins are centered on integer multiples
    of bin_width."""
    if bin_width <= 0:
        raise ConfigurationError("bin_width must be > 0")
    return np.floor(np.asarray(z, dtype=float) / bin_width + 0.5).astype(np.int64)


def patch_mode(z: np.ndarray, bin_width: float) -> float:
    """Center of the maximal-count histogram bin; ties go to the lowest bin."""
    z = np.asarray(z, dtype=float)
    if z.size == 0:
        raise InsufficientDataError("patch is empty")
    bins = depth_bin_index(z, bin_width)
    uniq, counts = np.unique(bins, return_counts=True)
    return float(uniq[np.argmax(counts)] * bin_width)


@dataclass
class PatchFeatures:
    """Per-patch summary: cell id, modal depth, member count."""

    patch_ids: np.ndarray
    modes: np.ndarray
    counts: np.ndarray
    n_empty: int


def grid_patch_modes(grid: BlockGrid, z: np.ndarray, bin_width: float) -> PatchFeatures:
    """Modal depth of every nonempty patch (empty patches are skipped)."""
    bins = depth_bin_index(z, bin_width)
    bmin = bins.min()
    span = int(bins.max() - bmin) + 1
    key = grid.patch_index * span + (bins - bmin)
    uniq, counts = np.unique(key, return_counts=True)
    pid = uniq // span
    bin_center = (uniq - pid * span + bmin) * bin_width
    # first entry per patch after ordering by (patch, count desc, bin asc)
    order = np.lexsort((bin_center, -counts, pid))
    pid_sorted = pid[order]
    firsts = np.unique(pid_sorted, return_index=True)[1]
    patch_ids = pid_sorted[firsts]
    modes = bin_center[order][firsts]
    totals = np.bincount(grid.patch_index, minlength=grid.n_cells)
    return PatchFeatures(
        patch_ids=patch_ids,
        modes=modes.astype(float),
        counts=totals[patch_ids],
        n_empty=int(grid.n_cells - patch_ids.size),
    )


@dataclass
class GmmModel:
    """K-component 1-D Gaussian mixture over depth."""

    weights: np.ndarray
    means: np.ndarray
    sigmas: np.ndarray

    def __post_init__(self):
        self.weights = np.atleast_1d(np.asarray(self.weights, dtype=float))
        self.means = np.atleast_1d(np.asarray(self.means, dtype=float))
        self.sigmas = np.atleast_1d(np.asarray(self.sigmas, dtype=float))
        if not (self.weights.size == self.means.size == self.sigmas.size):
            raise ConfigurationError("weights, means, sigmas must have equal length")
        if np.any(self.sigmas <= 0):
            raise ConfigurationError("sigmas must be > 0")
        if abs(self.weights.sum() - 1.0) > 1e-9:
            raise ConfigurationError("weights must sum to 1")

    @property
    def n_components(self) -> int:
        return self.weights.size

    def pdf(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        dens = np.zeros_like(z)
        for w, m, s in zip(self.weights, self.means, self.sigmas):
            dens += w * normal_pdf(z, m, s)
        return dens

    def to_json_dict(self, iterations: int | None = None, loglik: float | None = None) -> dict:
        out = {
            "weights": self.weights.tolist(),
            "means": self.means.tolist(),
            "sigmas": self.sigmas.tolist(),
        }
        if iterations is not None:
            out["iterations"] = iterations
        if loglik is not None:
            out["loglik"] = loglik
        return out


def normal_pdf(z, mean: float, sigma: float):
    z = np.asarray(z, dtype=float)
    u = (z - mean) / sigma
    return np.exp(-0.5 * u * u) / (np.sqrt(2.0 * np.pi) * sigma)


def init_gmm(modes: np.ndarray) -> GmmModel:
    """Two-component initialization from the patch-mode spread.

    sigma_F = sigma_B = (max - min) / 4; the two means straddle the mode
    centroid at one sigma on either side; equal weights.
    """
    modes = np.asarray(modes, dtype=float)
    if np.unique(modes).size < 2:
        raise DegenerateInputError("all patch modes identical (flat surface); cannot initialize")
    sigma = (modes.max() - modes.min()) / 4.0
    center = modes.mean()
    return GmmModel(
        weights=np.array([0.5, 0.5]),
        means=np.array([center - sigma, center + sigma]),
        sigmas=np.array([sigma, sigma]),
    )


@dataclass
class EmFitResult:
    model: GmmModel
    responsibilities: np.ndarray  # (n_features, K)
    loglik_trace: np.ndarray
    iterations: int
    converged: bool
    sigma_clamped: bool = False

    @property
    def loglik(self) -> float:
        return float(self.loglik_trace[-1])


def em_fit(features: np.ndarray, init: GmmModel, tol: float = 1e-8,
           max_iter: int = 200, sigma_floor: float = 1e-4) -> EmFitResult:
    """Maximum-likelihood fit of the mixture by expectation-maximization.

    The log-likelihood is non-decreasing across iterations; the loop stops
    once its relative change drops below `tol` or `max_iter` is reached.
    Responsibilities per feature sum to 1. A component whose sigma falls
    below `sigma_floor` is clamped there and flagged.
    """
    if tol <= 0:
        raise ConfigurationError("tol must be > 0")
    z = np.asarray(features, dtype=float)
    if z.size == 0:
        raise InsufficientDataError("no features to fit")
    w = init.weights.copy()
    mu = init.means.copy()
    sig = np.maximum(init.sigmas.copy(), sigma_floor)
    k = w.size
    trace = []
    clamped = False
    resp = np.full((z.size, k), 1.0 / k)
    prev_ll = -np.inf
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        dens = np.empty((z.size, k))
        for j in range(k):
            dens[:, j] = w[j] * normal_pdf(z, mu[j], sig[j])
        tot = dens.sum(axis=1)
        if not np.all(np.isfinite(tot)) or np.any(tot <= 0):
            raise NumericFailureError("mixture density vanished or became non-finite")
        resp = dens / tot[:, None]
        ll = float(np.log(tot).sum())
        if not np.isfinite(ll):
            raise NumericFailureError("log-likelihood became non-finite")
        trace.append(ll)
        if np.isfinite(prev_ll) and abs(ll - prev_ll) < tol * max(1.0, abs(prev_ll)):
            converged = True
            break
        prev_ll = ll
        nk = resp.sum(axis=0)
        nk = np.maximum(nk, 1e-300)
        w = nk / z.size
        mu = (resp * z[:, None]).sum(axis=0) / nk
        var = (resp * (z[:, None] - mu) ** 2).sum(axis=0) / nk
        sig = np.sqrt(var)
        if np.any(sig < sigma_floor):
            sig = np.maximum(sig, sigma_floor)
            clamped = True
    model = GmmModel(w / w.sum(), mu, sig)
    return EmFitResult(
        model=model,
        responsibilities=resp,
        loglik_trace=np.asarray(trace),
        iterations=iterations,
        converged=converged,
        sigma_clamped=clamped,
    )


@dataclass
class SegmentationResult:
    """Point and patch labels plus solver diagnostics."""

    point_labels: np.ndarray
    patch_labels: np.ndarray      # per cell id; UNLABELED where empty
    foreground_component: int
    converged: bool
    iterations: int
    loglik: float
    model: GmmModel
    features: PatchFeatures | None = None
    extras: dict = field(default_factory=dict)


def classify(grid: BlockGrid, features: PatchFeatures, fit: EmFitResult) -> SegmentationResult:
    """Assign each patch (and its points) to the dominant component at its mode.

    The component with the smaller mean is the blade back (nearer surface,
    smaller depth); exact responsibility ties resolve to the foreground.
    """
    model = fit.model
    if model.n_components != 2:
        raise ConfigurationError("patch classification expects a 2-component model")
    fg = int(np.argmin(model.means))
    bg = 1 - fg
    dens_fg = model.weights[fg] * normal_pdf(features.modes, model.means[fg], model.sigmas[fg])
    dens_bg = model.weights[bg] * normal_pdf(features.modes, model.means[bg], model.sigmas[bg])
    is_back = dens_fg >= dens_bg
    patch_labels = np.full(grid.n_cells, int(PointLabel.UNLABELED), dtype=np.int8)
    patch_labels[features.patch_ids] = np.where(
        is_back, int(PointLabel.BLADE_BACK), int(PointLabel.BACKGROUND))
    point_labels = patch_labels[grid.patch_index]
    return SegmentationResult(
        point_labels=point_labels,
        patch_labels=patch_labels,
        foreground_component=fg,
        converged=fit.converged,
        iterations=fit.iterations,
        loglik=fit.loglik,
        model=model,
        features=features,
    )


def sor_filter(points: np.ndarray, k_neighbors: int = 8,
               std_multiplier: float = 3.0) -> np.ndarray:
    """Statistical outlier removal: keep-mask over the input points.

    A point is removed iff its mean distance to the k nearest neighbors
    exceeds the global mean plus `std_multiplier` standard deviations of
    that statistic. With too few points the filter is skipped (all kept)
    with a warning.
    """
    if k_neighbors < 1:
        raise ConfigurationError("k_neighbors must be >= 1")
    pts = np.asarray(points, dtype=float)
    n = pts.shape[0]
    if n <= k_neighbors:
        warnings.warn(
            f"SOR skipped: {n} points <= k_neighbors={k_neighbors}",
            UserWarning, stacklevel=2,
        )
        return np.ones(n, dtype=bool)
    mean_knn = mean_knn_distances(pts, k_neighbors)
    threshold = mean_knn.mean() + std_multiplier * mean_knn.std()
    return mean_knn <= threshold


def segment_cloud(cloud: UnrolledCloud,
                  block_counts: tuple[int, int] = (1, 4),
                  patch_counts: tuple[int, int] = (320, 128),
                  bin_width: float = 0.039,
                  em_tol: float = 1e-8,
                  em_max_iter: int = 200) -> SegmentationResult:
    """Grid, summarize, fit and classify; returns per-point labels."""
    grid = build_grid(cloud, block_counts, patch_counts)
    features = grid_patch_modes(grid, cloud.z, bin_width)
    init = init_gmm(features.modes)
    fit = em_fit(features.modes, init, tol=em_tol, max_iter=em_max_iter,
                 sigma_floor=bin_width / 10.0)
    result = classify(grid, features, fit)
    result.extras["grid"] = grid
    return result


def classical_gmm_point_labels(z: np.ndarray, bin_width: float = 0.039,
                               em_tol: float = 1e-8, em_max_iter: int = 200) -> np.ndarray:
    """Per-point two-component baseline with no spatial division.

    Each raw depth is its own feature; initialization uses the same
    spread-based rule applied to the raw depths. Points are labeled by their
    own responsibilities, foreground again the smaller-mean component.
    """
    z = np.asarray(z, dtype=float)
    init = init_gmm(z)
    fit = em_fit(z, init, tol=em_tol, max_iter=em_max_iter, sigma_floor=bin_width / 10.0)
    fg = int(np.argmin(fit.model.means))
    is_back = fit.responsibilities[:, fg] >= fit.responsibilities[:, 1 - fg]
    return np.where(is_back, int(PointLabel.BLADE_BACK), int(PointLabel.BACKGROUND)).astype(np.int8)
