"""End-to-end measurement pipeline.

Wires the stages together: unroll, straight-through filter, blade-back
segmentation, outlier removal, axisymmetric profile extraction, orthogonal
synthesis, worst-section location, circle fits against the shank benchmark,
and the uncertainty budget. Wall-clock duration of the full run is recorded
in the report.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import axis as axis_mod
from . import segmentation as seg_mod
from . import uncertainty as unc_mod
from .axis import CoaxialityReport, DeviationKind
from .config import PipelineConfig
from .scan import (
    MeasurementCloud,
    PointLabel,
    ScanSet,
    UnrolledCloud,
    scan_to_measurement_cloud,
    unroll,
)

logger = logging.getLogger(__name__)


@dataclass
class MeasureResult:
    """Report plus the intermediate artifacts useful for inspection."""

    report: CoaxialityReport
    cloud: MeasurementCloud
    unrolled: UnrolledCloud
    segmentation: seg_mod.SegmentationResult
    profiles: list
    absv: axis_mod.DeviationProfile
    absh: axis_mod.DeviationProfile
    squabs: axis_mod.DeviationProfile
    kept_mask: np.ndarray = field(default=None, repr=False)

    @property
    def point_labels(self) -> np.ndarray:
        return self.cloud.label


def _thin_positions(xsm: np.ndarray, values: np.ndarray, limit: int) -> np.ndarray:
    """At most `limit` section positions, always keeping the peak."""
    if xsm.size <= limit:
        return xsm
    idx = np.unique(np.round(np.linspace(0, xsm.size - 1, limit)).astype(int))
    peak = int(np.argmax(values))
    if peak not in idx:
        idx = np.sort(np.append(idx[:-1], peak))
    return xsm[idx]


def measure_scan(scan: ScanSet, config: PipelineConfig | None = None) -> MeasureResult:
    """Run the full coaxiality measurement on an ingested scan."""
    config = config or PipelineConfig()
    t0 = time.perf_counter()
    meta = scan.meta

    unrolled = unroll(scan)
    cloud = scan_to_measurement_cloud(scan)
    kept = np.ones(len(unrolled), dtype=bool)
    if config.z_filter_min is not None:
        kept = (unrolled.z >= config.z_filter_min) & (unrolled.z <= config.z_filter_max)
        unrolled = unrolled.select(kept)
        cloud = cloud.select(kept)
        logger.info("straight-through filter kept %d/%d points", kept.sum(), kept.size)

    seg = seg_mod.segment_cloud(
        unrolled,
        block_counts=(config.blocks_axial, config.blocks_around),
        patch_counts=(config.patches_axial, config.patches_around),
        bin_width=config.bin_width,
        em_tol=config.em_tol,
        em_max_iter=config.em_max_iter,
    )
    labels = seg.point_labels.copy()

    back = labels == int(PointLabel.BLADE_BACK)
    if np.count_nonzero(back) > config.sor_neighbors:
        pts = np.column_stack([cloud.x[back], cloud.y[back], cloud.z[back]])
        keep_back = seg_mod.sor_filter(pts, config.sor_neighbors, config.sor_std)
        back_idx = np.flatnonzero(back)
        labels[back_idx[~keep_back]] = int(PointLabel.OUTLIER)
        logger.info("SOR removed %d of %d blade-back points",
                    int((~keep_back).sum()), back_idx.size)
    cloud.label = labels
    seg.point_labels = labels

    profiles = axis_mod.extract_profiles(
        cloud, meta,
        theta_deg=config.theta_deg,
        window_frames=config.profile_window_frames,
        widen_factor=config.profile_widen,
    )
    grid = axis_mod.common_grid(profiles)
    absv = axis_mod.difference_profiles(profiles[0], profiles[2], grid, DeviationKind.ABSV)
    absh = axis_mod.difference_profiles(profiles[1], profiles[3], grid, DeviationKind.ABSH)
    squabs = axis_mod.synthesize(absv, absh)
    xsm = axis_mod.locate_max_deviation(squabs, config.delta_zs)

    bench, _ = axis_mod.benchmark_center(
        cloud, (config.shank_min, config.shank_max),
        n_sections=config.benchmark_sections,
        half_width=config.section_half_width,
    )
    fitted_positions = _thin_positions(
        xsm, squabs.values[np.isin(squabs.x, xsm)], config.max_sections)
    sections = [
        axis_mod.cross_section_at(cloud, float(p), config.section_half_width)
        for p in fitted_positions
    ]
    distances = [
        float(np.hypot(s.center[0] - bench[0], s.center[1] - bench[1]))
        for s in sections
    ]
    c_e = axis_mod.coaxiality([s.center for s in sections], bench)

    budget = unc_mod.budget(
        config.uncertainty_dz, config.uncertainty_dc,
        radius=0.5 * config.drill_diameter,
        length=config.drill_length,
        diameter=config.drill_diameter,
    )

    report = CoaxialityReport(
        coaxiality=c_e,
        benchmark_center=bench,
        sections=sections,
        section_distances=distances,
        xsm=[float(v) for v in xsm],
        theta_deg=config.theta_deg,
        delta_zs=config.delta_zs,
        epsilon=budget.epsilon,
        uncertainty=budget.to_json_dict(),
        duration_s=time.perf_counter() - t0,
    )
    logger.info("coaxiality %.4f mm from %d sections in %.2f s",
                c_e, len(sections), report.duration_s)
    return MeasureResult(
        report=report,
        cloud=cloud,
        unrolled=unrolled,
        segmentation=seg,
        profiles=profiles,
        absv=absv,
        absh=absh,
        squabs=squabs,
        kept_mask=kept,
    )
