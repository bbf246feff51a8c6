"""Coaxiality measurement of twist drills from rotating line-laser scans."""

__version__ = "0.1.0"

from .axis import (
    AxialProfile,
    CoaxialityReport,
    CrossSection,
    DeviationKind,
    DeviationProfile,
    benchmark_center,
    coaxiality,
    common_grid,
    cross_section_at,
    difference_profiles,
    extract_profiles,
    fit_circle,
    fit_quadratic_spline,
    locate_max_deviation,
    synthesize,
)
from .calibration import (
    CalibrationBlock,
    CalibrationProbe,
    CalibrationResult,
    calibrate,
    check_rule_II,
    extract_probe,
    locate_closest_frame,
    solve_D,
)
from .config import PipelineConfig, load_config
from .pipeline import MeasureResult, measure_scan
from .scan import (
    MeasurementCloud,
    PointLabel,
    ScanMeta,
    ScanSet,
    SensorFrame,
    UnrolledCloud,
    passthrough_filter,
    scan_to_measurement_cloud,
    to_measurement_frame,
    unroll,
)
from .segmentation import (
    BlockGrid,
    EmFitResult,
    GmmModel,
    PatchFeatures,
    SegmentationResult,
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
from .simulator import (
    DrillSpec,
    GroundTruth,
    OcclusionModel,
    Region,
    analytic_sensor_depth,
    inject_outliers,
    scan_calibration_block,
    scan_drill,
)
from .uncertainty import UncertaintyBudget, budget, within_spec
