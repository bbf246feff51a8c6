"""Axis-deviation reconstruction and coaxiality evaluation.

Four axisymmetric depth profiles (at a chosen start angle and its 90/180/270
degree companions) are lifted from the blade-back points, interpolated with
quadratic splines, and differenced in opposite pairs. The root-sum-of-squares
of the two orthogonal differences approximates twice the local axis offset,
so its peak locates the worst cross sections. Least-squares circles fitted at
those sections, compared against a benchmark center fitted on the shank,
yield the coaxiality as twice the largest center distance.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.interpolate import make_interp_spline, make_lsq_spline
from scipy.ndimage import median_filter

from .errors import (
    ConfigurationError,
    DataDeficiencyError,
    DegenerateInputError,
    InsufficientDataError,
    ProfileRangeError,
)
from .scan import MeasurementCloud, PointLabel, ScanMeta


@dataclass
class AxialProfile:
    """Depth samples along the axis at one rotation angle, plus the fitted
    quadratic spline. Samples come only from blade-back points; x is strictly
    increasing after merging duplicates."""

    angle_index: int
    angle_deg: float
    x: np.ndarray
    z: np.ndarray
    spline: object = field(default=None, repr=False)

    @property
    def x_range(self) -> tuple[float, float]:
        return float(self.x[0]), float(self.x[-1])

    def __call__(self, x):
        if self.spline is None:
            raise ConfigurationError("profile has no fitted spline")
        x = np.asarray(x, dtype=float)
        lo, hi = self.x_range
        if np.any(x < lo - 1e-9) or np.any(x > hi + 1e-9):
            raise ProfileRangeError(
                f"evaluation outside profile range [{lo:.3f}, {hi:.3f}]")
        return self.spline(x)


class DeviationKind(Enum):
    ABSV = "ABSV"
    ABSH = "ABSH"
    SQUABS = "SquABS"


@dataclass
class DeviationProfile:
    """Absolute depth difference (or its orthogonal synthesis) on a shared
    x grid; values are nonnegative."""

    kind: DeviationKind
    x: np.ndarray
    values: np.ndarray


@dataclass
class CrossSection:
    """One located cross section: boundary points in the section plane and
    the least-squares circle through them."""

    x_position: float
    points_y: np.ndarray
    points_z: np.ndarray
    center: tuple[float, float]
    radius: float
    residual: float

    @property
    def n_points(self) -> int:
        return self.points_y.size


@dataclass
class CoaxialityReport:
    """Final evaluation: located sections, benchmark, coaxiality and the
    uncertainty ratio."""

    coaxiality: float
    benchmark_center: tuple[float, float]
    sections: list[CrossSection]
    section_distances: list[float]
    xsm: list[float]
    theta_deg: float
    delta_zs: float
    epsilon: float = float("nan")
    uncertainty: dict = field(default_factory=dict)
    duration_s: float = float("nan")

    def to_json_dict(self) -> dict:
        return {
            "coaxiality_mm": self.coaxiality,
            "benchmark_center": list(self.benchmark_center),
            "sections": [
                {
                    "x": s.x_position,
                    "center": list(s.center),
                    "radius": s.radius,
                    "residual": s.residual,
                    "distance": d,
                }
                for s, d in zip(self.sections, self.section_distances)
            ],
            "xsm": list(self.xsm),
            "theta_deg": self.theta_deg,
            "delta_zs": self.delta_zs,
            "epsilon": self.epsilon,
            "uncertainty": self.uncertainty,
            "duration_s": self.duration_s,
        }


PROFILE_OFFSETS_DEG = (0.0, 90.0, 180.0, 270.0)


def _drop_spikes(x: np.ndarray, z: np.ndarray, floor: float = 0.05) -> tuple[np.ndarray, np.ndarray]:
    """Discard samples far off the local median track.

    Mislabeled points from an adjoining surface sit a whole step off the
    track and would force large wiggles into the interpolating spline. The
    track is built per contiguous x run (the sampled teeth of a helical band
    are separated by wide gaps, and depths may legitimately differ between
    teeth), with a window wide enough that a contaminated border run cannot
    capture its own median.
    """
    if z.size < 9:
        return x, z
    gaps = np.diff(x)
    split = np.flatnonzero(gaps > max(10.0 * np.median(gaps), 0.5)) + 1
    dev = np.empty_like(z)
    for seg in np.split(np.arange(z.size), split):
        if seg.size < 5:
            dev[seg] = 0.0
            continue
        win = min(41, seg.size if seg.size % 2 else seg.size - 1)
        track = median_filter(z[seg], size=win, mode="nearest")
        dev[seg] = np.abs(z[seg] - track)
    scale = 1.4826 * np.median(dev)
    keep = dev <= max(12.0 * scale, floor)
    return x[keep], z[keep]


def _collect_profile(cloud: MeasurementCloud, meta: ScanMeta, angle_deg: float,
                     window_deg: float, min_points: int) -> tuple[np.ndarray, np.ndarray]:
    """Blade-back samples whose frame angle falls within +-window of the
    target, merged to one depth per x (mean of duplicates)."""
    frame_deg = 360.0 * (cloud.frame_index.astype(float) / meta.frame_count)
    delta = np.abs((frame_deg - angle_deg + 180.0) % 360.0 - 180.0)
    mask = (delta <= window_deg) & (cloud.label == int(PointLabel.BLADE_BACK))
    if np.count_nonzero(mask) < min_points:
        return np.empty(0), np.empty(0)
    x = cloud.x[mask]
    depth = meta.axis_distance - np.hypot(cloud.y[mask], cloud.z[mask])
    order = np.argsort(x, kind="stable")
    x = x[order]
    depth = depth[order]
    uniq, start = np.unique(x, return_index=True)
    sums = np.add.reduceat(depth, start)
    counts = np.diff(np.append(start, depth.size))
    return _drop_spikes(uniq, sums / counts)


def extract_profiles(cloud: MeasurementCloud, meta: ScanMeta,
                     theta_deg: float = 0.0,
                     window_frames: int = 2,
                     widen_factor: float = 2.0,
                     min_points: int = 8) -> list[AxialProfile]:
    """Four axisymmetric profiles at theta, theta+90, theta+180, theta+270.

    The collection window is +-window_frames frame steps around each target
    angle; on a deficient angle the window is widened once by widen_factor
    before giving up with an error naming the angle.
    """
    window_deg = window_frames * (360.0 / meta.frame_count)
    profiles = []
    for idx, off in enumerate(PROFILE_OFFSETS_DEG):
        angle = (theta_deg + off) % 360.0
        x, z = _collect_profile(cloud, meta, angle, window_deg, min_points)
        if x.size < min_points:
            x, z = _collect_profile(cloud, meta, angle, window_deg * widen_factor, min_points)
        if x.size < min_points:
            raise DataDeficiencyError(
                f"no usable blade-back points near angle {angle:.1f} deg "
                f"(window +-{window_deg * widen_factor:.2f} deg)")
        prof = AxialProfile(angle_index=idx, angle_deg=angle, x=x, z=z)
        prof.spline = smooth_quadratic_spline(x, z)
        profiles.append(prof)
    return profiles


def fit_quadratic_spline(profile: AxialProfile):
    """C1 piecewise-quadratic interpolant through the profile samples.

    Interpolation is exact through every sample and reproduces quadratics;
    it is the right tool for dense, gap-free profiles. Helical-band profiles
    sample the surface in teeth separated by wide gaps, where an interpolant
    rings; those use smooth_quadratic_spline instead.
    """
    if profile.x.size < 3:
        raise InsufficientDataError(
            f"quadratic spline needs >= 3 distinct x samples, got {profile.x.size}")
    return make_interp_spline(profile.x, profile.z, k=2)


def smooth_quadratic_spline(x: np.ndarray, z: np.ndarray, max_knots: int = 12):
    """Least-squares quadratic spline with interior knots at data quantiles.

    Regression (rather than interpolation) keeps the bridge over unsampled
    gaps smooth: any globally quadratic trend is represented exactly, and
    sample noise averages out instead of forcing C1 oscillation.
    """
    if x.size < 3:
        raise InsufficientDataError(
            f"quadratic spline needs >= 3 distinct x samples, got {x.size}")
    n_interior = int(np.clip(x.size // 40, 0, max_knots))
    if n_interior:
        interior = np.quantile(x, np.linspace(0, 1, n_interior + 2)[1:-1])
        interior = interior[(interior > x[0]) & (interior < x[-1])]
        interior = np.unique(interior)
    else:
        interior = np.empty(0)
    t = np.concatenate([[x[0]] * 3, interior, [x[-1]] * 3])
    return make_lsq_spline(x, z, t, k=2)


def common_grid(profiles: list[AxialProfile], step: float | None = None) -> np.ndarray:
    """Uniform x grid over the intersection of the profiles' ranges.

    Default step is the median axial sample spacing across the profiles.
    """
    lo = max(p.x_range[0] for p in profiles)
    hi = min(p.x_range[1] for p in profiles)
    if hi <= lo:
        raise ProfileRangeError("profiles have no overlapping x range")
    if step is None:
        spacings = np.concatenate([np.diff(p.x) for p in profiles])
        step = float(np.median(spacings))
    if step <= 0:
        raise ConfigurationError("grid step must be > 0")
    n = max(int(np.floor((hi - lo) / step)) + 1, 2)
    return lo + step * np.arange(n)


def difference_profiles(p_a: AxialProfile, p_b: AxialProfile,
                        grid: np.ndarray | None = None,
                        kind: DeviationKind = DeviationKind.ABSV) -> DeviationProfile:
    """|spline_a - spline_b| on a shared grid over the overlapping range."""
    if grid is None:
        grid = common_grid([p_a, p_b])
    values = np.abs(p_a(grid) - p_b(grid))
    return DeviationProfile(kind=kind, x=np.asarray(grid, dtype=float), values=values)


def synthesize(absv: DeviationProfile, absh: DeviationProfile) -> DeviationProfile:
    """Orthogonal synthesis: sqrt(vertical^2 + horizontal^2) pointwise."""
    if absv.x.shape != absh.x.shape or not np.allclose(absv.x, absh.x):
        raise ConfigurationError("orthogonal synthesis requires a shared x grid")
    return DeviationProfile(
        kind=DeviationKind.SQUABS,
        x=absv.x.copy(),
        values=np.hypot(absv.values, absh.values),
    )


def locate_max_deviation(squabs: DeviationProfile, delta_zs: float = 0.01) -> np.ndarray:
    """Grid positions within delta_zs of the peak deviation, ascending."""
    if squabs.values.size == 0:
        raise InsufficientDataError("empty deviation profile")
    peak = squabs.values.max()
    return squabs.x[squabs.values >= peak - delta_zs]


def fit_circle(y: np.ndarray, z: np.ndarray) -> tuple[tuple[float, float], float, float]:
    """Algebraic least-squares circle through 2-D points.

    Solves the linear system for (y^2 + z^2 + A y + B z + C) in the
    least-squares sense; returns ((y_c, z_c), radius, rms radial residual).
    """
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    if y.size < 3:
        raise InsufficientDataError(f"circle fit needs >= 3 points, got {y.size}")
    a = np.column_stack([y, z, np.ones_like(y)])
    b = -(y * y + z * z)
    coef, _, rank, _ = np.linalg.lstsq(a, b, rcond=None)
    if rank < 3:
        raise DegenerateInputError("collinear points: circle fit is degenerate")
    yc = -0.5 * coef[0]
    zc = -0.5 * coef[1]
    r2 = yc * yc + zc * zc - coef[2]
    if r2 <= 0:
        raise DegenerateInputError("circle fit produced non-positive radius")
    radius = float(np.sqrt(r2))
    residual = float(np.sqrt(np.mean((np.hypot(y - yc, z - zc) - radius) ** 2)))
    return (float(yc), float(zc)), radius, residual


def cross_section_at(cloud: MeasurementCloud, x_position: float,
                     half_width: float = 0.4,
                     label: int = int(PointLabel.BLADE_BACK)) -> CrossSection:
    """Fit the section circle from labeled points in a thin axial slab.

    One radial trim pass drops gross fliers (mislabeled points a whole
    surface step off the ring) before the final fit.
    """
    mask = (np.abs(cloud.x - x_position) <= half_width) & (cloud.label == label)
    y = cloud.y[mask]
    z = cloud.z[mask]
    if y.size < 3:
        raise InsufficientDataError(
            f"cross section at x={x_position:.3f}: only {y.size} points in slab")
    center, radius, residual = fit_circle(y, z)
    for _ in range(3):
        radial = np.abs(np.hypot(y - center[0], z - center[1]) - radius)
        scale = 1.4826 * np.median(radial)
        keep = radial <= max(4.0 * scale, 0.01)
        if keep.sum() < 3 or keep.all():
            break
        y, z = y[keep], z[keep]
        center, radius, residual = fit_circle(y, z)
    return CrossSection(float(x_position), y, z, center, radius, residual)


def benchmark_center(cloud: MeasurementCloud, shank_range: tuple[float, float],
                     n_sections: int = 5, half_width: float = 0.4) -> tuple[tuple[float, float], list[CrossSection]]:
    """Average of circle centers fitted on evenly spaced shank sections."""
    lo, hi = shank_range
    if hi <= lo:
        raise ConfigurationError("shank_range must satisfy min < max")
    positions = np.linspace(lo, hi, n_sections)
    sections = [cross_section_at(cloud, p, half_width) for p in positions]
    centers = np.array([s.center for s in sections])
    mean = centers.mean(axis=0)
    return (float(mean[0]), float(mean[1])), sections


def coaxiality(section_centers: list[tuple[float, float]],
               benchmark: tuple[float, float]) -> float:
    """Twice the largest Euclidean center distance to the benchmark."""
    if not section_centers:
        raise InsufficientDataError("coaxiality needs at least one section center")
    centers = np.asarray(section_centers, dtype=float)
    d = np.hypot(centers[:, 0] - benchmark[0], centers[:, 1] - benchmark[1])
    return float(2.0 * d.max())
