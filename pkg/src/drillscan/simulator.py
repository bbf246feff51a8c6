"""Synthetic rotating line-laser scans with exact ground truth.

A parametric twist drill (cylindrical shank plus a fluted working part whose
cross section alternates between a nominal-radius back arc, a relieved lip
arc and a recessed groove) rotates in front of a virtual triangulation
sensor. Each frame intersects the sensor ray fan with the rotated surface,
drops returns that violate the depth-of-field, field-of-view or incidence
constraints, and adds Gaussian depth noise. Every emitted point carries the
analytic surface region it came from, and the bent axis is known in closed
form, so downstream modules can be checked against exact truth.

The drill axis bend is a single smooth bow: zero over the shank, quadratic
in x with a configurable apex, lying in a plane at a configurable angle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .calibration import CalibrationBlock
from .errors import ConfigurationError, SimulationError
from .scan import PointLabel, ScanMeta, ScanSet, SensorFrame

TWO_PI = 2.0 * np.pi


class Region:
    SHANK = 0
    BACK = 1
    LIP = 2
    GROOVE = 3
    OUTLIER = 4


REGION_NAMES = {
    Region.SHANK: "shank",
    Region.BACK: "blade_back",
    Region.LIP: "blade_lip",
    Region.GROOVE: "groove",
    Region.OUTLIER: "outlier",
}

# region -> two-class segmentation truth
REGION_TO_LABEL = {
    Region.SHANK: int(PointLabel.BLADE_BACK),
    Region.BACK: int(PointLabel.BLADE_BACK),
    Region.LIP: int(PointLabel.BACKGROUND),
    Region.GROOVE: int(PointLabel.BACKGROUND),
    Region.OUTLIER: int(PointLabel.OUTLIER),
}


@dataclass
class DrillSpec:
    """Parametric twist drill.

    The bend bow rises from zero at the end of the shank to `bend_amplitude`
    at `bend_apex_x` (default: middle of the working part, which puts the
    second zero at the tip), in a plane at `bend_phi_deg` from the frame-0
    sensor direction. True coaxiality is twice the apex offset.
    """

    shank_length: float = 35.0
    shank_diameter: float = 10.0
    working_length: float = 65.0
    working_diameter: float = 10.0
    flute_count: int = 2
    helix_pitch: float = 60.0             # mm of axial travel per revolution
    back_width_deg: float = 60.0
    lip_width_deg: float = 30.0
    bend_phi_deg: float = 0.0
    bend_apex_x: float | None = None
    bend_amplitude: float = 0.05
    lip_drop: float = 0.8                 # lip sits this much below the nominal circle
    groove_depth: float = 1.5
    groove_ramp_frac: float = 0.06
    pattern_phase_deg: float = 7.0

    def __post_init__(self):
        for name in ("shank_length", "shank_diameter", "working_length",
                     "working_diameter", "helix_pitch"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be > 0")
        if self.flute_count < 1:
            raise ConfigurationError("flute_count must be >= 1")
        if self.back_width_deg <= 0 or self.lip_width_deg <= 0:
            raise ConfigurationError("band widths must be > 0")
        if self.back_width_deg + self.lip_width_deg > self.flute_period_deg:
            raise ConfigurationError(
                "back + lip widths must fit within 360/flute_count degrees")
        if not 0 < self.groove_ramp_frac < 0.5:
            raise ConfigurationError("groove_ramp_frac must be in (0, 0.5)")
        if self.lip_drop <= 0 or self.groove_depth <= self.lip_drop:
            raise ConfigurationError("require 0 < lip_drop < groove_depth")
        if self.bend_amplitude < 0:
            raise ConfigurationError("bend_amplitude must be >= 0")
        if self.bend_apex_x is None:
            self.bend_apex_x = self.shank_length + 0.5 * self.working_length
        if not self.shank_length < self.bend_apex_x <= self.total_length:
            raise ConfigurationError("bend_apex_x must lie in the working part")

    @property
    def total_length(self) -> float:
        return self.shank_length + self.working_length

    @property
    def radius(self) -> float:
        return 0.5 * self.working_diameter

    @property
    def shank_radius(self) -> float:
        return 0.5 * self.shank_diameter

    @property
    def flute_period_deg(self) -> float:
        return 360.0 / self.flute_count

    @property
    def true_coaxiality(self) -> float:
        return 2.0 * self.bend_amplitude

    def axis_offset(self, x) -> np.ndarray:
        """Center offset magnitude of the bent axis at axial position x."""
        x = np.asarray(x, dtype=float)
        x0 = self.shank_length
        half = self.bend_apex_x - x0
        u = (x - self.bend_apex_x) / half
        bow = self.bend_amplitude * np.maximum(0.0, 1.0 - u * u)
        return np.where(x <= x0, 0.0, bow)

    def axis_center(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Axis center (y, z) in the drill frame at axial position x."""
        o = self.axis_offset(x)
        phi = math.radians(self.bend_phi_deg)
        return o * math.sin(phi), o * math.cos(phi)


@dataclass
class OcclusionModel:
    """Triangulation visibility constraints."""

    incidence_limit_deg: float = 55.0
    dof_range: tuple[float, float] = (106.5, 200.0)
    fov_range: tuple[float, float] = (0.0, 100.0)

    def __post_init__(self):
        if self.incidence_limit_deg <= 0:
            raise ConfigurationError("incidence_limit_deg must be > 0")
        if self.dof_range[0] >= self.dof_range[1]:
            raise ConfigurationError("dof_range must satisfy near < far")
        if self.fov_range[0] >= self.fov_range[1]:
            raise ConfigurationError("fov_range must satisfy min < max")


@dataclass
class GroundTruth:
    """Per-point truth aligned with the flattened scan, plus the bent axis."""

    spec: DrillSpec
    regions: np.ndarray
    labels: np.ndarray
    pre_noise_depth: np.ndarray
    outlier_mask: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.outlier_mask is None:
            self.outlier_mask = np.zeros(self.labels.size, dtype=bool)

    @property
    def true_coaxiality(self) -> float:
        return self.spec.true_coaxiality

    @property
    def apex_x(self) -> float:
        return self.spec.bend_apex_x

    @property
    def benchmark_center(self) -> tuple[float, float]:
        return (0.0, 0.0)

    def to_json_dict(self) -> dict:
        return {
            "true_coaxiality": self.true_coaxiality,
            "apex_x": self.apex_x,
            "phi": self.spec.bend_phi_deg,
        }


def band_profile(spec: DrillSpec, psi: np.ndarray, x: np.ndarray):
    """Cross-section radius, its angular derivative and the surface region.

    psi is the polar angle about the (offset) section center in radians; x
    the axial position. Returns (r, dr/dpsi in mm/rad, region codes).
    """
    psi = np.asarray(psi, dtype=float)
    x = np.asarray(x, dtype=float)
    r = np.full(np.broadcast(psi, x).shape, spec.shank_radius)
    drdpsi = np.zeros_like(r)
    region = np.full(r.shape, Region.SHANK, dtype=np.int8)

    working = x > spec.shank_length
    if not np.any(working):
        return r, drdpsi, region

    period = spec.flute_period_deg
    helix = 360.0 * (x - spec.shank_length) / spec.helix_pitch
    kappa = np.mod(np.degrees(psi) + helix + spec.pattern_phase_deg, period)

    e1 = spec.back_width_deg
    e2 = e1 + spec.lip_width_deg
    groove_span = period - e2
    ramp = spec.groove_ramp_frac * groove_span
    e3 = e2 + ramp
    e4 = period - ramp

    big_r = spec.radius
    r_lip = big_r - spec.lip_drop
    r_floor = big_r - spec.groove_depth
    deg_per_rad = 180.0 / math.pi

    back = working & (kappa < e1)
    lip = working & (kappa >= e1) & (kappa < e2)
    ramp1 = working & (kappa >= e2) & (kappa < e3)
    floor = working & (kappa >= e3) & (kappa < e4)
    ramp2 = working & (kappa >= e4)

    r[back] = big_r
    region[back] = Region.BACK
    r[lip] = r_lip
    region[lip] = Region.LIP
    # linear ramps: constant steep slope keeps the whole flank beyond the
    # incidence limit instead of easing tangentially into the circles
    if np.any(ramp1):
        t = (kappa[ramp1] - e2) / ramp
        drop = r_lip - r_floor
        r[ramp1] = r_lip - drop * t
        drdpsi[ramp1] = -drop / ramp * deg_per_rad
        region[ramp1] = Region.GROOVE
    r[floor] = r_floor
    region[floor] = Region.GROOVE
    if np.any(ramp2):
        t = (kappa[ramp2] - e4) / ramp
        rise = big_r - r_floor
        r[ramp2] = r_floor + rise * t
        drdpsi[ramp2] = rise / ramp * deg_per_rad
        region[ramp2] = Region.GROOVE
    return r, drdpsi, region


def ray_crossing(spec: DrillSpec, x: np.ndarray, beta: np.ndarray, iterations: int = 4):
    """Nearest surface crossing of the sensor ray at drill-frame angle beta.

    Returns (distance from axis along the ray, polar angle of the crossing
    about the section center, radius, dr/dpsi, region). Entries without a
    surface (x outside the drill) are NaN with region -1.
    """
    x = np.asarray(x, dtype=float)
    beta = np.asarray(beta, dtype=float)
    shape = np.broadcast(x, beta).shape
    x = np.broadcast_to(x, shape)
    beta = np.broadcast_to(beta, shape)

    cy, cz = spec.axis_center(x)
    sin_b, cos_b = np.sin(beta), np.cos(beta)
    c_par = cy * sin_b + cz * cos_b
    c_perp = cy * cos_b - cz * sin_b

    psi = beta.copy()
    r = None
    for _ in range(iterations):
        r, _, _ = band_profile(spec, psi, x)
        s = c_par + np.sqrt(np.maximum(r * r - c_perp * c_perp, 0.0))
        py = s * sin_b - cy
        pz = s * cos_b - cz
        psi = np.arctan2(py, pz)
    r, drdpsi, _ = band_profile(spec, psi, x)
    s = c_par + np.sqrt(np.maximum(r * r - c_perp * c_perp, 0.0))
    # label from the final emitted position, so every point's region matches
    # the analytic surface patch containing it; samples straddling a band
    # step (radius solved on one side, position landing on the other) are
    # edge pixels and get no return
    psi_label = np.arctan2(s * sin_b - cy, s * cos_b - cz)
    r_label, _, region = band_profile(spec, psi_label, x)

    inside = (x >= 0.0) & (x <= spec.total_length)
    # tolerance passes fixed-point residual on continuous ramps but rejects
    # any discrete band step (smallest step is the lip drop, >> 5e-3)
    inside &= np.abs(r_label - r) < 5e-3
    s = np.where(inside, s, np.nan)
    region = np.where(inside, region, -1).astype(np.int8)
    return s, psi, r, drdpsi, region


def analytic_sensor_depth(spec: DrillSpec, axis_distance: float, x, angle_rad):
    """Exact noiseless sensor depth of the surface at a given rotation angle."""
    s, _, _, _, _ = ray_crossing(spec, np.asarray(x, dtype=float), np.asarray(angle_rad, dtype=float))
    return axis_distance - s


def scan_drill(spec: DrillSpec, meta: ScanMeta, occlusion: OcclusionModel | None = None,
               noise_sigma: float = 0.0, seed: int = 0) -> tuple[ScanSet, GroundTruth]:
    """Simulate one full revolution; deterministic for a fixed seed."""
    occlusion = occlusion or OcclusionModel()
    max_reach = max(spec.radius, spec.shank_radius) + spec.bend_amplitude
    if meta.axis_distance <= max_reach:
        raise ConfigurationError(
            f"axis_distance {meta.axis_distance} must exceed drill reach {max_reach}")
    fov_lo, fov_hi = occlusion.fov_range
    if spec.total_length > fov_hi - fov_lo:
        raise SimulationError(
            f"frame 0: drill length {spec.total_length} exceeds the sensor "
            f"field of view [{fov_lo}, {fov_hi}]")

    j = meta.points_per_frame
    x_grid = np.linspace(fov_lo, fov_hi, j)
    cos_limit = math.cos(math.radians(occlusion.incidence_limit_deg))
    ss = np.random.SeedSequence(seed)
    children = ss.spawn(meta.frame_count)

    frames = []
    regions_out = []
    depth_out = []
    for i in range(meta.frame_count):
        beta = TWO_PI * (i / meta.frame_count)
        s, psi, r, drdpsi, region = ray_crossing(spec, x_grid, np.full(j, beta))
        keep = region >= 0
        depth = meta.axis_distance - s
        # visibility: depth of field and incidence limit
        keep &= (depth >= occlusion.dof_range[0]) & (depth <= occlusion.dof_range[1])
        cos_inc = (r * np.cos(psi - beta) + drdpsi * np.sin(psi - beta)) / np.hypot(r, drdpsi)
        keep &= cos_inc >= cos_limit
        if not np.any(keep):
            raise SimulationError(f"frame {i}: no surface returns inside the sensor volume")
        xk = x_grid[keep]
        zk = depth[keep]
        depth_out.append(zk.copy())
        if noise_sigma > 0:
            rng = np.random.default_rng(children[i])
            zk = zk + rng.normal(0.0, noise_sigma, zk.size)
        frames.append(SensorFrame(i, xk, zk))
        regions_out.append(region[keep])

    regions = np.concatenate(regions_out)
    labels = np.array([REGION_TO_LABEL[r] for r in sorted(REGION_TO_LABEL)], dtype=np.int8)[regions]
    truth = GroundTruth(
        spec=spec,
        regions=regions,
        labels=labels,
        pre_noise_depth=np.concatenate(depth_out),
    )
    return ScanSet(frames, meta), truth


def scan_calibration_block(block: CalibrationBlock, meta: ScanMeta,
                           noise_sigma: float = 0.0, seed: int = 0,
                           eccentricity: float = 0.0,
                           eccentric_phase_deg: float = 90.0) -> tuple[ScanSet, float]:
    """Simulate a stepped-shaft calibration scan; returns (scan, true D).

    `eccentricity` offsets the block axis from the turntable axis (mounting
    error); the ladder step is visible as a depth jump in every frame.
    """
    if meta.axis_distance <= block.outer_radius + eccentricity:
        raise ConfigurationError("axis_distance must exceed block reach")
    j = meta.points_per_frame
    x_grid = np.linspace(0.0, block.total_length, j)
    r_x = np.where(
        (x_grid >= block.section_a_length)
        & (x_grid < block.section_a_length + block.neck_length),
        block.neck_radius, block.outer_radius)
    phase = math.radians(eccentric_phase_deg)
    ss = np.random.SeedSequence(seed)
    children = ss.spawn(meta.frame_count)
    frames = []
    for i in range(meta.frame_count):
        beta = TWO_PI * (i / meta.frame_count)
        cy = eccentricity * math.sin(phase)
        cz = eccentricity * math.cos(phase)
        c_par = cy * math.sin(beta) + cz * math.cos(beta)
        c_perp = cy * math.cos(beta) - cz * math.sin(beta)
        s = c_par + np.sqrt(r_x * r_x - c_perp * c_perp)
        z = meta.axis_distance - s
        if noise_sigma > 0:
            rng = np.random.default_rng(children[i])
            z = z + rng.normal(0.0, noise_sigma, z.size)
        frames.append(SensorFrame(i, x_grid.copy(), z))
    return ScanSet(frames, meta), meta.axis_distance


def inject_outliers(scan: ScanSet, truth: GroundTruth, rate: float,
                    magnitude: tuple[float, float] = (0.5, 2.0),
                    seed: int = 0) -> tuple[ScanSet, GroundTruth]:
    """Displace a random fraction of depths by +-U(magnitude); bookkept in truth."""
    if not 0.0 <= rate < 1.0:
        raise ConfigurationError("outlier rate must be in [0, 1)")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(0xB0,)))
    n = scan.total_points()
    hit = rng.random(n) < rate
    offsets = rng.uniform(magnitude[0], magnitude[1], n) * rng.choice((-1.0, 1.0), n)
    frames = []
    pos = 0
    for f in scan.frames:
        m = len(f)
        z = f.z.copy()
        sel = hit[pos:pos + m]
        z[sel] += offsets[pos:pos + m][sel]
        frames.append(SensorFrame(f.index, f.x.copy(), z))
        pos += m
    regions = truth.regions.copy()
    labels = truth.labels.copy()
    regions[hit] = Region.OUTLIER
    labels[hit] = int(PointLabel.OUTLIER)
    new_truth = GroundTruth(
        spec=truth.spec,
        regions=regions,
        labels=labels,
        pre_noise_depth=truth.pre_noise_depth.copy(),
        outlier_mask=truth.outlier_mask | hit,
    )
    return ScanSet(frames, scan.meta), new_truth
