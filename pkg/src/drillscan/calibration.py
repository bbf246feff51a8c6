"""Sensor-pose validation and system-parameter calibration.

A precision stepped shaft (two outer sections joined by a narrower neck) is
scanned for one revolution. Three checks gate the result: the whole block
must be in view, its outline must be straight with evenly spaced reference
markers, and the frame where the block passes closest to the sensor fixes
the sensor-to-axis distance D. Ladder-endpoint depths are compensated by the
known neck radius before the closest-frame average, since the visible
surface is always nearer than the rotation axis by the local block radius.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DegenerateInputError, InsufficientDataError
from .scan import ScanSet


class BoundaryMinimumWarning(UserWarning):
    """The closest-approach minimum sits at the first or last frame, so the
    interior two-sided check cannot be evaluated."""


@dataclass
class CalibrationBlock:
    """Stepped-shaft reference dimensions (lengths of the three sections and
    the two diameters). Machined values are trusted as exact."""

    section_a_length: float = 70.0
    neck_length: float = 10.0
    section_b_length: float = 40.0
    outer_diameter: float = 14.0
    neck_diameter: float = 8.0

    def __post_init__(self):
        for name in ("section_a_length", "neck_length", "section_b_length",
                     "outer_diameter", "neck_diameter"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be > 0")
        if self.neck_diameter >= self.outer_diameter:
            raise ConfigurationError("neck diameter must be smaller than outer diameter")

    @property
    def total_length(self) -> float:
        return self.section_a_length + self.neck_length + self.section_b_length

    @property
    def step_height(self) -> float:
        return 0.5 * (self.outer_diameter - self.neck_diameter)

    @property
    def neck_radius(self) -> float:
        return 0.5 * self.neck_diameter

    @property
    def outer_radius(self) -> float:
        return 0.5 * self.outer_diameter


@dataclass
class CalibrationProbe:
    """Markers from the best frame plus per-frame ladder-endpoint sequences.

    The endpoint sequences are axis-distance estimates (surface depth plus
    the known neck radius), indexed by frame.
    """

    markers: np.ndarray          # (4, 2) rows (x, z) for P_A..P_D
    frame_indices: np.ndarray
    z_b: np.ndarray
    z_c: np.ndarray
    pass_rule_I: bool = True


@dataclass
class RuleIIResult:
    passed: bool
    delta_z: float
    spacing_residual: float


@dataclass
class CalibrationResult:
    axis_distance: float
    best_frame: int
    delta_z: float
    spacing_residual: float
    pass_rule_II: bool
    pass_rule_III: bool
    boundary_warning: bool = False
    local_minima: int = 1
    extras: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "D": self.axis_distance,
            "i_star": self.best_frame,
            "delta_z": self.delta_z,
            "spacing_residual": self.spacing_residual,
            "pass_rule_II": self.pass_rule_II,
            "pass_rule_III": self.pass_rule_III,
            "boundary_warning": self.boundary_warning,
            "local_minima": self.local_minima,
        }


def check_rule_II(markers: np.ndarray, delta_z_threshold: float = 0.039,
                  spacing_tolerance: float = 0.1) -> RuleIIResult:
    """Straight-outline check on the four reference markers.

    Passes iff the three x spacings agree within `spacing_tolerance` and the
    end-to-end outline drop |z_d - z_a| stays within `delta_z_threshold`.
    """
    markers = np.asarray(markers, dtype=float)
    if markers.shape != (4, 2):
        raise DegenerateInputError(f"expected 4 markers, got shape {markers.shape}")
    x = markers[:, 0]
    z = markers[:, 1]
    if np.unique(x).size != 4:
        raise DegenerateInputError("markers must have distinct x coordinates")
    gaps = np.diff(x)
    spacing_residual = float(max(abs(gaps[0] - gaps[1]), abs(gaps[1] - gaps[2])))
    delta_z = float(abs(z[3] - z[0]))
    passed = spacing_residual <= spacing_tolerance and delta_z <= delta_z_threshold
    return RuleIIResult(passed, delta_z, spacing_residual)


def count_local_minima(sums: np.ndarray) -> int:
    """Strict interior local minima of a sequence."""
    if sums.size < 3:
        return 0
    inner = sums[1:-1]
    return int(np.count_nonzero((inner < sums[:-2]) & (inner < sums[2:])))


def locate_closest_frame(z_b: np.ndarray, z_c: np.ndarray) -> int:
    """Frame index minimizing z_b + z_c (the closest approach to the sensor).

    Ties resolve to the smallest index. A global minimum on the sequence
    boundary cannot satisfy the two-sided neighbor check and raises
    BoundaryMinimumWarning.
    """
    z_b = np.asarray(z_b, dtype=float)
    z_c = np.asarray(z_c, dtype=float)
    if z_b.size == 0 or z_c.size == 0:
        raise InsufficientDataError("endpoint sequences must be nonempty")
    if z_b.shape != z_c.shape:
        raise ConfigurationError("endpoint sequences must be aligned and equal length")
    sums = z_b + z_c
    i_star = int(np.argmin(sums))
    if i_star in (0, sums.size - 1):
        warnings.warn(
            f"closest-approach minimum at sequence boundary (index {i_star})",
            BoundaryMinimumWarning,
            stacklevel=2,
        )
    return i_star


def solve_D(z_b: np.ndarray, z_c: np.ndarray,
            rule_ii: RuleIIResult | None = None) -> CalibrationResult:
    """Average the two ladder-endpoint estimates at the closest frame.

    D = (z_b[i*] + z_c[i*]) / 2. Swapping the two sequences leaves D
    unchanged; adding a constant to all entries shifts D by that constant.
    """
    z_b = np.asarray(z_b, dtype=float)
    z_c = np.asarray(z_c, dtype=float)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", BoundaryMinimumWarning)
        i_star = locate_closest_frame(z_b, z_c)
    boundary = any(issubclass(w.category, BoundaryMinimumWarning) for w in caught)
    for w in caught:
        warnings.warn_explicit(w.message, w.category, w.filename, w.lineno)
    sums = z_b + z_c
    d = float(0.5 * (z_b[i_star] + z_c[i_star]))
    interior = not boundary and sums.size >= 3
    strict_min = bool(
        interior
        and sums[i_star] < sums[i_star - 1]
        and sums[i_star] < sums[i_star + 1]
    )
    minima = count_local_minima(sums)
    if rule_ii is None:
        rule_ii = RuleIIResult(True, float("nan"), float("nan"))
    return CalibrationResult(
        axis_distance=d,
        best_frame=i_star,
        delta_z=rule_ii.delta_z,
        spacing_residual=rule_ii.spacing_residual,
        pass_rule_II=rule_ii.passed,
        pass_rule_III=strict_min,
        boundary_warning=boundary,
        local_minima=minima,
    )


def extract_probe(scan: ScanSet, block: CalibrationBlock,
                  jump_threshold: float | None = None,
                  plateau_width: float = 2.0,
                  edge_margin: float = 0.2) -> CalibrationProbe:
    """Locate the ladder in every frame and build the endpoint sequences.

    The two largest |dz| jumps along x mark the neck edges. The endpoint
    depth on each side is the median of the neck samples adjacent to the
    edge (robust against edge fliers), compensated by the neck radius so the
    sequence estimates the sensor-to-axis distance directly. Markers P_A..P_D
    are evenly spaced around the neck, P_B and P_C on the ladder edges.
    """
    if jump_threshold is None:
        jump_threshold = 0.5 * block.step_height
    idx_list, zb_list, zc_list = [], [], []
    markers = None
    rule_i = True
    for f in scan.frames:
        if len(f) < 8:
            continue
        dz = np.abs(np.diff(f.z))
        jumps = np.flatnonzero(dz > jump_threshold)
        if jumps.size < 2:
            raise DegenerateInputError(
                f"frame {f.index}: ladder not resolvable "
                f"({jumps.size} depth jumps above {jump_threshold:.3f})"
            )
        if jumps.size > 2:
            jumps = np.sort(jumps[np.argsort(dz[jumps])[-2:]])
        j1, j2 = int(jumps[0]), int(jumps[1])
        x_b = 0.5 * (f.x[j1] + f.x[j1 + 1])
        x_c = 0.5 * (f.x[j2] + f.x[j2 + 1])
        neck = slice(j1 + 1, j2 + 1)
        nx, nz = f.x[neck], f.z[neck]
        left = nz[(nx >= x_b + edge_margin) & (nx <= x_b + edge_margin + plateau_width)]
        right = nz[(nx <= x_c - edge_margin) & (nx >= x_c - edge_margin - plateau_width)]
        if left.size == 0 or right.size == 0:
            raise DegenerateInputError(f"frame {f.index}: neck plateau too narrow to sample")
        zb_list.append(float(np.median(left)) + block.neck_radius)
        zc_list.append(float(np.median(right)) + block.neck_radius)
        idx_list.append(f.index)
        if markers is None:
            spacing = x_c - x_b
            xs = np.array([x_b - spacing, x_b, x_c, x_c + spacing])
            zs = np.array([
                f.z[np.argmin(np.abs(f.x - xs[0]))],
                f.z[j1],
                f.z[j2 + 1],
                f.z[np.argmin(np.abs(f.x - xs[3]))],
            ])
            markers = np.column_stack([xs, zs])
            rule_i = bool(xs[0] > f.x[0] and xs[3] < f.x[-1])
    if not idx_list:
        raise InsufficientDataError("no usable calibration frames")
    return CalibrationProbe(
        markers=markers,
        frame_indices=np.asarray(idx_list, dtype=np.int64),
        z_b=np.asarray(zb_list),
        z_c=np.asarray(zc_list),
        pass_rule_I=rule_i,
    )


def calibrate(scan: ScanSet, block: CalibrationBlock | None = None,
              delta_z_threshold: float = 0.039,
              spacing_tolerance: float = 0.1) -> CalibrationResult:
    """Full calibration: probe extraction, Rule II check, closest-frame solve."""
    block = block or CalibrationBlock()
    probe = extract_probe(scan, block)
    rule_ii = check_rule_II(probe.markers, delta_z_threshold, spacing_tolerance)
    result = solve_D(probe.z_b, probe.z_c, rule_ii)
    result.extras["pass_rule_I"] = probe.pass_rule_I
    return result
