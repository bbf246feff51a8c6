"""Scan data model and coordinate transformations.

A scan is an ordered set of sensor frames, one per encoder trigger over a
full revolution. Each frame holds (x, z) samples in the sensor plane: x runs
along the laser line (axial direction), z is the measured distance from the
sensor. Two transforms are provided: the polar reconstruction into the
turntable (measurement) frame, and the cylindrical unroll that maps rotation
phase to a linear coordinate for grid-based processing. All lengths are in
millimeters; angles are handled in radians internally.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .errors import ConfigurationError

TWO_PI = 2.0 * np.pi


class PointLabel(IntEnum):
    UNLABELED = 0
    BLADE_BACK = 1
    BACKGROUND = 2
    OUTLIER = 3


LABEL_NAMES = {
    PointLabel.UNLABELED: "unlabeled",
    PointLabel.BLADE_BACK: "blade_back",
    PointLabel.BACKGROUND: "background",
    PointLabel.OUTLIER: "outlier",
}
LABEL_CODES = {name: code for code, name in LABEL_NAMES.items()}


@dataclass
class SensorFrame:
    """One triggered profile: trigger ordinal plus (x, z) samples.

    Samples are kept sorted by ascending x. Dropped returns are simply
    absent; frames may be ragged.
    """

    index: int
    x: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.z = np.asarray(self.z, dtype=float)
        if self.index < 0:
            raise ConfigurationError(f"frame index must be >= 0, got {self.index}")
        if self.x.shape != self.z.shape:
            raise ConfigurationError("x and z sample arrays must have equal length")
        if self.x.size > 1 and np.any(np.diff(self.x) < 0):
            order = np.argsort(self.x, kind="stable")
            self.x = self.x[order]
            self.z = self.z[order]

    def __len__(self):
        return self.x.size


@dataclass
class ScanMeta:
    """Acquisition metadata: trigger count, nominal samples per frame,
    calibrated sensor-to-axis distance and the unroll coefficient."""

    frame_count: int
    points_per_frame: int
    axis_distance: float
    gamma: float

    def __post_init__(self):
        if self.frame_count < 4:
            raise ConfigurationError(f"frame_count must be >= 4, got {self.frame_count}")
        if self.axis_distance <= 0:
            raise ConfigurationError(f"axis_distance must be > 0, got {self.axis_distance}")
        if self.gamma <= 0:
            raise ConfigurationError(f"gamma must be > 0, got {self.gamma}")


@dataclass
class ScanSet:
    """Ordered frames for one full revolution plus metadata."""

    frames: list[SensorFrame]
    meta: ScanMeta

    def __len__(self):
        return len(self.frames)

    def total_points(self) -> int:
        return int(sum(len(f) for f in self.frames))


@dataclass
class MeasurementCloud:
    """3-D points in the turntable frame with per-point source frame and label.

    The (y, z) of a point from frame i lies on the ray at angle theta_i from
    the turntable axis; x is the axial coordinate.
    """

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    frame_index: np.ndarray
    label: np.ndarray = field(default=None)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        self.z = np.asarray(self.z, dtype=float)
        self.frame_index = np.asarray(self.frame_index, dtype=np.int64)
        if self.label is None:
            self.label = np.full(self.x.size, int(PointLabel.UNLABELED), dtype=np.int8)
        else:
            self.label = np.asarray(self.label, dtype=np.int8)

    def __len__(self):
        return self.x.size

    def radius(self) -> np.ndarray:
        """Radial distance from the turntable axis."""
        return np.hypot(self.y, self.z)

    def sensor_depth(self, axis_distance: float) -> np.ndarray:
        """Depth re-expressed in the sensor convention (distance from sensor)."""
        return axis_distance - self.radius()

    def select(self, mask: np.ndarray) -> "MeasurementCloud":
        return MeasurementCloud(
            self.x[mask], self.y[mask], self.z[mask],
            self.frame_index[mask], self.label[mask],
        )


@dataclass
class UnrolledCloud:
    """Cylindrical unroll of a scan: x unchanged, y proportional to rotation
    phase, z the raw sensor depth."""

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    frame_index: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        self.z = np.asarray(self.z, dtype=float)
        self.frame_index = np.asarray(self.frame_index, dtype=np.int64)

    def __len__(self):
        return self.x.size

    def select(self, mask: np.ndarray) -> "UnrolledCloud":
        return UnrolledCloud(self.x[mask], self.y[mask], self.z[mask], self.frame_index[mask])


def frame_angles(meta: ScanMeta) -> np.ndarray:
    """Rotation angle (radians) of each frame: 2*pi * i / I."""
    i = np.arange(meta.frame_count, dtype=float)
    return TWO_PI * (i / meta.frame_count)


def to_measurement_frame(frame: SensorFrame, meta: ScanMeta) -> np.ndarray:
    """Transform one frame's samples into the measurement frame.

    theta_i = 2*pi*i/I; x' = x; y' = (D - z) sin theta; z' = (D - z) cos theta.
    Returns an (n, 3) array of (x', y', z').
    """
    if meta.frame_count <= 0:
        raise ConfigurationError("frame_count must be positive")
    if meta.axis_distance <= 0:
        raise ConfigurationError("axis_distance must be positive")
    theta = TWO_PI * (frame.index / meta.frame_count)
    r = meta.axis_distance - frame.z
    out = np.empty((frame.x.size, 3), dtype=float)
    out[:, 0] = frame.x
    out[:, 1] = r * np.sin(theta)
    out[:, 2] = r * np.cos(theta)
    return out


def _flatten(scan: ScanSet) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Concatenate all frames preserving frame order: (x, z, frame_index)."""
    sizes = np.array([len(f) for f in scan.frames], dtype=np.int64)
    x = np.concatenate([f.x for f in scan.frames]) if scan.frames else np.empty(0)
    z = np.concatenate([f.z for f in scan.frames]) if scan.frames else np.empty(0)
    fi = np.repeat(np.array([f.index for f in scan.frames], dtype=np.int64), sizes)
    return x, z, fi


def scan_to_measurement_cloud(scan: ScanSet, labels: np.ndarray | None = None) -> MeasurementCloud:
    """Transform a whole scan. `labels` (flattened frame order) is optional."""
    meta = scan.meta
    if meta.frame_count <= 0 or meta.axis_distance <= 0:
        raise ConfigurationError("invalid scan metadata")
    x, z, fi = _flatten(scan)
    theta = TWO_PI * (fi.astype(float) / meta.frame_count)
    r = meta.axis_distance - z
    lab = None if labels is None else np.asarray(labels, dtype=np.int8)
    return MeasurementCloud(x, r * np.sin(theta), r * np.cos(theta), fi, lab)


def unroll(scan: ScanSet) -> UnrolledCloud:
    """Unroll a scan: x'' = x, y'' = 2*pi*gamma*i/I, z'' = z.

    Frame ordering is preserved; distinct frame indices map to distinct y''.
    """
    meta = scan.meta
    if meta.gamma <= 0:
        raise ConfigurationError("gamma must be positive")
    x, z, fi = _flatten(scan)
    y = TWO_PI * meta.gamma * (fi.astype(float) / meta.frame_count)
    return UnrolledCloud(x, y, z, fi)


def unroll_y(index: int | np.ndarray, meta: ScanMeta) -> float | np.ndarray:
    """y'' coordinate of a frame index under the unroll transform."""
    return TWO_PI * meta.gamma * (np.asarray(index, dtype=float) / meta.frame_count)


def passthrough_filter(cloud, axis: str, lo: float, hi: float):
    """Straight-through filter: keep points with lo <= coordinate <= hi.

    Works on UnrolledCloud or MeasurementCloud; order preserved; idempotent.
    """
    if lo >= hi:
        raise ConfigurationError(f"passthrough bounds require min < max, got [{lo}, {hi}]")
    if axis not in ("x", "y", "z"):
        raise ConfigurationError(f"axis must be one of x/y/z, got {axis!r}")
    coord = getattr(cloud, axis)
    mask = (coord >= lo) & (coord <= hi)
    return cloud.select(mask)
