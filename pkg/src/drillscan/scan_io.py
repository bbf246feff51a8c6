"""File formats: scan CSV, key=value metadata sidecar, label/truth exports.

Scan CSV: header ``frame,x,z``, one row per sample, frames contiguous and
ascending. Metadata sidecar: ``key=value`` lines with keys ``frame_count,
points_per_frame, axis_distance_D, gamma``.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import ConfigurationError
from .scan import LABEL_CODES, LABEL_NAMES, ScanMeta, ScanSet, SensorFrame


class ScanParseError(ConfigurationError):
    """Scan file is malformed; carries the offending 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


def read_key_value_file(path) -> dict[str, str]:
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ScanParseError(f"expected key=value, got {line!r}", lineno)
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    return values


def write_key_value_file(path, values: dict) -> None:
    lines = [f"{k}={v}" for k, v in values.items()]
    Path(path).write_text("\n".join(lines) + "\n")


def read_scan_meta(path) -> ScanMeta:
    raw = read_key_value_file(path)
    try:
        return ScanMeta(
            frame_count=int(raw["frame_count"]),
            points_per_frame=int(raw["points_per_frame"]),
            axis_distance=float(raw["axis_distance_D"]),
            gamma=float(raw["gamma"]),
        )
    except KeyError as exc:
        raise ScanParseError(f"metadata sidecar missing key {exc}") from exc
    except ValueError as exc:
        raise ScanParseError(f"metadata sidecar: {exc}") from exc


def write_scan_meta(path, meta: ScanMeta) -> None:
    write_key_value_file(path, {
        "frame_count": meta.frame_count,
        "points_per_frame": meta.points_per_frame,
        "axis_distance_D": repr(meta.axis_distance),
        "gamma": repr(meta.gamma),
    })


def read_scan_csv(path, meta: ScanMeta) -> ScanSet:
    """Read a scan CSV into frames. Frames must be contiguous ascending."""
    try:
        df = pd.read_csv(path)
    except (pd.errors.ParserError, UnicodeDecodeError) as exc:
        raise ScanParseError(str(exc)) from exc
    expected = ["frame", "x", "z"]
    if list(df.columns[:3]) != expected:
        raise ScanParseError(f"expected header {','.join(expected)}, got {','.join(map(str, df.columns))}", 1)
    frame = df["frame"].to_numpy()
    if frame.size and np.any(np.diff(frame) < 0):
        bad = int(np.argmax(np.diff(frame) < 0)) + 3  # +1 diff offset, +1 header, +1 1-based
        raise ScanParseError("frame indices must be ascending", bad)
    x = df["x"].to_numpy(dtype=float)
    z = df["z"].to_numpy(dtype=float)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(z))):
        bad = int(np.argmax(~(np.isfinite(x) & np.isfinite(z)))) + 2
        raise ScanParseError("non-finite sample", bad)
    frames = []
    for idx in np.unique(frame):
        sel = frame == idx
        frames.append(SensorFrame(int(idx), x[sel], z[sel]))
    return ScanSet(frames, meta)


def write_scan_csv(path, scan: ScanSet) -> None:
    n = scan.total_points()
    frame = np.empty(n, dtype=np.int64)
    x = np.empty(n)
    z = np.empty(n)
    pos = 0
    for f in scan.frames:
        m = len(f)
        frame[pos:pos + m] = f.index
        x[pos:pos + m] = f.x
        z[pos:pos + m] = f.z
        pos += m
    pd.DataFrame({"frame": frame, "x": x, "z": z}).to_csv(path, index=False)


def write_labeled_csv(path, scan: ScanSet, labels: np.ndarray) -> None:
    """Labeled sample export: ``frame,x,z,label`` with symbolic labels."""
    n = scan.total_points()
    if labels.shape[0] != n:
        raise ConfigurationError("label array length does not match scan size")
    frame = np.empty(n, dtype=np.int64)
    x = np.empty(n)
    z = np.empty(n)
    pos = 0
    for f in scan.frames:
        m = len(f)
        frame[pos:pos + m] = f.index
        x[pos:pos + m] = f.x
        z[pos:pos + m] = f.z
        pos += m
    names = np.array([LABEL_NAMES[c] for c in sorted(LABEL_NAMES)], dtype=object)
    pd.DataFrame({"frame": frame, "x": x, "z": z, "label": names[labels]}).to_csv(path, index=False)


def read_labeled_csv(path) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Returns (frame, x, z, label-codes) arrays from a labeled CSV."""
    df = pd.read_csv(path)
    codes = df["label"].map(LABEL_CODES)
    if codes.isna().any():
        bad = int(codes.isna().idxmax()) + 2
        raise ScanParseError(f"unknown label {df['label'][codes.isna().idxmax()]!r}", bad)
    return (
        df["frame"].to_numpy(dtype=np.int64),
        df["x"].to_numpy(dtype=float),
        df["z"].to_numpy(dtype=float),
        codes.to_numpy(dtype=np.int8),
    )


def write_json(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=False) + "\n")


def read_json(path) -> dict:
    return json.loads(Path(path).read_text())
