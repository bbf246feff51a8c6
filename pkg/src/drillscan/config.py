"""Pipeline configuration: defaults, key=value files, environment overrides.

Config files use one ``key=value`` per line (same syntax as the scan
metadata sidecar). Environment variables prefixed ``DRILLSCAN_`` override
file values; explicit keyword overrides win over both. Every field is
validated against the consuming module's preconditions at construction.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields

from .errors import ConfigurationError
from .scan_io import read_key_value_file

ENV_PREFIX = "DRILLSCAN_"


@dataclass
class PipelineConfig:
    # system parameter: either a calibrated distance or a calibration scan to solve it from
    axis_distance: float | None = None
    calibration_scan: str | None = None
    calibration_delta_z_threshold: float = 0.039
    calibration_spacing_tolerance: float = 0.1

    # preprocessing
    gamma: float = 5.0
    z_filter_min: float | None = None
    z_filter_max: float | None = None

    # segmentation grid and mixture solve
    blocks_axial: int = 1
    blocks_around: int = 4
    patches_axial: int = 320
    patches_around: int = 128
    bin_width: float = 0.039
    em_tol: float = 1e-8
    em_max_iter: int = 200
    sor_neighbors: int = 8
    sor_std: float = 3.0

    # axis reconstruction
    theta_deg: float = 0.0
    profile_window_frames: int = 2
    profile_widen: float = 2.0
    delta_zs: float = 0.01
    shank_min: float = 5.0
    shank_max: float = 30.0
    benchmark_sections: int = 5
    section_half_width: float = 0.4
    max_sections: int = 25

    # uncertainty budget inputs
    uncertainty_dz: float = 0.003
    uncertainty_dc: float = 0.005
    drill_length: float = 100.0
    drill_diameter: float = 10.0

    seed: int = 0

    def __post_init__(self):
        if self.axis_distance is not None and self.axis_distance <= 0:
            raise ConfigurationError("axis_distance must be > 0")
        if self.gamma <= 0:
            raise ConfigurationError("gamma must be > 0")
        if (self.z_filter_min is None) != (self.z_filter_max is None):
            raise ConfigurationError("z_filter_min and z_filter_max must be set together")
        if self.z_filter_min is not None and self.z_filter_min >= self.z_filter_max:
            raise ConfigurationError("z_filter_min must be < z_filter_max")
        if min(self.blocks_axial, self.blocks_around,
               self.patches_axial, self.patches_around) < 1:
            raise ConfigurationError("grid counts must be >= 1")
        if self.bin_width <= 0:
            raise ConfigurationError("bin_width must be > 0")
        if self.em_tol <= 0 or self.em_max_iter < 1:
            raise ConfigurationError("em_tol must be > 0 and em_max_iter >= 1")
        if self.sor_neighbors < 1 or self.sor_std <= 0:
            raise ConfigurationError("sor_neighbors >= 1 and sor_std > 0 required")
        if self.profile_window_frames < 1 or self.profile_widen < 1.0:
            raise ConfigurationError("profile window parameters out of range")
        if self.delta_zs < 0:
            raise ConfigurationError("delta_zs must be >= 0")
        if self.shank_min >= self.shank_max:
            raise ConfigurationError("shank_min must be < shank_max")
        if self.benchmark_sections < 1 or self.max_sections < 1:
            raise ConfigurationError("section counts must be >= 1")
        if self.section_half_width <= 0:
            raise ConfigurationError("section_half_width must be > 0")
        if self.uncertainty_dz < 0 or self.uncertainty_dc < 0:
            raise ConfigurationError("uncertainty inputs must be >= 0")
        if self.drill_length <= 0 or self.drill_diameter <= 0:
            raise ConfigurationError("drill geometry must be > 0")


_FIELD_TYPES = {f.name: f.type for f in fields(PipelineConfig)}


def _coerce(name: str, raw: str):
    text = raw.strip()
    if text.lower() in ("none", ""):
        return None
    ftype = _FIELD_TYPES.get(name, "str")
    if "int" in ftype and "float" not in ftype:
        return int(text)
    if "float" in ftype:
        return float(text)
    return text


def load_config(path=None, overrides: dict | None = None,
                environ: dict | None = None) -> PipelineConfig:
    """Build a config from an optional file, the environment, and overrides
    (in increasing precedence)."""
    values: dict = {}
    if path is not None:
        for key, raw in read_key_value_file(path).items():
            if key not in _FIELD_TYPES:
                raise ConfigurationError(f"unknown config key {key!r}")
            values[key] = _coerce(key, raw)
    env = os.environ if environ is None else environ
    for key in _FIELD_TYPES:
        env_key = ENV_PREFIX + key.upper()
        if env_key in env:
            values[key] = _coerce(key, env[env_key])
    for key, val in (overrides or {}).items():
        if key not in _FIELD_TYPES:
            raise ConfigurationError(f"unknown config key {key!r}")
        values[key] = _coerce(key, val) if isinstance(val, str) else val
    return PipelineConfig(**values)
