"""Measurement-uncertainty budget and tolerance-ratio check.

The radius uncertainty combines the sensor repeatability and the turntable
eccentricity twice (once through calibration, once through measurement) plus
a running-angle term that is negligible in practice. The ratio of that
uncertainty to the coaxiality tolerance band of the part decides whether the
instrument is adequate for a given drill geometry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigurationError


@dataclass
class UncertaintyBudget:
    sensor_repeatability: float   # mm
    eccentricity: float           # mm
    running_angle_term: float     # mm
    calibration_uncertainty: float  # mm
    point_uncertainty: float      # mm
    radius_uncertainty: float     # mm
    tolerance_range: float        # mm
    epsilon: float                # ratio
    radius_over_length: float     # geometric condition, reported not enforced

    def to_json_dict(self) -> dict:
        return {
            "delta_z": self.sensor_repeatability,
            "delta_c": self.eccentricity,
            "delta_eta": self.running_angle_term,
            "delta_D": self.calibration_uncertainty,
            "delta_z_p": self.point_uncertainty,
            "delta_R": self.radius_uncertainty,
            "C_s": self.tolerance_range,
            "epsilon": self.epsilon,
            "radius_over_length": self.radius_over_length,
        }


ANGLE_ACCURACY_DEG = 0.001


def budget(sensor_repeatability: float, eccentricity: float, radius: float,
           length: float, diameter: float) -> UncertaintyBudget:
    """Assemble the uncertainty budget for a drill of the given geometry.

    All length inputs in mm and strictly positive. The tolerance range is
    0.03 + 0.01 * (length / diameter).
    """
    for name, v in (("sensor_repeatability", sensor_repeatability),
                    ("eccentricity", eccentricity), ("radius", radius),
                    ("length", length), ("diameter", diameter)):
        if v < 0 or name in ("radius", "length", "diameter") and v <= 0:
            raise ConfigurationError(f"{name} must be positive, got {v}")
    delta_eta = radius * (1.0 - math.cos(math.radians(ANGLE_ACCURACY_DEG)))
    delta_d = sensor_repeatability + eccentricity
    delta_zp = sensor_repeatability + eccentricity
    delta_r = delta_d + delta_zp + delta_eta
    tolerance = 0.03 + 0.01 * (length / diameter)
    return UncertaintyBudget(
        sensor_repeatability=sensor_repeatability,
        eccentricity=eccentricity,
        running_angle_term=delta_eta,
        calibration_uncertainty=delta_d,
        point_uncertainty=delta_zp,
        radius_uncertainty=delta_r,
        tolerance_range=tolerance,
        epsilon=delta_r / tolerance,
        radius_over_length=radius / length,
    )


def within_spec(b: UncertaintyBudget, max_ratio: float = 0.20) -> bool:
    """True iff the uncertainty ratio stays within the target (inclusive)."""
    return b.epsilon <= max_ratio
