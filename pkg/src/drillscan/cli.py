"""Command-line interface.

Subcommands: ``calibrate`` (solve the system distance from a block scan),
``measure`` (full coaxiality pipeline), ``simulate`` (synthetic scans with
ground truth), ``segment`` (blade-back extraction only, for debugging
grid sweeps). Exit codes: 0 success, 1 measurement-domain failure, 2
I/O-or-parse failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .calibration import CalibrationBlock, calibrate
from .config import PipelineConfig, load_config
from .errors import ConfigurationError, DrillScanError
from .pipeline import MeasureResult, measure_scan
from .scan import LABEL_NAMES, PointLabel, ScanMeta
from .scan_io import (
    ScanParseError,
    read_key_value_file,
    read_scan_csv,
    read_scan_meta,
    write_json,
    write_labeled_csv,
    write_scan_csv,
    write_scan_meta,
)
from .segmentation import segment_cloud
from .simulator import DrillSpec, OcclusionModel, scan_drill
from .scan import unroll

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_MEASUREMENT = 1
EXIT_IO = 2

_HINTS = {
    "ConfigurationError": "check the config file / --set overrides against the documented ranges",
    "DataDeficiencyError": "verify the scan covers a full revolution or widen profile_window_frames",
    "DegenerateInputError": "the input geometry is degenerate; inspect the scan",
    "InsufficientDataError": "not enough samples; increase scan density or section width",
    "ProfileRangeError": "profiles do not overlap; check theta_deg and scan coverage",
    "NumericFailureError": "numeric failure; try a larger bin_width or em_tol",
    "SimulationError": "the part does not fit the sensor volume; adjust the spec or occlusion model",
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="drillscan",
        description="Coaxiality measurement of twist drills from rotating line-laser scans.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log pipeline progress")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", type=Path, default=None, help="key=value config file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       dest="overrides", help="override a config key (repeatable)")

    p_cal = sub.add_parser("calibrate", help="solve the sensor-to-axis distance from a block scan")
    p_cal.add_argument("scan", type=Path)
    p_cal.add_argument("--meta", type=Path, default=None, help="metadata sidecar (default: <scan>.meta)")
    p_cal.add_argument("--out", type=Path, default=Path("calibration.json"))
    add_common(p_cal)

    p_meas = sub.add_parser("measure", help="measure coaxiality from a drill scan")
    p_meas.add_argument("scan", type=Path)
    p_meas.add_argument("--meta", type=Path, default=None)
    p_meas.add_argument("--out", type=Path, default=Path("measurement"),
                        help="output directory for the report and plot CSVs")
    add_common(p_meas)

    p_sim = sub.add_parser("simulate", help="generate a synthetic scan with ground truth")
    p_sim.add_argument("spec", type=Path, help="key=value drill spec file")
    p_sim.add_argument("--out", type=Path, default=Path("simulated"))
    add_common(p_sim)

    p_seg = sub.add_parser("segment", help="run blade-back segmentation only")
    p_seg.add_argument("scan", type=Path)
    p_seg.add_argument("--meta", type=Path, default=None)
    p_seg.add_argument("--out", type=Path, default=Path("segmentation"))
    add_common(p_seg)
    return parser


def _config_from_args(args) -> PipelineConfig:
    overrides = {}
    for item in args.overrides:
        if "=" not in item:
            raise ConfigurationError(f"--set expects KEY=VALUE, got {item!r}")
        key, _, value = item.partition("=")
        overrides[key.strip()] = value.strip()
    return load_config(args.config, overrides)


def _meta_path(scan: Path, explicit: Path | None) -> Path:
    return explicit if explicit is not None else scan.with_suffix(scan.suffix + ".meta")


def _load_scan(scan_path: Path, meta_path: Path, config: PipelineConfig):
    meta = read_scan_meta(meta_path)
    if config.axis_distance is not None:
        meta.axis_distance = config.axis_distance
    meta.gamma = config.gamma
    return read_scan_csv(scan_path, meta)


def _resolve_axis_distance(config: PipelineConfig) -> float:
    if config.axis_distance is not None:
        return config.axis_distance
    if config.calibration_scan is None:
        raise ConfigurationError(
            "no calibrated distance: set axis_distance or calibration_scan")
    cal_path = Path(config.calibration_scan)
    scan = _load_calibration_scan(cal_path, config)
    result = calibrate(scan, CalibrationBlock(),
                       config.calibration_delta_z_threshold,
                       config.calibration_spacing_tolerance)
    logger.info("calibrated axis distance %.4f mm (frame %d)",
                result.axis_distance, result.best_frame)
    return result.axis_distance


def _load_calibration_scan(scan_path: Path, config: PipelineConfig):
    meta = read_scan_meta(_meta_path(scan_path, None))
    return read_scan_csv(scan_path, meta)


def cmd_calibrate(args) -> int:
    config = _config_from_args(args)
    meta = read_scan_meta(_meta_path(args.scan, args.meta))
    scan = read_scan_csv(args.scan, meta)
    result = calibrate(scan, CalibrationBlock(),
                       config.calibration_delta_z_threshold,
                       config.calibration_spacing_tolerance)
    write_json(args.out, result.to_json_dict())
    print(f"D = {result.axis_distance:.6f} mm (frame {result.best_frame}), "
          f"rule II {'pass' if result.pass_rule_II else 'FAIL'} "
          f"(delta_z = {result.delta_z:.6f}), "
          f"rule III {'pass' if result.pass_rule_III else 'FAIL'}")
    if not (result.pass_rule_II and result.pass_rule_III):
        return EXIT_MEASUREMENT
    return EXIT_OK


def _write_deviation_csv(path: Path, profile) -> None:
    pd.DataFrame({"x": profile.x, "z": profile.values}).to_csv(path, index=False)


def _write_measure_outputs(out_dir: Path, result: MeasureResult) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    write_json(out_dir / "report.json", result.report.to_json_dict())
    for prof in result.profiles:
        pd.DataFrame({"x": prof.x, "z": prof.z}).to_csv(
            out_dir / f"profile_{int(round(prof.angle_deg)) % 360:03d}.csv", index=False)
    _write_deviation_csv(out_dir / "absv.csv", result.absv)
    _write_deviation_csv(out_dir / "absh.csv", result.absh)
    _write_deviation_csv(out_dir / "squabs.csv", result.squabs)
    rows = []
    for s in result.report.sections:
        rows.append(pd.DataFrame({
            "section_x": np.full(s.n_points, s.x_position),
            "y": s.points_y,
            "z": s.points_z,
        }))
    if rows:
        pd.concat(rows, ignore_index=True).to_csv(out_dir / "sections_points.csv", index=False)
    pd.DataFrame([
        {
            "x": s.x_position,
            "center_y": s.center[0],
            "center_z": s.center[1],
            "radius": s.radius,
            "residual": s.residual,
            "distance": d,
        }
        for s, d in zip(result.report.sections, result.report.section_distances)
    ]).to_csv(out_dir / "sections_fit.csv", index=False)


def cmd_measure(args) -> int:
    config = _config_from_args(args)
    meta = read_scan_meta(_meta_path(args.scan, args.meta))
    scan = read_scan_csv(args.scan, meta)
    meta.axis_distance = _resolve_axis_distance(config)
    meta.gamma = config.gamma
    result = measure_scan(scan, config)
    _write_measure_outputs(args.out, result)
    rep = result.report
    print(f"coaxiality C_e = {rep.coaxiality:.4f} mm "
          f"({rep.coaxiality * 1000.0:.1f} um), "
          f"{len(rep.sections)} sections at x ~ {rep.xsm[len(rep.xsm) // 2]:.2f} mm, "
          f"epsilon = {rep.epsilon:.4f}, {rep.duration_s:.2f} s")
    return EXIT_OK


def cmd_segment(args) -> int:
    config = _config_from_args(args)
    meta = read_scan_meta(_meta_path(args.scan, args.meta))
    if config.axis_distance is not None:
        meta.axis_distance = config.axis_distance
    meta.gamma = config.gamma
    scan = read_scan_csv(args.scan, meta)
    unrolled = unroll(scan)
    seg = segment_cloud(
        unrolled,
        block_counts=(config.blocks_axial, config.blocks_around),
        patch_counts=(config.patches_axial, config.patches_around),
        bin_width=config.bin_width,
        em_tol=config.em_tol,
        em_max_iter=config.em_max_iter,
    )
    args.out.mkdir(parents=True, exist_ok=True)
    write_labeled_csv(args.out / "labels.csv", scan, seg.point_labels)
    write_json(args.out / "model.json",
               seg.model.to_json_dict(iterations=seg.iterations, loglik=seg.loglik))
    counts = {LABEL_NAMES[PointLabel(c)]: int(n) for c, n in
              zip(*np.unique(seg.point_labels, return_counts=True))}
    print(f"segmented {len(unrolled)} points: {counts}; "
          f"converged={seg.converged} after {seg.iterations} iterations")
    return EXIT_OK


_SPEC_KEYS = {f.name for f in DrillSpec.__dataclass_fields__.values()}
_SCAN_KEYS = {"frame_count", "points_per_frame", "noise_sigma"}


def cmd_simulate(args) -> int:
    config = _config_from_args(args)
    raw = read_key_value_file(args.spec)
    unknown = set(raw) - _SPEC_KEYS - _SCAN_KEYS
    if unknown:
        raise ConfigurationError(f"unknown drill spec keys: {sorted(unknown)}")
    spec_kwargs = {}
    for key, value in raw.items():
        if key in _SPEC_KEYS:
            spec_kwargs[key] = int(value) if key == "flute_count" else float(value)
    spec = DrillSpec(**spec_kwargs)
    meta = ScanMeta(
        frame_count=int(raw.get("frame_count", 1000)),
        points_per_frame=int(raw.get("points_per_frame", 1350)),
        axis_distance=config.axis_distance if config.axis_distance is not None else 150.0,
        gamma=config.gamma,
    )
    noise = float(raw.get("noise_sigma", 0.0))
    scan, truth = scan_drill(spec, meta, OcclusionModel(), noise_sigma=noise, seed=config.seed)
    args.out.mkdir(parents=True, exist_ok=True)
    write_scan_csv(args.out / "scan.csv", scan)
    write_scan_meta(args.out / "scan.csv.meta", meta)
    write_labeled_csv(args.out / "truth_labels.csv", scan, truth.labels)
    write_json(args.out / "truth.json", truth.to_json_dict())
    print(f"simulated {scan.total_points()} points over {len(scan)} frames "
          f"(true C_e = {truth.true_coaxiality:.3f} mm) into {args.out}")
    return EXIT_OK


_COMMANDS = {
    "calibrate": cmd_calibrate,
    "measure": cmd_measure,
    "segment": cmd_segment,
    "simulate": cmd_simulate,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return _COMMANDS[args.command](args)
    except (ScanParseError, FileNotFoundError, OSError) as exc:
        print(f"error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_IO
    except DrillScanError as exc:
        hint = _HINTS.get(type(exc).__name__, "")
        print(f"error ({type(exc).__name__}): {exc}"
              + (f"\nhint: {hint}" if hint else ""), file=sys.stderr)
        return EXIT_MEASUREMENT


if __name__ == "__main__":
    sys.exit(main())
