"""Command-line front end: detect, trajectory, eval, synth, pipeline.

Exit codes are a stable scripting contract: 0 success, 1 usage/parse
errors, 2 empty or degenerate results (no groove found, groove too short).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .cloud import ParseError, load_cloud, read_index_file, save_cloud, write_index_file
from .config import PipelineConfig, load_config
from .descriptor import GrooveSet
from .evaluation import (
    EvalReport,
    evaluate_detection,
    time_pipeline,
    trajectory_deviation,
)
from .pipeline import run_pipeline
from .synthgen import WorkpieceSpec, generate_workpiece, reference_from_dict
from .trajectory import (
    GdParams,
    GrooveTooShortError,
    NoDominantDirectionError,
    generate_trajectory,
    write_trajectory_ascii,
    write_trajectory_json,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_EMPTY = 2


def _load_cfg(path: str | None) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    return load_config(path)


def _out_dir(arg: str | None) -> Path:
    out = Path(arg) if arg else Path.cwd()
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_detection(result, out: Path) -> None:
    write_index_file(result.groove.indices, out / "groove.txt")
    result.vmap.export_table(out / "variation_map.txt", result.oriented)
    result.diagnostics.write(out / "diagnostics.txt")
    save_cloud(result.oriented, out / "oriented.pcd")


def _write_trajectory(traj, out: Path) -> None:
    write_trajectory_ascii(traj, out / "trajectory.txt")
    write_trajectory_json(traj, out / "trajectory.json")


def cmd_detect(args) -> int:
    config = _load_cfg(args.config)
    if args.threads is not None:
        config = _override(config, threads=args.threads)
    cloud = load_cloud(args.cloud)
    result = run_pipeline(cloud, config, with_trajectory=False)
    out = _out_dir(args.out)
    _write_detection(result, out)
    print(f"threshold {result.threshold:.6g}, groove points {len(result.groove)}")
    if len(result.groove) == 0:
        print("empty groove", file=sys.stderr)
        return EXIT_EMPTY
    return EXIT_OK


def cmd_trajectory(args) -> int:
    config = _load_cfg(args.config)
    overrides = {}
    if args.reverse:
        overrides["reverse"] = True
    if args.threads is not None:
        overrides["threads"] = args.threads
    if overrides:
        config = _override(config, **overrides)
    cloud = load_cloud(args.cloud)
    indices = read_index_file(args.groove)
    if indices.size and indices.max() >= len(cloud):
        raise ValueError(
            f"groove index {int(indices.max())} out of range for cloud of {len(cloud)} points"
        )
    if not cloud.has_normals:
        raise ValueError("trajectory needs a cloud with normals (use the detect output)")
    groove = GrooveSet(np.unique(indices), threshold=math.nan)
    if len(groove) == 0:
        print("empty groove", file=sys.stderr)
        return EXIT_EMPTY
    traj = generate_trajectory(
        cloud,
        groove,
        n_segments=config.segments,
        gd=GdParams(config.gd_tolerance, config.gd_max_iters),
        reverse=config.reverse,
        threads=config.threads,
    )
    out = _out_dir(args.out)
    _write_trajectory(traj, out)
    print(f"waypoints {len(traj)}")
    return EXIT_OK


def cmd_eval(args) -> int:
    if len(args.detected) != len(args.truth):
        raise ValueError("need as many --truth files as --detected files")
    reference = None
    if args.reference:
        reference = reference_from_dict(json.loads(Path(args.reference).read_text()))
    n_points = None
    if args.cloud:
        n_points = len(load_cloud(args.cloud))
    rates = []
    reports = []
    for det_path, truth_path in zip(args.detected, args.truth):
        report = evaluate_detection(read_index_file(det_path), read_index_file(truth_path))
        rates.append(report.overlap)
        reports.append(report)
    mean_rate = sum(rates) / len(rates)
    summary = EvalReport(overlap=mean_rate)
    summary.extra["per_run_overlap"] = rates
    summary.extra["n_runs"] = len(rates)
    if len(rates) == 1:
        summary = reports[0]
    if args.trajectory and reference is not None:
        from .trajectory import read_trajectory_json

        traj = read_trajectory_json(args.trajectory)
        dev = trajectory_deviation(traj, reference)
        summary.deviation_mean = dev.mean
        summary.deviation_max = dev.max
    sys.stdout.write(summary.to_json())
    if args.csv:
        row = summary.csv_row(args.name or Path(args.detected[0]).stem, n_points)
        with open(args.csv, "a") as fh:
            fh.write(row + "\n")
    return EXIT_OK


def cmd_synth(args) -> int:
    spec_data = json.loads(Path(args.spec).read_text()) if args.spec else {}
    spec = WorkpieceSpec(**spec_data)
    sample = generate_workpiece(spec)
    out = _out_dir(args.out)
    save_cloud(sample.cloud, out / "cloud.pcd")
    write_index_file(sample.truth, out / "truth.txt")
    if sample.reference is not None:
        (out / "reference.json").write_text(
            json.dumps(sample.reference.to_dict(), indent=2) + "\n"
        )
    (out / "spec.json").write_text(json.dumps(spec.to_dict(), indent=2) + "\n")
    print(f"{spec.shape}: {len(sample.cloud)} points, {sample.truth.size} groove points")
    return EXIT_OK


def cmd_pipeline(args) -> int:
    config = _load_cfg(args.config)
    overrides = {}
    if args.reverse:
        overrides["reverse"] = True
    if args.threads is not None:
        overrides["threads"] = args.threads
    if overrides:
        config = _override(config, **overrides)
    cloud = load_cloud(args.cloud)
    report, result = time_pipeline(cloud, config, runs=args.runs)
    out = _out_dir(args.out)
    _write_detection(result, out)
    if result.trajectory is not None:
        _write_trajectory(result.trajectory, out)
    report.write(out / "report.json")
    sys.stdout.write(report.to_json())
    if args.csv:
        row = report.csv_row(args.name or Path(args.cloud).stem, len(cloud))
        with open(args.csv, "a") as fh:
            fh.write(row + "\n")
    if len(result.groove) == 0:
        print("empty groove", file=sys.stderr)
        return EXIT_EMPTY
    if result.trajectory is None:
        print("groove too short for a trajectory", file=sys.stderr)
        return EXIT_EMPTY
    return EXIT_OK


def _override(config: PipelineConfig, **kwargs) -> PipelineConfig:
    from dataclasses import replace

    return replace(config, **kwargs)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="groovekit",
        description="V-groove detection and welding trajectory generation on point clouds",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", help="detect the groove region in a cloud")
    p.add_argument("cloud", help="input cloud (.pcd/.ply, ascii)")
    p.add_argument("--config", help="pipeline config file (key=value or JSON)")
    p.add_argument("--out", help="output directory (default: cwd)")
    p.add_argument("--threads", type=int, help="worker cap for the per-point stages")
    p.set_defaults(fn=cmd_detect)

    p = sub.add_parser("trajectory", help="generate a trajectory from a groove index file")
    p.add_argument("cloud", help="cloud with normals (detect writes oriented.pcd)")
    p.add_argument("groove", help="groove index file, one index per line")
    p.add_argument("--config", help="pipeline config file")
    p.add_argument("--out", help="output directory")
    p.add_argument("--reverse", action="store_true", help="reverse the welding direction")
    p.add_argument("--threads", type=int)
    p.set_defaults(fn=cmd_trajectory)

    p = sub.add_parser("eval", help="overlap rate of detected vs ground-truth indices")
    p.add_argument("--detected", nargs="+", required=True)
    p.add_argument("--truth", nargs="+", required=True)
    p.add_argument("--reference", help="reference curve JSON (from synth)")
    p.add_argument("--trajectory", help="trajectory JSON to score against the reference")
    p.add_argument("--cloud", help="cloud path, only used for the point count in CSV rows")
    p.add_argument("--csv", help="append a summary row to this CSV file")
    p.add_argument("--name", help="row name for CSV output")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("synth", help="generate a synthetic workpiece with labels")
    p.add_argument("--spec", help="workpiece spec JSON; defaults used when omitted")
    p.add_argument("--out", help="output directory")
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("pipeline", help="detect + trajectory with stage timing")
    p.add_argument("cloud")
    p.add_argument("--config")
    p.add_argument("--out")
    p.add_argument("--runs", type=int, default=1, help="timing repetitions (report carries each total)")
    p.add_argument("--reverse", action="store_true")
    p.add_argument("--threads", type=int)
    p.add_argument("--csv", help="append name,points,overlap,seconds to this file")
    p.add_argument("--name")
    p.set_defaults(fn=cmd_pipeline)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (GrooveTooShortError, NoDominantDirectionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EMPTY
    except (ParseError, ValueError, TypeError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
