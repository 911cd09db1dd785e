"""Command-line entry point.

Subcommands mirror the pipeline stages:

  sample-pairs    covisibility-sampled evaluation pairs per scene
  evaluate        run estimators over pairs x provenances, write results CSV
  report          aggregate results into mAA / rank / correlation report
  selfcheck       synthetic quantitative checks, exit code reflects pass/fail
  emit-synthetic  write a synthetic scene in the full pipeline layout
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import PosebenchError
from .harness import (
    BenchmarkConfig,
    cmd_evaluate,
    cmd_report,
    cmd_sample_pairs,
    format_report_table,
    format_selfcheck,
    run_selfcheck,
)
from .synthetic import DepthNoiseModel, emit_dataset, specs_for_grid


def _load_config(path: str, args) -> BenchmarkConfig:
    config = BenchmarkConfig.from_file(path)
    if getattr(args, "output", None):
        config.output_dir = args.output
    if getattr(args, "seed", None) is not None:
        config.seed = args.seed
    if getattr(args, "iterations", None):
        config.ransac_overrides["max_iterations"] = args.iterations
    return config


def _cmd_sample_pairs(args) -> int:
    config = _load_config(args.config, args)
    status = cmd_sample_pairs(config)
    failed = 0
    for scene, st in sorted(status.items()):
        print(f"{scene}: {st}")
        failed += st != "ok"
    return 1 if failed else 0


def _cmd_evaluate(args) -> int:
    config = _load_config(args.config, args)
    results, depth_metrics = cmd_evaluate(
        config, jobs=args.jobs, run_seed=args.seed, pairs_dir=args.pairs_dir
    )
    print(f"results: {results}")
    if depth_metrics:
        print(f"depth metrics: {depth_metrics}")
    return 0


def _cmd_report(args) -> int:
    grouping = None
    if args.config:
        config = BenchmarkConfig.from_file(args.config)
        grouping = {s.name: s.group or s.name for s in config.scenes}
    report = cmd_report(
        args.results,
        args.output,
        grouping=grouping,
        depth_metrics_files=args.depth_metrics or None,
    )
    print(format_report_table(report), end="")
    print(f"report written to {args.output}")
    return 0


def _cmd_selfcheck(args) -> int:
    checks = run_selfcheck(args.seed, negative_control=args.negative_control)
    print(format_selfcheck(checks))
    return 0 if all(c.passed for c in checks) else 1


def _cmd_emit_synthetic(args) -> int:
    noise = DepthNoiseModel.none()
    if args.depth_noise > 0:
        noise = DepthNoiseModel.lognormal(args.depth_noise)
    specs = specs_for_grid(
        args.seed,
        args.pairs,
        n_points=args.points,
        pixel_noise=args.pixel_noise,
        outlier_fraction=args.outliers,
        depth_noise=noise,
    )
    manifest = emit_dataset(args.scene, specs, args.output)
    config = {
        "scenes": [
            {
                "name": manifest["scene"],
                "model": manifest["model"],
                "matches_dir": manifest["matches_dir"],
                "depth_dirs": manifest["depth_dirs"],
                "group": "synthetic",
            }
        ],
        "estimators": args.estimators.split(","),
        "pairs": {"min_overlap": 0.1, "count": args.pairs, "seed": args.seed},
        "output_dir": str(Path(args.output) / "out"),
    }
    config_path = Path(args.output) / "config.json"
    config_path.write_text(json.dumps(config, indent=2))
    print(json.dumps(manifest, indent=2))
    print(f"config written to {config_path}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="posebench", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample-pairs", help="sample covisible evaluation pairs")
    p.add_argument("--config", required=True)
    p.add_argument("--output", help="override output directory")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_sample_pairs)

    p = sub.add_parser("evaluate", help="run estimators over all pairs")
    p.add_argument("--config", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--output", help="override output directory")
    p.add_argument("--pairs-dir", default=None, help="directory holding <scene>.csv pair lists")
    p.add_argument("--iterations", type=int, default=None, help="override RANSAC iterations")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("report", help="aggregate results CSVs into a report")
    p.add_argument("--results", nargs="+", required=True)
    p.add_argument("--depth-metrics", nargs="*", default=[])
    p.add_argument("--output", required=True)
    p.add_argument("--config", help="config file supplying scene grouping")
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("selfcheck", help="synthetic quantitative self-checks")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--negative-control",
        action="store_true",
        help="mis-wire the scoring residual to prove the checks can fail",
    )
    p.set_defaults(func=_cmd_selfcheck)

    p = sub.add_parser("emit-synthetic", help="write a synthetic pipeline scene")
    p.add_argument("--output", required=True)
    p.add_argument("--scene", default="synthetic")
    p.add_argument("--pairs", type=int, default=8)
    p.add_argument("--points", type=int, default=200)
    p.add_argument("--pixel-noise", type=float, default=0.0)
    p.add_argument("--outliers", type=float, default=0.0)
    p.add_argument("--depth-noise", type=float, default=0.0)
    p.add_argument("--estimators", default="B,H,R,GT-H")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_emit_synthetic)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except PosebenchError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
