"""Command-line entry point.

Verbs mirror the pipeline stages so a run can be resumed or inspected piece
by piece; `benchmark` chains everything across a method list. Exit codes:
0 success, 2 configuration problems, 3 data problems, 4 runtime failures.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from . import pipeline
from .config import ALL_METHODS, PipelineConfig, load_config, validate_config
from .data import generate_synthetic
from .dataio import save_matrix
from .errors import (
    ConfigError,
    FormatError,
    InsufficientDataError,
    IoError,
    QrdxError,
    SelectionError,
)

_DATA_ERRORS = (IoError, FormatError, SelectionError, InsufficientDataError)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qrdx",
        description="Feature reduction with a quantum-kernel classifier benchmark.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    def add_common(p):
        p.add_argument("-c", "--config", help="TOML config file (defaults apply without one)")
        p.add_argument("--seed", type=int, help="override the run seed")
        p.add_argument("--out", help="override the output directory")

    for verb, desc in (
        ("reduce", "fit the reducer and write reduced splits"),
        ("kernel", "carve protocol subsets and write Gram matrices"),
        ("train-svm", "grid-search C on stored kernels"),
        ("evaluate", "score the stored evaluation kernel and write the report"),
    ):
        p = sub.add_parser(verb, help=desc)
        add_common(p)
        p.add_argument("--method", choices=ALL_METHODS, help="override reducer.method")

    p = sub.add_parser("benchmark", help="run every configured method end to end")
    add_common(p)
    p.add_argument("--method", action="append", choices=ALL_METHODS, dest="methods",
                   help="restrict to this method (repeatable)")
    p.add_argument("--workers", type=int, default=1,
                   help="reserved for parallel runs; only 1 is supported")

    p = sub.add_parser("synth-data", help="write a synthetic dataset to a matrix file")
    p.add_argument("path", help="destination (.csv or binary)")
    p.add_argument("--samples", type=int, default=4000)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--hardness", type=float, default=0.0)
    return parser


def _load_cfg(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.out is not None:
        updates["output"] = dataclasses.replace(cfg.output, directory=args.out)
    if getattr(args, "method", None) and args.verb != "benchmark":
        updates["reducer"] = dataclasses.replace(cfg.reducer, method=args.method)
    if updates:
        cfg = dataclasses.replace(cfg, **updates)
    validate_config(cfg)
    return cfg


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.verb == "synth-data":
            data = generate_synthetic(args.samples, args.seed, args.hardness)
            save_matrix(data, args.path)
            print(f"wrote {data.n_samples} samples to {args.path}")
            return 0

        cfg = _load_cfg(args)
        if args.verb == "reduce":
            where = pipeline.stage_reduce(cfg)
            print(f"reduced splits written under {where}")
        elif args.verb == "kernel":
            where = pipeline.stage_kernel(cfg)
            print(f"kernel matrices written under {where}")
        elif args.verb == "train-svm":
            where = pipeline.stage_train_svm(cfg)
            print(f"svm model written under {where}")
        elif args.verb == "evaluate":
            row = pipeline.stage_evaluate(cfg)
            print(json.dumps(row, indent=1, sort_keys=True))
        elif args.verb == "benchmark":
            if args.workers != 1:
                print("only --workers 1 is supported; running sequentially",
                      file=sys.stderr)
            report = pipeline.run_benchmark(cfg, methods=args.methods)
            print(pipeline.render_table(report), end="")
        return 0
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except _DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except QrdxError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
