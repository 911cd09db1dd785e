"""Command-line exporters operating on .npy image arrays.

Image decoding is out of scope on purpose: real adapter deployments load
images with their tool's own pipeline; for contract testing, arrays are
enough.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .export import export_depth, export_matches
from .stubs import make_matcher, make_mde


def _load(path: str) -> np.ndarray:
    return np.load(path)


def _cmd_matches(args) -> int:
    matcher = make_matcher(args.matcher, long_side=args.long_side)
    out = export_matches(
        _load(args.image1), Path(args.image1).stem,
        _load(args.image2), Path(args.image2).stem,
        matcher, args.output, cap=args.cap,
    )
    if out is None:
        print("matcher failed; failure recorded in manifest", file=sys.stderr)
        return 1
    print(out)
    return 0


def _cmd_depth(args) -> int:
    mde = make_mde(args.mde, long_side=args.long_side)
    out = export_depth(
        _load(args.image), Path(args.image).stem, mde, args.output, backbone=args.backbone
    )
    if out is None:
        print("inference failed; failure recorded in manifest", file=sys.stderr)
        return 1
    print(out)
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="posebench-adapt", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("export-matches", help="match two images and write a .d2pm file")
    p.add_argument("image1")
    p.add_argument("image2")
    p.add_argument("--matcher", default="stub-grid")
    p.add_argument("--output", required=True)
    p.add_argument("--cap", type=int, default=2048)
    p.add_argument("--long-side", type=int, default=1024)
    p.set_defaults(func=_cmd_matches)

    p = sub.add_parser("export-depth", help="run a depth model and write a .pfm file")
    p.add_argument("image")
    p.add_argument("--mde", default="stub-constant")
    p.add_argument("--backbone", default="")
    p.add_argument("--output", required=True)
    p.add_argument("--long-side", type=int, default=None)
    p.set_defaults(func=_cmd_depth)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
