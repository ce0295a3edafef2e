#!/usr/bin/env python3
"""Run the full evaluation on a user-supplied LAS or labeled CSV tile.

With the default radius of 2.0, every neighborhood covers the whole
normalized cloud; pass a smaller --radius for local structure.

Usage: python scripts/run_las_experiment.py --input tile.las [--radius R]
"""

import argparse
import sys
from pathlib import Path

from prodcoef.cli import main as cli


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--input", required=True)
    parser.add_argument("--format", choices=("las", "csv", "auto"), default="auto")
    parser.add_argument("--has-label", action="store_true",
                        help="needed for labeled CSV input; LAS labels are implicit")
    parser.add_argument("--radius", type=float, default=2.0)
    parser.add_argument("--table", choices=("1", "2"), default="2")
    parser.add_argument("--components", default="3..10")
    parser.add_argument("--folds", type=int, default=5)
    parser.add_argument("--trees", type=int, default=100)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out-dir", default="out/las_experiment")
    args = parser.parse_args()

    argv = [
        "run", "--input", args.input, "--format", args.format,
        "--radius", str(args.radius), "--table", args.table,
        "--components", args.components, "--folds", str(args.folds),
        "--trees", str(args.trees), "--seed", str(args.seed),
        "--out-dir", args.out_dir,
    ]
    if args.has_label:
        argv.append("--has-label")
    code = cli(argv)
    if code == 0:
        table = Path(args.out_dir) / f"table{args.table}.txt"
        print(table.read_text())
    return code


if __name__ == "__main__":
    sys.exit(main())
