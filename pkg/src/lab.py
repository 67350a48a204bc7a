"""
LQG lab - command-line entry point.

    lab <experiment> [--config FILE] [--seed N] [--out DIR] [--xi XI]
    lab render <file> --style <field|ball|trace|crossings> [--out FILE]
"""

import argparse
import sys
from pathlib import Path
from typing import List, Optional

from core.config import TOOL_VERSION, logger
from core.errors import LabError
from harness.render import RenderStyle, render
from harness.runner import run
from harness.schema import ExperimentKind, load_config


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lab", description="Lattice experiments for LQG geodesics and SLE traces")
    parser.add_argument("--version", action="version", version=TOOL_VERSION)
    commands = parser.add_subparsers(dest="command", required=True)

    for kind in ExperimentKind:
        sub = commands.add_parser(kind.value, help=f"run the {kind.value} experiment")
        sub.add_argument("--config", type=Path, help="flat TOML experiment config")
        sub.add_argument("--seed", type=int, help="master seed (overrides the config)")
        sub.add_argument("--out", type=Path, help="output directory (overrides the config)")
        sub.add_argument("--xi", type=float, help="LFPP weight exponent (overrides the config)")

    sub = commands.add_parser("render", help="render a lab output file to PNG")
    sub.add_argument("input", type=Path)
    sub.add_argument("--style", required=True, choices=[style.value for style in RenderStyle])
    sub.add_argument("--out", type=Path, help="PNG path (default: next to the input)")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "render":
            output = render(args.input, args.style, args.out)
            print(output)
            return 0

        config = load_config(args.config, args.command, seed=args.seed, output_dir=args.out, xi=args.xi)
        manifest = run(config)
        print(Path(config.output_dir) / "manifest.json")
        logger.info(f"Done in {sum(manifest.timings.values()):.2f}s")
        return 0
    except LabError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
