"""Command-line entry point: ``qgrom <stage> [options]``."""

from __future__ import annotations

import argparse
import logging
import sys

from qgrom import pipeline
from qgrom.config import PipelineConfig
from qgrom.errors import QgromError

STAGES = ("simulate", "project", "eof", "fit", "rom", "reconstruct", "diagnose", "all")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI configuration file")
    common.add_argument("--preset", choices=("desk", "full"), help="default set (desk: 129/33 grids, full: 513/129)")
    common.add_argument("--workdir", help="directory for all artifacts")
    common.add_argument(
        "--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
        help="override one configuration value (repeatable)",
    )
    common.add_argument("--force", action="store_true", help="overwrite existing simulation output")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="qgrom", description=__doc__)
    sub = parser.add_subparsers(dest="stage", required=True)
    for name in STAGES:
        p = sub.add_parser(name, parents=[common])
        if name == "simulate":
            p.add_argument("--resolution", choices=("high", "low"), required=True)
        if name == "rom":
            p.add_argument("--eta-zero", action="store_true", help="integrate without nudging")
    p = sub.add_parser("render", help="heatmap of a field file")
    p.add_argument("field_file")
    p.add_argument("output")
    p.add_argument("--record", default="mean", help="record index, 'mean' or 'std'")
    p.add_argument("--vmax", type=float)
    p.add_argument("--scale", type=int, default=4)
    p.add_argument("-v", "--verbose", action="store_true")
    sub.add_parser("show-config", parents=[common], help="print the merged configuration")
    return parser


def run_stage(args) -> None:
    if args.stage == "render":
        pipeline.cmd_render(args.field_file, args.output, args.record, args.vmax, args.scale)
        return
    overrides = list(args.overrides)
    if args.workdir:
        overrides.append(f"paths.workdir={args.workdir}")
    cfg = PipelineConfig.load(args.config, overrides, preset=args.preset)
    if args.stage == "show-config":
        sys.stdout.write(cfg.dump())
    elif args.stage == "simulate":
        pipeline.cmd_simulate(cfg, args.resolution, force=args.force)
    elif args.stage == "rom":
        pipeline.cmd_rom(cfg, eta_zero=args.eta_zero)
    elif args.stage == "all":
        report = pipeline.cmd_all(cfg, force=args.force)
        sys.stdout.write(report.read_text())
    else:
        getattr(pipeline, f"cmd_{args.stage}")(cfg)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        run_stage(args)
    except (QgromError, ValueError, ArithmeticError, OSError) as exc:
        print(f"qgrom {args.stage}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
