"""Command-line interface: ``turbmit {restore,simulate,evaluate,decode}``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""

import argparse
import json
import sys
import warnings
from dataclasses import replace
from pathlib import Path

from . import kernels
from .codec import CodedTarget, bit_score, decode_target, format_bits, read_payload
from .config import ConfigError, load_config
from .deblur import METHODS
from .errors import DataError, NumericError
from .evaluate import PAYLOAD_STREAM, evaluate, simulate_dataset, simulate_to_dir
from .imgio import load_image
from .pipeline import restore
from .rng import Rng
from .simulator import ALIASES, STRENGTHS

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected an integer >= 1, got {text}")
    return value


def _add_config_flags(p):
    p.add_argument("--config", type=Path, help="JSON config file (empty file = defaults)")
    p.add_argument("--keep-fraction", type=float, help="fraction of sharpest frames to average")
    p.add_argument("--deblur-method", choices=METHODS)
    p.add_argument("--nsr", type=float, help="Wiener noise-to-signal ratio")


def build_parser():
    parser = _Parser(prog="turbmit", description="Turbulence mitigation for image sequences.")
    parser.add_argument("--version", action="version", version=f"%(prog)s (kernels: {kernels.BACKEND})")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("restore", help="restore one frame sequence")
    p.add_argument("input_dir", type=Path)
    p.add_argument("-o", "--output", type=Path, required=True, help="output PNG")
    p.add_argument("--dump-stages", type=Path, metavar="DIR",
                   help="also write reference, fused and deblurred images to DIR")
    _add_config_flags(p)

    strengths = sorted(set(STRENGTHS) | set(ALIASES)) + ["random"]
    p = sub.add_parser("simulate", help="write a synthetic degraded sequence or dataset")
    p.add_argument("-o", "--output", type=Path, required=True, help="output directory")
    p.add_argument("--clean", type=Path, help="clean image (default: generated coded target)")
    p.add_argument("--strength", choices=strengths, default="random")
    p.add_argument("--frames", type=_positive_int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sequences", type=_positive_int,
                   help="write this many coded-target sequences as a dataset")
    p.add_argument("--rows", type=_positive_int, default=8)
    p.add_argument("--cols", type=_positive_int, default=8)
    p.add_argument("--cell-px", type=_positive_int, default=16)

    p = sub.add_parser("evaluate", help="restore and score every sequence of a dataset")
    p.add_argument("dataset_root", type=Path)
    p.add_argument("-o", "--output", type=Path, default=Path("report.json"))
    p.add_argument("--jobs", type=_positive_int, default=1)
    _add_config_flags(p)

    p = sub.add_parser("decode", help="decode a coded-target image")
    p.add_argument("image", type=Path)
    p.add_argument("--meta", type=Path, help="meta.json holding the target geometry")
    p.add_argument("--rows", type=_positive_int, default=8)
    p.add_argument("--cols", type=_positive_int, default=8)
    p.add_argument("--cell-px", type=_positive_int, default=16)
    p.add_argument("--border-px", type=int)
    p.add_argument("--payload", type=Path, help="ground-truth payload file; prints the bit score")
    return parser


def _config_from_args(args):
    try:
        config = load_config(args.config)
    except FileNotFoundError as exc:
        raise DataError(f"config file not found: {args.config}") from exc
    except ConfigError as exc:
        raise UsageError(str(exc)) from exc
    try:
        if args.keep_fraction is not None:
            config.selection = replace(config.selection, keep_fraction=args.keep_fraction)
        if args.deblur_method is not None:
            config.deblur = replace(config.deblur, method=args.deblur_method)
        if args.nsr is not None:
            config.deblur = replace(config.deblur, nsr=args.nsr)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    return config


def _cmd_restore(args):
    config = _config_from_args(args)
    if not args.input_dir.is_dir():
        raise DataError(f"input directory not found: {args.input_dir}")
    art = restore(args.input_dir, args.output, config, dump_dir=args.dump_stages)
    print(f"wrote {args.output} ({len(art.kept)} of {len(art.registered)} frames kept)")


def _cmd_simulate(args):
    strength = None if args.strength == "random" else args.strength
    geometry = dict(rows=args.rows, cols=args.cols, cell_px=args.cell_px)
    try:
        CodedTarget(**geometry)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if args.sequences is not None:
        if args.clean is not None:
            raise UsageError("--sequences generates coded targets; drop --clean")
        ids = simulate_dataset(args.output, args.sequences, strength, args.frames, args.seed, geometry)
        print(f"wrote {len(ids)} sequences to {args.output}")
        return
    if args.clean is not None:
        sim = simulate_to_dir(args.output, load_image(args.clean), strength, args.frames, args.seed)
    else:
        target = CodedTarget.random(Rng(args.seed ^ PAYLOAD_STREAM), **geometry)
        sim = simulate_to_dir(args.output, None, strength, args.frames, args.seed, target)
    print(f"wrote {len(sim.frames)} {sim.params.strength} frames to {args.output}")


def _cmd_evaluate(args):
    config = _config_from_args(args)
    if not args.dataset_root.is_dir():
        raise DataError(f"dataset root not found: {args.dataset_root}")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        report = evaluate(args.dataset_root, config, jobs=args.jobs)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    report.write(args.output)
    print(report.table())
    for seq in report.sequences:
        if seq.error is not None:
            print(f"failed: {seq.id}: {seq.error}", file=sys.stderr)
    print(f"report written to {args.output}")


def _cmd_decode(args):
    if args.meta is not None:
        geometry = json.loads(args.meta.read_text()).get("target")
        if geometry is None:
            raise DataError(f"{args.meta} has no target geometry")
        target = CodedTarget(**geometry)
    else:
        try:
            target = CodedTarget(args.rows, args.cols, args.cell_px, args.border_px)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    bits = decode_target(load_image(args.image), target)
    print(format_bits(bits))
    if args.payload is not None:
        print(f"bit score: {bit_score(bits, read_payload(args.payload)):.4f}")


COMMANDS = {
    "restore": _cmd_restore,
    "simulate": _cmd_simulate,
    "evaluate": _cmd_evaluate,
    "decode": _cmd_decode,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"turbmit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"turbmit: {_where(exc)}numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, OSError, ValueError) as exc:
        print(f"turbmit: {_where(exc)}data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ArithmeticError as exc:
        print(f"turbmit: {_where(exc)}numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def _where(exc):
    stage = getattr(exc, "stage", None)
    return f"stage '{stage}' failed: " if stage else ""


if __name__ == "__main__":
    sys.exit(main())
