"""EMIM workbench command line.

    python main.py check --suite all --seed 7
    python main.py bench --mechanism all --radius 1 2 3
    python main.py demo-displacement --radius 3
    python main.py train-toy --epochs 4 --ablate motion
"""

import argparse
import sys
from pathlib import Path

PROJECT_ROOT = Path(__file__).parent.resolve()
sys.path.insert(0, str(PROJECT_ROOT))

import config
from cli.commands import COMMANDS
from cli.manifest import RunManifest, write_manifest
from core.attention.config import BOUNDARY_MODES, SAMPLING_MODES
from core.errors import ConfigurationError, DimensionError, DivergenceError, FixtureFormatError
from core.logger import logger
from core.model.stack import MECHANISMS
from core.training.trainer import ABLATIONS
from core.verification.macs import MAC_MECHANISMS
from core.verification.suites import SUITES


def parse_shift(text: str) -> tuple[int, int]:
    try:
        dx, dy = (int(part) for part in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"shift must look like 'dx,dy', got {text!r}") from exc
    return dx, dy


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=config.DEFAULT_SEED)
    parser.add_argument("--threads", type=int, default=config.DEFAULT_THREADS,
                        help="worker threads; 1 runs everything serially")
    parser.add_argument("--out", type=Path, default=None, help="output directory (default: runs/<command>)")


def _add_mechanism(parser: argparse.ArgumentParser, multi_radius: bool = False) -> None:
    parser.add_argument("--radius", type=int, nargs="+" if multi_radius else 1, default=None,
                        help="window radius P (window is 2P+1 square)")
    parser.add_argument("--interval", type=int, default=None, help="temporal interval between query and key frames")
    parser.add_argument("--heads", type=int, default=None)
    parser.add_argument("--sampling", choices=SAMPLING_MODES, default=None)
    parser.add_argument("--boundary", choices=BOUNDARY_MODES, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="emim", description="Windowed cross-frame attention workbench")
    sub = parser.add_subparsers(dest="command", required=True)

    check = sub.add_parser("check", help="run verification suites")
    check.add_argument("--suite", choices=SUITES, default="all")
    check.add_argument("--trials", type=int, default=None, help="oracle trials (default from data/defaults.yaml)")
    check.add_argument("--tolerance", type=float, default=None)
    check.add_argument("--replay", type=Path, default=None, help="re-run a serialized failing oracle case")
    _add_common(check)

    bench = sub.add_parser("bench", help="MAC counts and timings")
    bench.add_argument("--mechanism", choices=MAC_MECHANISMS + ("all",), default="all")
    bench.add_argument("--repeats", type=int, default=None, help="timed forwards per mechanism; 0 skips timing")
    bench.add_argument("--frames", type=int, default=None)
    bench.add_argument("--height", type=int, default=None)
    bench.add_argument("--width", type=int, default=None)
    bench.add_argument("--channels", type=int, default=None)
    bench.add_argument("--instrument", action="store_true", help="also count MACs in the loop oracles")
    _add_mechanism(bench, multi_radius=True)
    _add_common(bench)

    demo = sub.add_parser("demo-displacement", help="recover translations from the raw affinity")
    demo.add_argument("--shift", type=parse_shift, action="append", default=None,
                      help="dx,dy (repeatable; default: every shift within the radius)")
    demo.add_argument("--seeds", type=int, default=None, help="clips per shift")
    _add_mechanism(demo)
    _add_common(demo)

    train = sub.add_parser("train-toy", help="train a small classifier on synthetic motion")
    train.add_argument("--epochs", type=int, default=None)
    train.add_argument("--classes", type=int, choices=(4, 8, 49), default=None)
    train.add_argument("--clips", type=int, default=None)
    train.add_argument("--mechanism", choices=MECHANISMS, default=None)
    train.add_argument("--pattern", default=None, help="block pattern over O/E, applied cyclically")
    train.add_argument("--depth", type=int, default=None)
    train.add_argument("--channels", type=int, default=None)
    train.add_argument("--lr", type=float, default=None)
    train.add_argument("--ablate", choices=ABLATIONS, action="append", default=None)
    train.add_argument("--min-val-acc", type=float, default=None, help="fail (exit 1) below this accuracy")
    train.add_argument("--save-checkpoint", action="store_true")
    train.add_argument("--ordered-matmul", action="store_true",
                       help="keep fixed-order matmul accumulation (slow, bit-identical to the loop oracles)")
    _add_mechanism(train)
    _add_common(train)
    return parser


def _snapshot(args: argparse.Namespace) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k != "command" and v is not None}


def _usage_manifest(argv: list[str], code: int) -> None:
    """Record a run that argparse rejected, as far as its command line can be read."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("command", nargs="?")
    pre.add_argument("--out", type=Path, default=None)
    pre.add_argument("--seed", default=None)
    try:
        known, _ = pre.parse_known_args(argv)
    except SystemExit:
        known = argparse.Namespace(command=None, out=None, seed=None)
    command = known.command if known.command in COMMANDS else "usage"
    try:
        seed = int(known.seed) if known.seed is not None else config.DEFAULT_SEED
    except ValueError:
        seed = config.DEFAULT_SEED
    manifest = RunManifest(command, seed, argv, {"error": "usage"})
    manifest.exit_code = code
    write_manifest(manifest, known.out or config.OUTPUT_DIR / command)


def main(argv: list[str] | None = None) -> int:
    """Run one command and return its exit code (0 pass, 1 gate failure, 2 usage error)."""
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if not exc.code:
            return config.EXIT_OK
        _usage_manifest(argv, config.EXIT_USAGE)
        return config.EXIT_USAGE

    out_dir = args.out or config.OUTPUT_DIR / args.command
    manifest = RunManifest(args.command, args.seed, argv, _snapshot(args))
    logger.info(f"emim {args.command} (seed {args.seed}) -> {out_dir}")
    try:
        code = COMMANDS[args.command](args, out_dir, manifest)
    except (ConfigurationError, DimensionError, FixtureFormatError) as exc:
        logger.error(f"{args.command}: {exc}")
        print(f"error: {exc}", file=sys.stderr)
        code = config.EXIT_USAGE
    except DivergenceError as exc:
        logger.error(f"{args.command}: training diverged at epoch {exc.epoch}")
        print(f"error: {exc}", file=sys.stderr)
        code = config.EXIT_GATE_FAILED
    manifest.exit_code = code
    write_manifest(manifest, out_dir)
    return code


if __name__ == "__main__":
    sys.exit(main())
