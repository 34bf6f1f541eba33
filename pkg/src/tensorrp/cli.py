"""Command-line entry point: ``tensorrp <subcommand> [flags]``.

Exit codes: 0 on success, 1 on a configuration error, 2 when ``checks``
finds a value beyond its tolerance.
"""
from __future__ import annotations

import argparse
import logging
import sys

from . import experiments
from .errors import ElementCapExceeded, InvalidSpec
from .experiments import ExperimentConfig
from .projection import Variant

log = logging.getLogger("tensorrp")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_CHECK_FAILED = 2

# defaults that differ between subcommands
SUBCOMMAND_DEFAULTS = {
    "distortion": {"regime": "small", "variants": experiments.TT_VARIANTS, "trials": 100},
    "mpo-compare": {"regime": "high", "variants": experiments.MPO_COMPARE_VARIANTS, "trials": 100},
    "timing": {"regime": "medium", "variants": experiments.TT_VARIANTS, "trials": 100},
    "checks": {"regime": "small", "variants": experiments.TT_VARIANTS, "trials": 10**5},
}

RUNNERS = {
    "distortion": experiments.run_distortion,
    "mpo-compare": experiments.run_mpo_comparison,
    "timing": experiments.run_timing,
    "checks": experiments.run_checks,
}


class _Parser(argparse.ArgumentParser):
    """Argument errors are configuration errors: exit 1, keeping 2 for failed checks."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> tuple[int, ...]:
    try:
        values = tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _variant_list(text: str) -> tuple[Variant, ...]:
    try:
        return tuple(Variant.parse(v) for v in text.split(",") if v.strip())
    except InvalidSpec as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="64-bit unsigned seed (default 0)")
    common.add_argument("--trials", type=int, default=None, help="Monte Carlo trials per cell")
    common.add_argument("--out", default="-", help="CSV output path, '-' for stdout")
    common.add_argument(
        "--regime",
        choices=["small", "medium", "high", "custom"],
        default=None,
        help="input size: small (d=15,N=3), medium (d=3,N=12), high (d=3,N=25) or custom",
    )
    common.add_argument("--dim", type=int, default=None, help="mode dimension d for --regime custom")
    common.add_argument("--order", type=int, default=None, help="tensor order N for --regime custom")
    common.add_argument("--input-rank", type=int, default=10, help="TT rank of the synthetic input")
    common.add_argument("--ranks", type=_int_list, default=experiments.DEFAULT_RANKS, help="rank grid, e.g. 1,5,10")
    common.add_argument("--ks", type=_int_list, default=experiments.DEFAULT_KS, help="embedding sizes, e.g. 8,2048")
    common.add_argument("--variants", type=_variant_list, default=None, help="comma-separated variant names")
    common.add_argument("--element-cap", type=int, default=experiments.DEFAULT_ELEMENT_CAP)
    common.add_argument("-v", "--verbose", action="store_true")
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="tensorrp",
        description="Tensorized random projection experiments (CSV output).",
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    common = _common_flags()
    sub.add_parser("distortion", parents=[common], help="distortion ratio versus k")
    sub.add_parser("mpo-compare", parents=[common], help="TT Gaussian map against MPO maps")
    sub.add_parser("timing", parents=[common], help="apply time and operation counts")
    sub.add_parser("checks", parents=[common], help="moment identities and bounds")
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    defaults = SUBCOMMAND_DEFAULTS[args.command]
    return ExperimentConfig(
        regime=args.regime or defaults["regime"],
        dim=args.dim,
        order=args.order,
        input_rank=args.input_rank,
        variants=args.variants or defaults["variants"],
        rank_grid=args.ranks,
        k_grid=args.ks,
        trials=defaults["trials"] if args.trials is None else args.trials,
        seed=args.seed,
        element_cap=args.element_cap,
        out_path=args.out,
    )


def _write(records, out_path: str) -> None:
    if out_path == "-":
        experiments.write_csv(records, sys.stdout)
        return
    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        experiments.write_csv(records, fh)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = config_from_args(args)
        log.info("running %s on shape %s", args.command, cfg.shape)
        records = RUNNERS[args.command](cfg)
        _write(records, cfg.out_path)
    except (InvalidSpec, ElementCapExceeded, ValueError, OSError) as exc:
        print(f"tensorrp: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "checks":
        failed = experiments.check_failures(records)
        for r in failed:
            print(f"tensorrp: check failed: {r.experiment} {r.value_kind}={r.value!r} ({r})", file=sys.stderr)
        if failed:
            return EXIT_CHECK_FAILED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
