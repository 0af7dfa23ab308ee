"""Command-line entry point: ``confdist run ...``.

Exit codes: 0 on success, 1 for configuration errors, 2 for data errors.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .core import DataError
from .harness import DEFAULT_ALPHAS, DEFAULT_KS, ExperimentConfig, run_experiment, write_report
from .regressors import RegressorSpec

REGRESSORS = {"ls": "least_squares", "ridge": "ridge", "knn": "knn"}
MEASURES = {"simple": "simple", "normalized": "normalized", "nw": "nadaraya_watson"}


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad number list {text!r}") from exc


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="confdist", description="Split and cross-conformal predictive distributions.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    run = sub.add_parser("run", help="run the permutation experiment")
    source = run.add_mutually_exclusive_group(required=True)
    source.add_argument("--data", help="CSV file, last column is the label")
    source.add_argument("--synth", choices=("homoscedastic_linear", "heteroscedastic_linear", "example1"))
    run.add_argument("--synth-n", type=int, default=506, help="size of the synthetic dataset")
    run.add_argument("--test-len", type=int, default=100)
    run.add_argument("--perms", type=int, default=10)
    run.add_argument("--alphas", type=_float_list, default=None,
                     help="comma-separated split fractions (calibration mode uses the first)")
    run.add_argument("--ks", type=_int_list, default=None,
                     help="comma-separated fold counts (calibration mode uses the first)")
    run.add_argument("--full-k", action="store_true", help="sweep K over 2..100")
    run.add_argument("--regressor", choices=sorted(REGRESSORS), default="ls")
    run.add_argument("--ridge-lambda", type=float, default=1.0)
    run.add_argument("--knn-k", type=int, default=5)
    run.add_argument("--measure", choices=sorted(MEASURES), default="simple")
    run.add_argument("--bandwidth-x", type=float, default=1.0)
    run.add_argument("--bandwidth-y", type=float, default=1.0)
    run.add_argument("--mode", choices=("crps", "calibration"), default="crps")
    run.add_argument("--pit", choices=("fuzzy", "crisp"), default="fuzzy")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--tune", choices=("on", "off"), default="on")
    run.add_argument("--emit-raw", action="store_true")
    run.add_argument("--conservative-2x", action="store_true",
                     help="double CCPS p-values (clipped at 1) in calibration mode")
    run.add_argument("-v", "--verbose", action="store_true")
    return parser


def config_from_args(args) -> ExperimentConfig:
    try:
        regressor = RegressorSpec(REGRESSORS[args.regressor], ridge_lambda=args.ridge_lambda,
                                  knn_k=args.knn_k)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    ks = args.ks or (tuple(range(2, 101)) if args.full_k else DEFAULT_KS)
    config = ExperimentConfig(
        data_path=args.data, synth=args.synth, synth_n=args.synth_n,
        test_length=args.test_len, permutations=args.perms,
        alphas=args.alphas or DEFAULT_ALPHAS, ks=ks,
        regressor=regressor, measure=MEASURES[args.measure], mode=args.mode,
        seed=args.seed, tune=args.tune == "on", emit_raw=args.emit_raw,
        conservative=args.conservative_2x, pit=args.pit,
        bandwidth_x=args.bandwidth_x, bandwidth_y=args.bandwidth_y,
    )
    if args.alphas:
        config.calibration_alpha = args.alphas[0]
    if args.ks:
        config.calibration_k = args.ks[0]
    try:
        config.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return config


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = config_from_args(args)
        report = run_experiment(config)
        write_report(report, config, args.out)
    except ConfigError as exc:
        print(f"confdist: configuration error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"confdist: data error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
