"""Command line entry point: ``pbeid {generate,discover,benchmark,study,plotdata}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .grid import DensityFileError, GridError, add_white_noise, save_density
from .pipeline import (
    EXIT_INPUT,
    EXIT_MODEL,
    RunConfig,
    StageError,
    emit_plot_data,
    run_benchmark,
    run_discovery,
    run_noise_study,
)
from .solver import CASES, generate_case
from .validation import ConfigError

# config keys that can be set from flags; values are the argparse types
_CONFIG_FLAGS = {
    "case": str,
    "input_path": str,
    "initial": str,
    "noise_level": float,
    "noise_seed": int,
    "noise_mode": str,
    "window": int,
    "polyorder": int,
    "derivative": str,
    "poly_degree": int,
    "poly_halfwidth": int,
    "fraction": float,
    "subsample_seed": int,
    "catalog_path": str,
    "threshold_low": float,
    "threshold_high": float,
    "threshold_count": int,
    "residual_mode": str,
    "rank_tol": float,
    "max_iter": int,
}


def _floats(text: str) -> tuple:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _combos(text: str) -> tuple:
    return tuple(tuple(part.split("+")) for part in text.split(","))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pbeid", description="Identify population balance equations from data.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="simulate a benchmark case and write the density CSV")
    gen.add_argument("case", choices=sorted(CASES))
    gen.add_argument("-o", "--out", type=Path, help="CSV path (default: case_<id>.csv)")
    gen.add_argument("--initial", choices=("exp(-x)", "exp(x)"))
    gen.add_argument("--method", choices=("fixed_pivot", "characteristics", "closed_form", "splitting"))
    gen.add_argument("--noise-level", type=float, default=0.0)
    gen.add_argument("--noise-seed", type=int, default=0)

    disc = sub.add_parser("discover", help="run one identification and write a report")
    disc.add_argument("--config", type=Path, help="JSON run config; flags override its keys")
    for key, typ in _CONFIG_FLAGS.items():
        disc.add_argument("--" + key.replace("_", "-"), dest=key, type=typ)
    disc.add_argument("--input", dest="input_path", type=str, help="alias of --input-path")
    disc.add_argument("--smooth", choices=("auto", "on", "off"))
    disc.add_argument("--weights", type=_floats, help="residual,terms,penalty")
    disc.add_argument("--combinations", type=_combos, help="e.g. agg,bkg,agg+bkg")
    disc.add_argument("-o", "--out", dest="output_dir", type=str)

    bench = sub.add_parser("benchmark", help="clean-data benchmark table")
    bench.add_argument("--cases", default=",".join(sorted(CASES)), help="comma-separated case ids")
    bench.add_argument("--repetitions", type=int, default=1)
    bench.add_argument("--ablation", action="store_true", help="also rescore without the realizability penalty")
    bench.add_argument("--workers", type=int, default=1)
    bench.add_argument("-o", "--out", type=Path, default=Path("benchmark"))

    study = sub.add_parser("study", help="noise and data-fraction success-rate study")
    study.add_argument("case", choices=sorted(CASES))
    study.add_argument("--levels", type=_floats, default=(0.0, 0.0025, 0.005, 0.0075, 0.01))
    study.add_argument("--fractions", type=_floats, default=(0.2, 0.4, 0.6, 0.8, 1.0))
    study.add_argument("--samples", type=int, default=100)
    study.add_argument("--seed", type=int, default=0)
    study.add_argument("--weights", type=_floats)
    study.add_argument("--workers", type=int, default=1)
    study.add_argument("-o", "--out", type=Path, default=Path("study"))

    plot = sub.add_parser("plotdata", help="tidy CSV from a report, benchmark or study JSON")
    plot.add_argument("source", type=Path)
    plot.add_argument("--times", type=_floats, help="snapshot times for discovery reports")
    plot.add_argument("-o", "--out", type=Path, default=Path("plotdata"))
    return parser


def _config_from_args(args) -> RunConfig:
    data = json.loads(args.config.read_text()) if args.config else {}
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    for key in list(_CONFIG_FLAGS) + ["weights", "combinations", "output_dir"]:
        value = getattr(args, key, None)
        if value is not None:
            data[key] = value
    if args.smooth is not None:
        data["smooth"] = {"auto": "auto", "on": True, "off": False}[args.smooth]
    # a flag naming one input source replaces the other one from the file
    if args.input_path is not None and args.case is None:
        data.pop("case", None)
    if args.case is not None and args.input_path is None:
        data.pop("input_path", None)
    return RunConfig.from_dict(data)


def cmd_generate(args) -> int:
    fld, spec = generate_case(args.case, initial=args.initial, method=args.method)
    if args.noise_level:
        fld = add_white_noise(fld, args.noise_level, args.noise_seed)
    out = args.out or Path(f"case_{args.case}.csv")
    save_density(fld, out)
    print(f"wrote {out} ({fld.shape[0]} sizes x {fld.shape[1]} times)")
    return EXIT_MODEL


def cmd_discover(args) -> int:
    config = _config_from_args(args)
    report = run_discovery(config)
    print(report.model.text())
    if report.comparison is not None:
        comp = report.comparison
        err = comp["error_percent"]
        print(f"reference {report.reference}; matched={comp['matched']}"
              + (f", average error {err:.3g}%" if err is not None else ""))
    if config.output_dir:
        path = report.write(config.output_dir)
        print(f"report written to {path}")
    return report.exit_code


def cmd_benchmark(args) -> int:
    cases = [c.strip() for c in args.cases.split(",") if c.strip()]
    table = run_benchmark(cases, args.repetitions, args.ablation, args.workers)
    table.write(args.out)
    print(table.markdown(), end="")
    return EXIT_MODEL


def cmd_study(args) -> int:
    result = run_noise_study(args.case, args.levels, args.fractions, args.samples, args.seed, args.workers,
                             args.weights)
    path = result.write(args.out)
    for row in result.cell_rows():
        err = row["error_mean_percent"]
        print(f"noise {row['noise_level']:.4f} fraction {row['fraction']:.2f}: "
              f"success {row['success_rate']:.2f}" + ("" if err is None else f", mean error {err:.3g}%"))
    print(f"study written to {path}")
    return EXIT_MODEL


def cmd_plotdata(args) -> int:
    for path in emit_plot_data(args.source, args.out, args.times):
        print(f"wrote {path}")
    return EXIT_MODEL


COMMANDS = {
    "generate": cmd_generate,
    "discover": cmd_discover,
    "benchmark": cmd_benchmark,
    "study": cmd_study,
    "plotdata": cmd_plotdata,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, GridError, DensityFileError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except StageError as exc:
        print(f"error in stage {exc}", file=sys.stderr)
        return EXIT_INPUT if exc.stage in ("load", "preprocess") else 1


if __name__ == "__main__":
    sys.exit(main())
