"""Command line interface.

Verbs:
  simulate         write one replication's measurement paths as CSV files
  estimate         estimate from stored measurement CSVs
  experiment       run the study described by the config
  validate-oracle  closed-form identity checks, written to oracle.csv
  asymptotics      estimator constants per kernel, written to constants.csv

Every verb takes --config <file>; validate-oracle and asymptotics fall
back to built-in defaults without one.  --seed and --out override the
config's master seed and output directory.
"""

import argparse
import sys
from dataclasses import asdict

from .errors import LocalestError
from .harness import (
    EstimateJob,
    ExperimentConfig,
    load_config,
    load_estimate_job,
    run,
    run_estimate,
    run_simulate,
)

_VALIDATE_DEFAULTS = ExperimentConfig(
    study="validate-oracle",
    theta="constant(1)",
    solver="oracle",
    x0_initial="stationary",
    delta_list=(0.2, 0.1, 0.05),
    kernels=("k1",),
    output_dir="out-validate",
)

_ASYMPTOTICS_DEFAULTS = ExperimentConfig(
    study="asymptotics-table",
    theta="constant(1)",
    kernels=("k1", "k2"),
    delta_list=(0.1,),
    output_dir="out-asymptotics",
)


def _override(config, args, study=None):
    fields = asdict(config)
    if study is not None:
        fields["study"] = study
    if args.seed is not None:
        fields["seed"] = args.seed
    if args.out is not None:
        fields["output_dir"] = args.out
    return ExperimentConfig(**fields)


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="localest",
        description="Simulation and local estimation of a variable-"
                    "diffusivity stochastic heat equation on (0, 1).",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    descriptions = {
        "simulate": "simulate one replication and store measurement CSVs",
        "estimate": "estimate diffusivity from stored measurement CSVs",
        "experiment": "run the configured study end to end",
        "validate-oracle": "run closed-form identity checks",
        "asymptotics": "tabulate estimator constants per kernel",
    }
    for name, text in descriptions.items():
        cmd = sub.add_parser(name, help=text)
        cmd.add_argument("--config", default=None, metavar="FILE",
                         help="experiment config file")
        cmd.add_argument("--seed", type=int, default=None,
                         help="override the master seed")
        cmd.add_argument("--out", default=None, metavar="DIR",
                         help="override the output directory")
    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except LocalestError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


def _dispatch(args):
    command = args.command
    if command == "estimate":
        if args.config is None:
            raise LocalestError("estimate needs --config with an [estimate] "
                                "section")
        job = load_estimate_job(args.config)
        if args.out is not None:
            fields = asdict(job)
            fields["output_dir"] = args.out
            job = EstimateJob(**fields)
        return run_estimate(job)
    if command in ("simulate", "experiment"):
        if args.config is None:
            raise LocalestError(f"{command} needs --config")
        config = _override(load_config(args.config), args)
        return run_simulate(config) if command == "simulate" else run(config)
    if command == "validate-oracle":
        base = load_config(args.config) if args.config else _VALIDATE_DEFAULTS
        return run(_override(base, args, study="validate-oracle"))
    if command == "asymptotics":
        base = load_config(args.config) if args.config \
            else _ASYMPTOTICS_DEFAULTS
        return run(_override(base, args, study="asymptotics-table"))
    raise LocalestError(f"unknown command {command!r}")


if __name__ == "__main__":
    sys.exit(main())
