#!/usr/bin/env python3

import argparse
import logging
import os
import sys
from typing import List, Optional

import numpy as np
import yaml
from tabulate import tabulate

from pmc import __version__
from pmc.errors import ConfigError, DatasetParseError, SchemaError, SpecError
from pmc.home import home
from pmc.models import load_ensemble, load_generator
from pmc.orchestration.generate_conf import load_benchmark_spec, load_experiment
from pmc.run_experiment import run_experiment
from pmc.scripts import final_results
from pmc.synthdata import drop_modality, generate_benchmark, load, save
from pmc.synthdata.benchmark import summarize_spec
from pmc.trainers import fused_probs, impute_target

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3
CONFIG_ERRORS = (ConfigError, SpecError, SchemaError, DatasetParseError, yaml.YAMLError)


def _require_file(path: str, what: str):
    if not os.path.isfile(path):
        raise ConfigError(f"{what} not found: {path}")


def cmd_gen_data(args) -> int:
    spec_path = args.spec or os.path.join(home(dataDir="template"), "blobs_mm2.yaml")
    _require_file(spec_path, "benchmark spec")
    spec = load_benchmark_spec(spec_path)
    if args.seed is not None:
        spec = type(spec).from_dict({**spec.to_dict(), "seed": args.seed})
    dataset = generate_benchmark(spec)
    if args.drop:
        dataset = drop_modality(dataset, args.drop)
    save(dataset, args.out)
    print(f"{spec.name}: {dataset.n_source} source / {dataset.n_target} target samples, "
          f"{spec.n_classes} categories, seed {spec.seed} -> {args.out}")
    print(tabulate(summarize_spec(spec),
                   headers=["modality", "dim", "informativeness", "rotation", "|translation|", "scale", "derived_from"]))
    return EXIT_OK


def cmd_train(args) -> int:
    _require_file(args.config, "experiment config")
    overrides = {}
    if args.output_dir:
        overrides["output_dir"] = os.path.abspath(args.output_dir)
    if args.workers:
        overrides["workers"] = args.workers
    experiment = load_experiment(args.config, overrides)
    final_path, detailed_path = run_experiment(experiment)
    print(f"writing out: {final_path}\n\t{detailed_path}")
    table, _ = final_results.report([experiment.output_dir], experiment.output_dir)
    print(table)
    return EXIT_OK


def cmd_report(args) -> int:
    for run_dir in args.runs:
        if not os.path.isdir(run_dir):
            raise ConfigError(f"run directory not found: {run_dir}")
    table, out_path = final_results.report(args.runs, args.out_dir, plot=args.plot)
    print(table)
    print(f"writing out: {out_path}")
    return EXIT_OK


def cmd_impute(args) -> int:
    _require_file(args.dataset, "dataset")
    _require_file(args.generator, "generator checkpoint")
    dataset = load(args.dataset)
    generator = load_generator(args.generator)
    if generator.missing not in dataset.schema.missing:
        raise SchemaError(f"generator produces '{generator.missing}' but the dataset is missing "
                          f"{list(dataset.schema.missing)}")
    if args.ensemble:
        _require_file(args.ensemble, "ensemble checkpoint")
        ensemble = load_ensemble(args.ensemble)
        v = fused_probs(ensemble, dataset.target.payloads, dataset.schema.target_names)
    else:
        n_classes = dataset.schema.n_classes
        v = np.full((dataset.n_target, n_classes), 1.0 / n_classes)
    save(impute_target(dataset, generator, v), args.out)
    print(f"imputed '{generator.missing}' for {dataset.n_target} target samples -> {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pmc-lab",
                                     description="Progressive modality cooperation on synthetic multi-modality benchmarks")
    parser.add_argument('-v', '--verbose', help='log progress (INFO)', action='store_true')
    parser.add_argument('--debug', help='log everything (DEBUG)', action='store_true')
    parser.add_argument('--version', action='version', version=f"pmc: {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-data", help="generate a benchmark dataset file")
    gen.add_argument('-s', '--spec', help='benchmark spec YAML (default: packaged blobs-mm2)', required=False,
                     default=None, type=str)
    gen.add_argument('-o', '--out', help='output dataset path', required=True, type=str)
    gen.add_argument('--seed', help='override the spec seed', required=False, default=None, type=int)
    gen.add_argument('--drop', help='remove this modality from every target sample', required=False,
                     default=None, type=str)
    gen.set_defaults(func=cmd_gen_data)

    train = sub.add_parser("train", help="train every seed of an experiment file and aggregate the results")
    train.add_argument('-c', '--config', help='experiment YAML file', required=True, type=str)
    train.add_argument('-o', '--output_dir', help='override the output directory', required=False, default=None, type=str)
    train.add_argument('-j', '--workers', help='parallel seed workers', required=False, default=None, type=int)
    train.set_defaults(func=cmd_train)

    rep = sub.add_parser("report", help="compare finished experiment directories")
    rep.add_argument('runs', nargs='+', help='experiment directories; the first one is the delta reference')
    rep.add_argument('-o', '--out_dir', help='where to write report.tsv', required=False, default='.', type=str)
    rep.add_argument('--plot', help='also write report.png with accuracy and proportion curves', action='store_true')
    rep.set_defaults(func=cmd_report)

    imp = sub.add_parser("impute", help="fill the missing target modality of a dataset with a trained generator")
    imp.add_argument('-d', '--dataset', help='dataset file with a missing target modality', required=True, type=str)
    imp.add_argument('-g', '--generator', help='generator checkpoint (generator.npz)', required=True, type=str)
    imp.add_argument('-e', '--ensemble', help='ensemble checkpoint used to condition on pseudo-label probabilities',
                     required=False, default=None, type=str)
    imp.add_argument('-o', '--out', help='output dataset path', required=True, type=str)
    imp.set_defaults(func=cmd_impute)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return int(err.code or 0)

    level = logging.DEBUG if args.debug else logging.INFO if args.verbose else logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except CONFIG_ERRORS as err:
        print(f"pmc-lab {args.command}: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as err:
        logger.debug("command failed", exc_info=True)
        print(f"pmc-lab {args.command}: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_RUNTIME


def pmc_lab():
    sys.exit(main())


if __name__ == "__main__":
    pmc_lab()
