"""Command-line interface.

Subcommands: gen, train, explain, eval, report, plants list.
Exit codes: 0 success, 2 configuration error, 3 nothing to explain,
4 simulation divergence.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .learn import model_from_json
from .pipeline import (NothingToExplain, run_eval, run_explain, run_gen,
                       run_report, run_train, threads_from_env)
from .plants import SimulationDiverged, get_plant, plant_names
from .testgen import TrainingSet

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NOTHING = 3
EXIT_DIVERGED = 4


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="YAML configuration file")
    p.add_argument("--seed", type=int, help="master seed (default 17)")
    p.add_argument("--plant", choices=plant_names(), help="plant name")
    p.add_argument("--requirement", help="requirement id")
    p.add_argument("--generator", choices=["rs", "ga", "kd"],
                   help="counterfactual generator")
    p.add_argument("--model", choices=["m5", "rf"], help="causal model type")
    p.add_argument("--out", help="output directory (default 'out')")
    p.add_argument("--retain", choices=["best", "all-evaluated"],
                   help="which evaluated inputs to keep during gen")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="decaf",
        description="Counterfactual-guided debugging for simulated "
                    "cyber-physical systems")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("gen", "generate a labeled training set via annealing"),
        ("train", "train a causal model from a training set"),
        ("explain", "generate counterfactuals and infer assertions"),
        ("eval", "aggregate per-configuration metrics into tables"),
        ("report", "re-render the human-readable report"),
    ]:
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
    plants = sub.add_parser("plants", help="plant registry commands")
    plants_sub = plants.add_subparsers(dest="plants_command", required=True)
    plants_sub.add_parser("list", help="list built-in plants")
    return parser


def _config_from_args(args) -> "RunConfig":
    return load_config(args.config, seed=args.seed, plant=args.plant,
                       requirement=args.requirement, generator=args.generator,
                       model=args.model, out=args.out, retain=args.retain)


def _cell_dir(cfg) -> Path:
    return Path(cfg.out) / f"{cfg.generator}-{cfg.model}"


def _load_training(cfg) -> TrainingSet:
    path = _cell_dir(cfg) / "training.csv"
    if not path.exists():
        raise ConfigError(f"no training set at {path}; run 'decaf gen' first")
    plant, _ = get_plant(cfg.plant)
    return TrainingSet.from_csv(path.read_text(), plant.input_spec)


def cmd_gen(args) -> int:
    cfg = _config_from_args(args)
    ts = run_gen(cfg, _cell_dir(cfg))
    print(f"wrote {len(ts.rows)} rows ({ts.n_fail} failing) to "
          f"{_cell_dir(cfg) / 'training.csv'}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _config_from_args(args)
    ts = _load_training(cfg)
    run_train(cfg, ts, _cell_dir(cfg))
    metrics = json.loads((_cell_dir(cfg) / "metrics.json").read_text())
    print(f"trained {cfg.model} model; holdout accuracy "
          f"{metrics['accuracy']:.3f}")
    return EXIT_OK


def cmd_explain(args) -> int:
    cfg = _config_from_args(args)
    cell = _cell_dir(cfg)
    ts = _load_training(cfg)
    model_path = cell / "model.json"
    if not model_path.exists():
        raise ConfigError(f"no model at {model_path}; run 'decaf train' first")
    cm = model_from_json(model_path.read_text())
    result = run_explain(cfg, ts, cm, cell, threads=threads_from_env())
    repaired = sum(1 for r in result.records if r.valid > 0)
    print(f"explained {len(result.records)} failing inputs; "
          f"{repaired} repaired; report at {cell / 'report.md'}")
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _config_from_args(args)
    summary = run_eval(cfg.out)
    print(f"wrote {Path(cfg.out) / 'table_configs.csv'} "
          f"({len(summary['comparisons'])} comparisons)")
    return EXIT_OK


def cmd_report(args) -> int:
    cfg = _config_from_args(args)
    cell = _cell_dir(cfg)
    if not (cell / "report.json").exists():
        raise ConfigError(f"no report.json in {cell}; run 'decaf explain' first")
    run_report(cell)
    print(f"rendered {cell / 'report.md'}")
    return EXIT_OK


def cmd_plants_list(_args) -> int:
    for name in plant_names():
        plant, reqs = get_plant(name)
        sigs = ", ".join(
            f"{s.name}[{s.n_points}x({s.range_lo},{s.range_hi})]"
            for s in plant.input_spec.signals)
        print(f"{name}: horizon {plant.input_spec.horizon}, inputs {sigs}")
        for r in reqs:
            print(f"  {r.id}: {r.formula} ({r.description})")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {"gen": cmd_gen, "train": cmd_train, "explain": cmd_explain,
                "eval": cmd_eval, "report": cmd_report}
    try:
        if args.command == "plants":
            return cmd_plants_list(args)
        return handlers[args.command](args)
    except ConfigError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except NothingToExplain as e:
        print(f"nothing to explain: {e}", file=sys.stderr)
        return EXIT_NOTHING
    except SimulationDiverged as e:
        print(f"simulation diverged: {e}", file=sys.stderr)
        return EXIT_DIVERGED
    except RuntimeError as e:
        # data generation found zero failing inputs
        print(f"nothing to explain: {e}", file=sys.stderr)
        return EXIT_NOTHING


if __name__ == "__main__":
    sys.exit(main())
