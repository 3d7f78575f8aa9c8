"""Command-line entry point: ``train``, ``eval``, ``expert-run`` and ``export``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from ..errors import ExportError, UsageError
from .config import ALGORITHMS, PRESETS, apply_overrides, load_config, make_config, parse_lambda_mode
from .evaluate import evaluate, expert_run
from .export import export_plots_data
from .train import Trainer, config_from_checkpoint


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pmodl", description="Performance-modulated RL + imitation for local planning.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress at INFO level")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="run a training job")
    t.add_argument("--config", help="YAML config file (its 'preset' key selects desk or paper)")
    t.add_argument("--preset", choices=sorted(PRESETS), help="base preset when no config file sets one")
    t.add_argument("--seed", type=int)
    t.add_argument("--algo", choices=ALGORITHMS)
    t.add_argument("--lambda", dest="lambda_mode", help="'adaptive' or 'fixed:<value>'")
    t.add_argument("--steps", type=int, help="total step budget")
    t.add_argument("--out", help="run directory")
    t.add_argument("--resume", help="checkpoint to continue from")

    e = sub.add_parser("eval", help="evaluate a checkpoint")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--map", help="bundled map name or .map file (default: the run's eval map)")
    e.add_argument("--episodes", type=int, default=100)
    e.add_argument("--seed", type=int, default=0)

    x = sub.add_parser("expert-run", help="closed-loop pure pursuit rollouts")
    x.add_argument("--map", help="bundled map name or .map file (default: the preset's training map)")
    x.add_argument("--episodes", type=int, default=100)
    x.add_argument("--seed", type=int, default=0)
    x.add_argument("--preset", choices=sorted(PRESETS), default="desk")

    s = sub.add_parser("export", help="write plot-ready CSV tables for a run directory")
    s.add_argument("--run", required=True)
    s.add_argument("--out", help="output directory (default: <run>/export)")
    return p


def _report_json(report) -> str:
    return json.dumps(report.summary(), indent=2)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "train":
            overrides = {}
            for key in ("seed", "lambda_mode", "out"):
                val = getattr(args, key)
                if val is not None:
                    overrides["out_dir" if key == "out" else key] = val
            if args.algo:
                overrides["algorithm"] = args.algo
            if args.steps is not None:
                overrides["total_steps"] = args.steps
            if args.lambda_mode is not None:
                parse_lambda_mode(args.lambda_mode)
            if args.config:
                if args.preset:
                    overrides["preset"] = args.preset
                cfg = load_config(args.config, overrides)
            elif args.resume:
                cfg = apply_overrides(config_from_checkpoint(args.resume), overrides)
            else:
                cfg = make_config(args.preset or "desk", overrides)
            trainer = Trainer(cfg).run(resume_from=args.resume)
            print(f"finished at step {trainer.step}; artifacts in {trainer.paths.root}")
            if trainer.last_report is not None:
                print(_report_json(trainer.last_report))
        elif args.command == "eval":
            print(_report_json(evaluate(args.checkpoint, args.map, args.episodes, args.seed)))
        elif args.command == "expert-run":
            cfg = make_config(args.preset)
            print(_report_json(expert_run(cfg, args.episodes, args.seed, args.map)))
        elif args.command == "export":
            for name, path in export_plots_data(args.run, args.out).items():
                print(f"{name}: {path}")
    except (UsageError, ExportError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
