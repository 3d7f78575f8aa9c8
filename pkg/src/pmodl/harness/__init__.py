"""Configuration, training loop, evaluation, export and the command-line interface."""

from .config import (
    ALGORITHMS,
    PRESETS,
    RunConfig,
    build_env,
    dump_config,
    load_config,
    make_config,
    parse_lambda_mode,
    substream,
)
from .evaluate import EpisodeRecord, EvalReport, Evaluator, compute_spl, evaluate, evaluate_actor, expert_run
from .train import Trainer, train

__all__ = [
    "ALGORITHMS",
    "EpisodeRecord",
    "EvalReport",
    "Evaluator",
    "PRESETS",
    "RunConfig",
    "Trainer",
    "build_env",
    "compute_spl",
    "dump_config",
    "evaluate",
    "evaluate_actor",
    "expert_run",
    "load_config",
    "make_config",
    "parse_lambda_mode",
    "substream",
    "train",
]
