"""Flatten a run directory into plot-ready CSV tables.

Schemas (one header row each):

``eval_series.csv``
    step, sr, cr, tr, spl, return_mean, return_std, steps_mean, steps_std
``training_series.csv``
    step, j_rl, j_il, critic_loss, g_rl, lam_g_il, lam, z, noise_decay, reward, r_fov, r_danger
``trajectories.csv``
    eval_step, episode, outcome, t, x, y, theta  (outcome in success/collision/timeout)

Empty cells mark quantities an algorithm does not produce (for example lam for DDPG).
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

from ..errors import ExportError

EVAL_COLUMNS = ["step", "sr", "cr", "tr", "spl", "return_mean", "return_std", "steps_mean", "steps_std"]
TRAINING_COLUMNS = [
    "step",
    "j_rl",
    "j_il",
    "critic_loss",
    "g_rl",
    "lam_g_il",
    "lam",
    "z",
    "noise_decay",
    "reward",
    "r_fov",
    "r_danger",
]
TRAJECTORY_COLUMNS = ["eval_step", "episode", "outcome", "t", "x", "y", "theta"]


def _cell(v):
    return "" if v is None else v


def export_plots_data(run_dir, out_dir=None) -> dict[str, Path]:
    """Write the three series tables; returns their paths keyed by series name."""
    run = Path(run_dir)
    sources = {
        "eval": run / "evals.csv",
        "training": run / "steps.jsonl",
        "trajectories": run / "trajectories.csv",
    }
    missing = [f"{name} ({path.name})" for name, path in sources.items() if not path.exists()]
    if missing:
        raise ExportError(f"run directory {run} lacks: {', '.join(missing)}")
    out = Path(out_dir) if out_dir is not None else run / "export"
    out.mkdir(parents=True, exist_ok=True)
    written = {}

    with open(sources["eval"], newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    written["eval"] = _write(out / "eval_series.csv", EVAL_COLUMNS, ([r.get(c, "") for c in EVAL_COLUMNS] for r in rows))

    with open(sources["training"], encoding="utf-8") as fh:
        recs = [json.loads(line) for line in fh if line.strip()]
    written["training"] = _write(
        out / "training_series.csv",
        TRAINING_COLUMNS,
        ([_cell(r.get(c)) for c in TRAINING_COLUMNS] for r in recs),
    )

    with open(sources["trajectories"], newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    written["trajectories"] = _write(
        out / "trajectories.csv", TRAJECTORY_COLUMNS, ([r[c] for c in TRAJECTORY_COLUMNS] for r in rows)
    )
    return written


def _write(path: Path, header, rows) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path
