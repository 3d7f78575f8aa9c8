"""Desk-scale sample-efficiency benchmark: DDPG+PModL_BC against plain DDPG.

For each seed the PModL run stops at its first evaluation with SR >= 0.8
(step S_p). The paired DDPG run is then halted at 2 * S_p: whether DDPG gets
there by then is all the comparison needs, and it saves hours of CPU time.
If PModL never reaches the bar, DDPG runs the full budget.

Existing run directories that carry a ``run_info.json`` are reused, so the
benchmark can be resumed after an interruption.

    python3 demos/sample_efficiency.py --out benchmarks/sample_efficiency
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import shutil
import time
from dataclasses import replace
from pathlib import Path

from pmodl.harness import make_config, train

THRESHOLD = 0.8
OVERRIDES = {"stop_at_sr": THRESHOLD, "record_trajectories": False}


def first_hit(run_dir: Path):
    with open(run_dir / "evals.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            if float(row["sr"]) >= THRESHOLD:
                return int(row["step"])
    return None


def _prune_checkpoints(run_dir: Path) -> None:
    ckpts = sorted((run_dir / "checkpoints").glob("step_*.npz"))
    for path in ckpts[:-1]:
        path.unlink()


def run_one(out: Path, algorithm: str, seed: int, halt_step=None) -> dict:
    run_dir = out / f"{algorithm}_{seed}"
    info_path = run_dir / "run_info.json"
    if info_path.exists():
        return json.loads(info_path.read_text())
    if run_dir.exists():
        shutil.rmtree(run_dir)
    cfg = make_config("desk", OVERRIDES | {"algorithm": algorithm, "seed": seed})
    if halt_step is not None:
        cfg = replace(cfg, halt_step=halt_step)
    t0 = time.perf_counter()
    trainer = train(cfg, run_dir)
    info = {
        "algorithm": algorithm,
        "seed": seed,
        "halt_step": halt_step,
        "final_step": trainer.step,
        "first_hit": first_hit(run_dir),
        "wall_seconds": round(time.perf_counter() - t0, 1),
    }
    _prune_checkpoints(run_dir)
    info_path.write_text(json.dumps(info, indent=2) + "\n")
    return info


def run_benchmark(out, seeds=(0, 1, 2)) -> dict:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    budget = make_config("desk").total_steps
    runs, pairs = [], []
    for seed in seeds:
        p = run_one(out, "ddpg_pmodl_bc", seed)
        halt = None if p["first_hit"] is None else min(budget, 2 * p["first_hit"])
        d = run_one(out, "ddpg", seed, halt)
        runs += [p, d]
        won = p["first_hit"] is not None and (d["first_hit"] is None or p["first_hit"] <= d["first_hit"] / 2)
        pairs.append({"seed": seed, "pmodl_first_hit": p["first_hit"], "ddpg_first_hit": d["first_hit"], "ddpg_last_step": d["final_step"], "pmodl_wins": won})
        logging.info("seed %d: PModL %s, DDPG %s (stopped at %d)", seed, p["first_hit"], d["first_hit"], d["final_step"])
    summary = {
        "threshold": THRESHOLD,
        "total_steps": budget,
        "seeds": list(seeds),
        "overrides": OVERRIDES,
        "pairs": pairs,
        "wins": sum(p["pmodl_wins"] for p in pairs),
        "wall_seconds": round(sum(r["wall_seconds"] for r in runs), 1),
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return summary


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="benchmarks/sample_efficiency")
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    summary = run_benchmark(args.out, tuple(args.seeds))
    print(json.dumps(summary["pairs"], indent=2))
    print(f"PModL_BC at most half of DDPG's steps in {summary['wins']}/{len(summary['pairs'])} pairs")


if __name__ == "__main__":
    main()
