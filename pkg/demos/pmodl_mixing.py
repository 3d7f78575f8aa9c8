"""Watch the PModL modulator at work on a short desk-scale run.

    python3 demos/pmodl_mixing.py [steps] [out_dir]

z is the success rate over the last 100 episodes (starting from an empty,
zero-filled ring, so it under-estimates early on). lambda grows until the
scaled imitation gradient norm lam*g_IL matches the RL one, g_RL. Early in
training z is near 0 and the actor mostly imitates the expert. As the
agent starts succeeding, weight shifts to the RL objective.
"""

from __future__ import annotations

import json
import sys
import tempfile
from pathlib import Path

from pmodl.harness import make_config, train


def main(steps: int = 3000, out: str | None = None) -> None:
    run_dir = Path(out or tempfile.mkdtemp(prefix="pmodl_mixing_"))
    cfg = make_config(
        "desk",
        {
            "algorithm": "ddpg_pmodl_bc",
            "total_steps": steps,
            "eval_interval": max(steps // 2, 1),
            "eval_episodes": 10,
            "log_interval": max(steps // 15, 1),
            "record_trajectories": False,
        },
    )
    print(f"training {steps} steps into {run_dir} ...")
    train(cfg, run_dir)

    print(f"{'step':>6} {'episodes':>8} {'z':>6} {'lambda':>8} {'g_RL':>9} {'lam*g_IL':>9} {'J_IL':>8}")
    for line in (run_dir / "steps.jsonl").read_text().splitlines():
        r = json.loads(line)
        if r["lam"] is None:
            continue
        print(
            f"{r['step']:>6} {r['episodes']:>8} {r['z']:>6.3f} {r['lam']:>8.3f} "
            f"{r['g_rl']:>9.4f} {r['lam_g_il']:>9.4f} {r['j_il']:>8.4f}"
        )
    print((run_dir / "evals.csv").read_text())


if __name__ == "__main__":
    args = sys.argv[1:]
    main(int(args[0]) if args else 3000, args[1] if len(args) > 1 else None)
