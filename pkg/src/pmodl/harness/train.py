"""The outer training loop for every algorithm, with logging, evaluation and checkpoints."""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..agents import (
    ActorCritic,
    FeedbackSample,
    OUNoise,
    PModLState,
    ReplayBuffer,
    Transition,
    actor_pmodl_update,
    critic_update,
    ddpg_actor_update,
    record_outcome,
    soft_update_targets,
    supervised_update,
)
from ..env import COLLISION, SUCCESS, TERMINAL_STATUSES, TIMEOUT
from ..errors import EpisodeSamplingError, PlanningError
from ..expert import Expert, coach_feedback
from ..neural import load_checkpoint, save_checkpoint
from .config import (
    PMODL_ALGORITHMS,
    RL_ALGORITHMS,
    RunConfig,
    apply_overrides,
    build_env,
    dump_config,
    make_config,
    substream,
)
from .evaluate import EvalReport, Evaluator, actor_policy

log = logging.getLogger(__name__)

STEP_FIELDS = [
    "step",
    "episodes",
    "j_rl",
    "j_il",
    "critic_loss",
    "g_rl",
    "lam_g_il",
    "lam",
    "z",
    "noise_decay",
    "reward",
    "r_speed",
    "r_target",
    "r_fov",
    "r_danger",
    "successes",
    "collisions",
    "timeouts",
]
EVAL_FIELDS = [
    "step",
    "episodes",
    "skipped",
    "sr",
    "sr_std",
    "cr",
    "cr_std",
    "tr",
    "tr_std",
    "spl",
    "spl_std",
    "return_mean",
    "return_std",
    "steps_mean",
    "steps_std",
]
TRAJECTORY_FIELDS = ["eval_step", "episode", "outcome", "t", "x", "y", "theta"]


def _fmt(x):
    """NaN (an unpopulated quantity) becomes null in JSON and an empty CSV cell."""
    if isinstance(x, float) and math.isnan(x):
        return None
    return x


@dataclass
class _Interval:
    """Running sums for one logging interval."""

    sums: dict = field(default_factory=dict)
    counts: dict = field(default_factory=dict)
    outcomes: dict = field(default_factory=lambda: {SUCCESS: 0, COLLISION: 0, TIMEOUT: 0})

    def add(self, key, value):
        if value is None or (isinstance(value, float) and math.isnan(value)):
            return
        self.sums[key] = self.sums.get(key, 0.0) + float(value)
        self.counts[key] = self.counts.get(key, 0) + 1

    def mean(self, key):
        n = self.counts.get(key, 0)
        return self.sums[key] / n if n else None


@dataclass
class RunPaths:
    root: Path

    @property
    def steps(self):
        return self.root / "steps.jsonl"

    @property
    def evals(self):
        return self.root / "evals.csv"

    @property
    def trajectories(self):
        return self.root / "trajectories.csv"

    @property
    def config(self):
        return self.root / "config.yaml"

    @property
    def diagnostics(self):
        return self.root / "diagnostics.json"

    @property
    def checkpoints(self):
        return self.root / "checkpoints"

    def checkpoint(self, step: int) -> Path:
        return self.checkpoints / f"step_{step:08d}.npz"


class Trainer:
    """Single-threaded, seeded implementation of the training protocol."""

    def __init__(self, cfg: RunConfig, out_dir=None):
        self.cfg = cfg
        self.paths = RunPaths(Path(out_dir if out_dir is not None else cfg.out_dir))
        self.algo = cfg.algorithm
        self.rl = self.algo in RL_ALGORITHMS
        self.pmodl_mode = self.algo in PMODL_ALGORITHMS
        self.uses_bc = self.algo in ("dagger", "ddpg_pmodl_bc")
        self.uses_coach = self.algo in ("coach", "ddpg_pmodl_coach")

        self.env = build_env(cfg, cfg.train_map)
        eval_map = cfg.periodic_eval_map or cfg.train_map
        self.eval_env = self.env if eval_map == cfg.train_map else build_env(cfg, eval_map)
        self.bounds = self.env.bounds
        self.expert = Expert(self.env.planner, cfg.pursuit, self.bounds)

        self.env_rng = substream(cfg.seed, "env")
        self.noise_rng = substream(cfg.seed, "noise")
        self.buffer_rng = substream(cfg.seed, "buffers")
        init_rng = substream(cfg.seed, "init")
        self.eval_seed = int(substream(cfg.seed, "eval").integers(2**31))

        actor_arch = cfg.network.architecture("actor", cfg.episode)
        critic_arch = cfg.network.architecture("critic", cfg.episode)
        actor_lr = None if self.rl else cfg.imitation.lr
        self.nets = ActorCritic.create(actor_arch, critic_arch, cfg.ddpg, init_rng, actor_lr=actor_lr)
        self.noise = OUNoise(
            dim=2,
            mu=cfg.noise.mu,
            sigma=cfg.noise.sigma,
            theta=cfg.noise.theta,
            dt=cfg.noise.dt,
            decay_start=cfg.noise.decay_start,
            decay_end=cfg.noise.decay_end,
            decay_fraction=cfg.noise.decay_fraction,
        )
        fixed = cfg.fixed_lambda
        self.pmodl = PModLState(
            capacity=cfg.pmodl.k_sr,
            lam=cfg.pmodl.lam_init if fixed is None else fixed,
            lam_min=cfg.pmodl.lam_min,
            lr=cfg.pmodl.lam_lr,
        )
        self.adaptive = fixed is None
        self.replay = ReplayBuffer(cfg.ddpg.buffer_capacity) if self.rl else None
        if self.uses_bc:
            self.dataset = ReplayBuffer(cfg.imitation.dagger_capacity)
        elif self.uses_coach:
            self.dataset = ReplayBuffer(cfg.coach.capacity)
        else:
            self.dataset = None
        self.il_batch = cfg.ddpg.batch_size if self.pmodl_mode else cfg.imitation.batch_size

        self.evaluator = Evaluator(self.eval_env, cfg.eval_episodes, self.eval_seed)
        self.step = 0
        self.episodes = 0
        self.state = None
        self.obs = None
        self.interval = _Interval()
        self.diagnostics = {"reset_failures": 0, "expert_failures": 0}
        self.last_report: EvalReport | None = None

    # ------------------------------------------------------------------ setup
    def _open_logs(self, resume: bool):
        self.paths.root.mkdir(parents=True, exist_ok=True)
        self.paths.checkpoints.mkdir(exist_ok=True)
        dump_config(self.cfg, self.paths.config)
        mode = "a" if resume else "w"
        self._steps_fh = open(self.paths.steps, mode, encoding="utf-8")
        new_evals = not (resume and self.paths.evals.exists())
        self._evals_fh = open(self.paths.evals, "a" if not new_evals else "w", newline="", encoding="utf-8")
        self._evals = csv.writer(self._evals_fh, lineterminator="\n")
        if new_evals:
            self._evals.writerow(EVAL_FIELDS)
        new_traj = not (resume and self.paths.trajectories.exists())
        self._traj_fh = open(self.paths.trajectories, "a" if not new_traj else "w", newline="", encoding="utf-8")
        self._traj = csv.writer(self._traj_fh, lineterminator="\n")
        if new_traj:
            self._traj.writerow(TRAJECTORY_FIELDS)

    def _close_logs(self):
        for fh in (self._steps_fh, self._evals_fh, self._traj_fh):
            fh.close()
        self.paths.diagnostics.write_text(json.dumps(self.diagnostics, indent=2, sort_keys=True) + "\n")

    # ------------------------------------------------------------------ episode handling
    def _start_episode(self):
        while True:
            try:
                self.state, self.obs = self.env.reset(self.env_rng)
                break
            except EpisodeSamplingError as exc:
                self.diagnostics["reset_failures"] += 1
                if self.diagnostics["reset_failures"] > 100:
                    raise
                log.warning("episode reset failed, resampling: %s", exc)
        self.noise.reset()

    def _end_episode(self, status: str):
        record_outcome(self.pmodl, status == SUCCESS)
        self.episodes += 1
        self.interval.outcomes[status] += 1
        self.state = None
        self.obs = None

    # ------------------------------------------------------------------ one step
    def train_step(self) -> None:
        cfg = self.cfg
        if self.state is None:
            self._start_episode()
        state, obs = self.state, self.obs
        z = self.pmodl.z
        a_pi = self.nets.act(obs).astype(float)
        decay = math.nan
        if self.rl:
            decay = self.noise.decay(self.step, cfg.total_steps)
            action = self.bounds.clip(a_pi + decay * self.noise.advance(self.noise_rng))
        else:
            action = self.bounds.clip(a_pi)

        if self.dataset is not None:
            try:
                a_exp = self.expert(state.pose, state.target)
            except PlanningError as exc:
                a_exp = None
                self.diagnostics["expert_failures"] += 1
                log.warning("expert failed at step %d: %s", self.step, exc)
            if a_exp is not None:
                if self.uses_bc:
                    self.dataset.push(FeedbackSample(obs, a_exp))
                else:
                    h = coach_feedback(a_exp, action, cfg.coach)
                    self.dataset.push(FeedbackSample(obs, action, h))

        next_obs, reward, next_state = self.env.step(state, action)
        if self.rl:
            self.replay.push(Transition(obs, action, reward, next_obs, next_state.status in TERMINAL_STATUSES))
        self._update(z)

        iv = self.interval
        iv.add("reward", reward)
        for key, value in zip(("r_speed", "r_target", "r_fov", "r_danger"), next_state.terms):
            iv.add(key, value)
        iv.add("z", z)
        iv.add("noise_decay", decay)

        self.step += 1
        if next_state.done:
            self._end_episode(next_state.status)
        else:
            self.state, self.obs = next_state, next_obs

    def _update(self, z: float):
        cfg, iv = self.cfg, self.interval
        if self.rl:
            if len(self.replay) < max(cfg.effective_warmup, 1):
                return
            batch = self.replay.sample(cfg.ddpg.batch_size, self.buffer_rng)
            iv.add("critic_loss", critic_update(self.nets, batch, cfg.ddpg.gamma))
            if self.pmodl_mode and len(self.dataset):
                il_batch = self.dataset.sample(self.il_batch, self.buffer_rng)
                stats = actor_pmodl_update(
                    self.nets,
                    batch,
                    il_batch,
                    self.pmodl,
                    z,
                    self.bounds,
                    coach_error=cfg.coach.error if self.uses_coach else None,
                    adaptive=self.adaptive,
                )
                iv.add("lam", stats.lam)
                iv.add("lam_g_il", stats.lam * stats.g_il)
                iv.add("j_il", stats.j_il)
            else:
                stats = ddpg_actor_update(self.nets, batch)
            iv.add("j_rl", stats.j_rl)
            iv.add("g_rl", stats.g_rl)
            soft_update_targets(self.nets, cfg.ddpg.tau)
        elif len(self.dataset):
            samples = self.dataset.sample(self.il_batch, self.buffer_rng)
            stats = supervised_update(
                self.nets.actor,
                self.nets.actor_opt,
                samples,
                self.bounds,
                coach_error=cfg.coach.error if self.uses_coach else None,
            )
            iv.add("j_il", stats.j_il)

    # ------------------------------------------------------------------ logging
    def _flush_interval(self):
        iv = self.interval
        rec = {"step": self.step, "episodes": self.episodes}
        for key in STEP_FIELDS[2:-3]:
            rec[key] = _fmt(iv.mean(key))
        rec["successes"] = iv.outcomes[SUCCESS]
        rec["collisions"] = iv.outcomes[COLLISION]
        rec["timeouts"] = iv.outcomes[TIMEOUT]
        self._steps_fh.write(json.dumps(rec) + "\n")
        self._steps_fh.flush()
        self.interval = _Interval()

    def evaluate_now(self) -> EvalReport:
        record = self.cfg.record_trajectories
        report = self.evaluator.run(actor_policy(self.nets.actor), record_paths=record)
        summary = report.summary()
        row = [self.step] + [_fmt(summary[k]) for k in EVAL_FIELDS[1:]]
        self._evals.writerow(["" if v is None else v for v in row])
        if record:
            for i, rec in enumerate(report.records):
                for t, (x, y, th) in enumerate(rec.path):
                    self._traj.writerow([self.step, i, rec.outcome, t, repr(x), repr(y), repr(th)])
        self._evals_fh.flush()
        self._traj_fh.flush()
        self.last_report = report
        return report

    # ------------------------------------------------------------------ checkpoints
    def save(self, path=None) -> Path:
        path = Path(path) if path is not None else self.paths.checkpoint(self.step)
        extra = {
            "config": self.cfg.to_dict(),
            "step": self.step,
            "episodes": self.episodes,
            "lam": self.pmodl.lam,
            "pmodl_cursor": self.pmodl.cursor,
            "pmodl_recorded": self.pmodl.recorded,
            "pmodl_slots": self.pmodl.slots.copy(),
        }
        extra.update(self.nets.actor_opt.state_arrays("actor_opt"))
        extra.update(self.nets.critic_opt.state_arrays("critic_opt"))
        save_checkpoint(
            path,
            {
                "actor": self.nets.actor,
                "critic": self.nets.critic,
                "target_actor": self.nets.target_actor,
                "target_critic": self.nets.target_critic,
            },
            extra,
        )
        return path

    def restore(self, path) -> None:
        """Load networks, optimizer moments, PModL state and the step counter (buffers start empty)."""
        networks, extra = load_checkpoint(path)
        self.nets.actor = networks["actor"]
        self.nets.critic = networks["critic"]
        self.nets.target_actor = networks["target_actor"]
        self.nets.target_critic = networks["target_critic"]
        self.nets.actor_opt.load_state_arrays("actor_opt", extra)
        self.nets.critic_opt.load_state_arrays("critic_opt", extra)
        self.step = int(extra["step"])
        self.episodes = int(extra["episodes"])
        self.pmodl.lam = float(extra["lam"])
        self.pmodl.slots = np.asarray(extra["pmodl_slots"], dtype=np.int8).copy()
        self.pmodl.cursor = int(extra["pmodl_cursor"])
        self.pmodl.recorded = int(extra["pmodl_recorded"])

    # ------------------------------------------------------------------ main loop
    def run(self, resume_from=None) -> "Trainer":
        cfg = self.cfg
        if resume_from is not None:
            self.restore(resume_from)
        self._open_logs(resume=resume_from is not None)
        try:
            if self.step == 0:
                self.save()
            limit = cfg.total_steps if cfg.halt_step is None else min(cfg.total_steps, cfg.halt_step)
            while self.step < limit:
                self.train_step()
                if self.step % cfg.log_interval == 0:
                    self._flush_interval()
                if self.step % cfg.eval_interval == 0:
                    report = self.evaluate_now()
                    self.save()
                    log.info("step %d: SR %.3f CR %.3f TR %.3f", self.step, report.sr, report.cr, report.tr)
                    if cfg.stop_at_sr is not None and report.sr >= cfg.stop_at_sr:
                        break
        finally:
            self._close_logs()
        return self


def train(cfg: RunConfig, out_dir=None, resume_from=None) -> Trainer:
    return Trainer(cfg, out_dir).run(resume_from)


def config_from_checkpoint(path) -> RunConfig:
    _, extra = load_checkpoint(path)
    tree = dict(extra["config"])
    preset = tree.pop("preset", "desk")
    return apply_overrides(make_config(preset), tree)
