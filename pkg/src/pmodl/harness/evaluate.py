"""Noise-free rollouts and the evaluation metrics (SR, CR, TR, SPL, return, steps)."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..env import COLLISION, SUCCESS, TIMEOUT, EpisodeState, NavEnv
from ..errors import DataError, EpisodeSamplingError, PlanningError
from ..expert import Expert
from ..neural import collate, forward_actor, load_checkpoint
from .config import apply_overrides, build_env, make_config

log = logging.getLogger(__name__)

OUTCOMES = (SUCCESS, COLLISION, TIMEOUT)
Policy = Callable[[object, EpisodeState], np.ndarray]


@dataclass
class EpisodeRecord:
    outcome: str
    ret: float
    steps: int
    l_shortest: float
    l_agent: float
    path: list[tuple[float, float, float]] = field(default_factory=list)


def compute_spl(records: Sequence[EpisodeRecord]) -> float:
    """Mean over episodes of ``1{success} * l_shortest / max(l_shortest, l_agent)``."""
    if not records:
        return 0.0
    total = 0.0
    for r in records:
        if r.outcome != SUCCESS:
            continue
        if not r.l_shortest > 0:
            raise DataError(f"successful episode with l_shortest={r.l_shortest}")
        total += r.l_shortest / max(r.l_shortest, r.l_agent)
    return total / len(records)


def _mean_std(values) -> tuple[float, float]:
    a = np.asarray(values, dtype=float)
    if a.size == 0:
        return math.nan, math.nan
    return float(a.mean()), float(a.std())


@dataclass
class EvalReport:
    records: list[EpisodeRecord]
    skipped: int = 0

    @property
    def episodes(self) -> int:
        return len(self.records)

    def _rate(self, outcome) -> tuple[float, float]:
        return _mean_std([r.outcome == outcome for r in self.records])

    @property
    def sr(self) -> float:
        return self._rate(SUCCESS)[0]

    @property
    def cr(self) -> float:
        return self._rate(COLLISION)[0]

    @property
    def tr(self) -> float:
        return self._rate(TIMEOUT)[0]

    @property
    def spl(self) -> float:
        return compute_spl(self.records)

    @property
    def avg_return(self) -> float:
        return _mean_std([r.ret for r in self.records])[0]

    @property
    def avg_steps(self) -> float:
        return _mean_std([r.steps for r in self.records])[0]

    def summary(self) -> dict:
        out = {"episodes": self.episodes, "skipped": self.skipped}
        for name, outcome in (("sr", SUCCESS), ("cr", COLLISION), ("tr", TIMEOUT)):
            out[name], out[f"{name}_std"] = self._rate(outcome)
        spl_terms = []
        for r in self.records:
            ok = r.outcome == SUCCESS
            spl_terms.append(r.l_shortest / max(r.l_shortest, r.l_agent) if ok else 0.0)
        out["spl"] = self.spl
        out["spl_std"] = _mean_std(spl_terms)[1]
        out["return_mean"], out["return_std"] = _mean_std([r.ret for r in self.records])
        out["steps_mean"], out["steps_std"] = _mean_std([r.steps for r in self.records])
        return out


def episode_rng(seed: int, index: int) -> np.random.Generator:
    """Per-episode generator, so reports do not depend on the order episodes run in."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(index)])))


def run_episode(env: NavEnv, policy: Policy, rng: np.random.Generator, record_path: bool = False):
    """One rollout; returns ``(record_without_l_shortest, start_state)``."""
    state, obs = env.reset(rng)
    start = state
    ret = 0.0
    path = [(state.pose.x, state.pose.y, state.pose.theta)] if record_path else []
    while not state.done:
        action = policy(obs, state)
        obs, r, state = env.step(state, action)
        ret += r
        if record_path:
            path.append((state.pose.x, state.pose.y, state.pose.theta))
    rec = EpisodeRecord(state.status, ret, state.t, math.nan, state.travelled, path)
    return rec, start


class Evaluator:
    """Runs the same seeded episode set every time and caches shortest-path lengths."""

    def __init__(self, env: NavEnv, episodes: int, seed: int):
        self.env = env
        self.episodes = episodes
        self.seed = seed
        self._shortest: dict[tuple, float] = {}

    def shortest(self, start: EpisodeState) -> float:
        key = (start.pose.x, start.pose.y, start.target)
        if key not in self._shortest:
            self._shortest[key] = self.env.planner.shortest_length((start.pose.x, start.pose.y), start.target)
        return self._shortest[key]

    def run(self, policy: Policy, record_paths: bool = False) -> EvalReport:
        records, skipped = [], 0
        for i in range(self.episodes):
            rng = episode_rng(self.seed, i)
            try:
                rec, start = run_episode(self.env, policy, rng, record_paths)
                rec.l_shortest = self.shortest(start)
            except (EpisodeSamplingError, PlanningError) as exc:
                log.warning("evaluation episode %d skipped: %s", i, exc)
                skipped += 1
                continue
            records.append(rec)
        return EvalReport(records, skipped)


def actor_policy(actor) -> Policy:
    dtype = np.dtype(actor.arch.dtype)

    def policy(obs, state):
        return forward_actor(actor, collate([obs], dtype))[0].astype(float)

    return policy


def expert_policy(env: NavEnv, cfg) -> Policy:
    expert = Expert(env.planner, cfg, env.bounds)

    def policy(obs, state):
        return expert(state.pose, state.target)

    return policy


def evaluate_actor(actor, env: NavEnv, episodes: int, seed: int, record_paths: bool = False) -> EvalReport:
    return Evaluator(env, episodes, seed).run(actor_policy(actor), record_paths)


def evaluate(checkpoint, map_name: str | None, episodes: int, seed: int, cfg=None, record_paths: bool = False):
    """Evaluate the actor stored in ``checkpoint``; the run's own config is used unless ``cfg`` is given."""
    networks, extra = load_checkpoint(checkpoint)
    if cfg is None:
        tree = dict(extra.get("config") or {})
        preset = tree.pop("preset", "desk")
        cfg = apply_overrides(make_config(preset), tree)
    env = build_env(cfg, map_name or cfg.eval_map)
    return evaluate_actor(networks["actor"], env, episodes, seed, record_paths)


def expert_run(cfg, episodes: int, seed: int = 0, map_name: str | None = None, record_paths: bool = False):
    """Closed-loop pure pursuit on a map; failed plans skip the episode (logged)."""
    env = build_env(cfg, map_name or cfg.train_map)
    return Evaluator(env, episodes, seed).run(expert_policy(env, cfg.pursuit), record_paths)
