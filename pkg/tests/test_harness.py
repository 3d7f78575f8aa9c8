from __future__ import annotations

import csv
import json
from dataclasses import replace

import numpy as np
import pytest
import yaml

from helpers import tiny_config
from pmodl.env import COLLISION, SUCCESS, TIMEOUT
from pmodl.errors import DataError, ExportError, UsageError
from pmodl.harness import (
    EpisodeRecord,
    EvalReport,
    Evaluator,
    Trainer,
    compute_spl,
    evaluate,
    expert_run,
    load_config,
    make_config,
    train,
)
from pmodl.harness.cli import main
from pmodl.harness.config import build_env, substream
from pmodl.harness.evaluate import expert_policy
from pmodl.harness.export import EVAL_COLUMNS, TRAINING_COLUMNS, export_plots_data
from pmodl.harness.train import EVAL_FIELDS, STEP_FIELDS


def rec(outcome, ls=10.0, la=10.0):
    return EpisodeRecord(outcome, 0.0, 1, ls, la)


def read_steps(run):
    return [json.loads(l) for l in (run / "steps.jsonl").read_text().splitlines()]


def read_evals(run):
    with open(run / "evals.csv", newline="") as fh:
        return list(csv.DictReader(fh))


class TestMetrics:
    def test_rates(self):
        r = EvalReport([rec(SUCCESS)] * 95 + [rec(COLLISION)] * 4 + [rec(TIMEOUT)])
        assert (r.sr, r.cr, r.tr) == pytest.approx((0.95, 0.04, 0.01))
        assert r.sr + r.cr + r.tr == pytest.approx(1.0)

    def test_spl_values(self):
        assert compute_spl([rec(SUCCESS, 10, 12.5)]) == pytest.approx(0.8)
        assert compute_spl([rec(SUCCESS, 10, 8)]) == 1.0
        assert compute_spl([rec(SUCCESS, 4, 8), rec(COLLISION)]) == pytest.approx(0.25)
        assert compute_spl([rec(COLLISION), rec(TIMEOUT)]) == 0.0
        assert compute_spl([rec(SUCCESS, 3, 3)]) == 1.0

    def test_spl_bad_record(self):
        with pytest.raises(DataError):
            compute_spl([rec(SUCCESS, 0.0, 3.0)])

    def test_spl_below_sr(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            records = [
                rec(rng.choice([SUCCESS, COLLISION, TIMEOUT]), rng.uniform(0.1, 10), rng.uniform(0, 20)) for _ in range(20)
            ]
            r = EvalReport(records)
            assert 0.0 <= r.spl <= r.sr + 1e-12

    def test_summary_keys(self):
        s = EvalReport([rec(SUCCESS), rec(COLLISION)]).summary()
        assert set(EVAL_FIELDS[1:]) <= set(s)


class TestConfig:
    def test_unknown_key(self):
        with pytest.raises(UsageError):
            make_config("desk", {"nope": 1})
        with pytest.raises(UsageError):
            make_config("desk", {"ddpg": {"nope": 1}})

    def test_bad_values(self):
        with pytest.raises(UsageError):
            make_config("desk", {"algorithm": "ppo"})
        with pytest.raises(UsageError):
            make_config("desk", {"lambda_mode": "fixed:0.5"})
        with pytest.raises(UsageError):
            make_config("desk", {"lambda_mode": "sometimes"})
        with pytest.raises(UsageError):
            make_config("desk", {"ddpg": {"gamma": 1.5}})
        with pytest.raises(UsageError):
            make_config("nowhere")

    def test_presets(self):
        paper = make_config("paper")
        assert paper.total_steps == 500_000 and paper.sensor.beams == 1081 and paper.ddpg.batch_size == 256
        desk = make_config("desk")
        assert desk.total_steps == 100_000 and desk.eval_interval == 5000 and desk.eval_episodes == 50
        assert desk.ddpg.tau == 0.001 and desk.ddpg.buffer_capacity == 400_000

    def test_yaml_round_trip(self, tmp_path):
        cfg = tiny_config(seed=3, lambda_mode="fixed:10")
        (tmp_path / "c.yaml").write_text(yaml.safe_dump(cfg.to_dict()))
        again = load_config(tmp_path / "c.yaml")
        assert again == cfg

    def test_missing_file(self, tmp_path):
        with pytest.raises(UsageError):
            load_config(tmp_path / "absent.yaml")

    def test_substreams_independent(self):
        a = substream(1, "env").random(3)
        assert np.array_equal(a, substream(1, "env").random(3))
        assert not np.array_equal(a, substream(1, "noise").random(3))


class TestEvaluation:
    def test_expert_open_space(self, tmp_path):
        # open room: every target is in line of sight, so the expert should be close to shortest path
        size = 80
        rows = ["#" * size] + ["#" + "." * (size - 2) + "#" for _ in range(size - 2)] + ["#" * size]
        path = tmp_path / "room.map"
        path.write_text("resolution: 0.1\ngrid:\n" + "\n".join(rows) + "\n")
        cfg = tiny_config()
        report = expert_run(cfg, 5, seed=1, map_name=str(path))
        assert report.sr == 1.0 and report.spl > 0.9

    def test_unsamplable_world_skips(self, tmp_path, caplog):
        rows = ["#" * 20] + ["#" + "." * 18 + "#" for _ in range(18)] + ["#" * 20]
        path = tmp_path / "tiny.map"
        path.write_text("resolution: 0.1\ngrid:\n" + "\n".join(rows) + "\n")
        report = expert_run(tiny_config(), 3, map_name=str(path))
        assert report.skipped == 3 and report.episodes == 0
        assert "skipped" in caplog.text

    def test_order_independent_seeds(self):
        cfg = tiny_config()
        env = build_env(cfg, "desk_train")
        pol = expert_policy(env, cfg.pursuit)
        a = Evaluator(env, 3, 9).run(pol)
        b = Evaluator(env, 3, 9).run(pol)
        assert [r.steps for r in a.records] == [r.steps for r in b.records]


class TestTraining:
    def test_zero_budget(self, tmp_path):
        t = train(tiny_config(total_steps=0), tmp_path / "run")
        run = tmp_path / "run"
        assert (run / "checkpoints" / "step_00000000.npz").exists()
        assert (run / "steps.jsonl").read_text() == ""
        assert read_evals(run) == []
        assert (run / "config.yaml").exists() and t.step == 0

    def test_ddpg_logs(self, tmp_path):
        train(tiny_config(algorithm="ddpg"), tmp_path / "r")
        recs = read_steps(tmp_path / "r")
        assert list(recs[0]) == STEP_FIELDS
        assert all(r["lam"] is None and r["j_il"] is None for r in recs)
        assert all(r["z"] is not None for r in recs)
        assert any(r["j_rl"] is not None and r["critic_loss"] is not None for r in recs)

    def test_pmodl_logs_and_eval_rows(self, tmp_path):
        train(tiny_config(algorithm="ddpg_pmodl_bc", total_steps=180), tmp_path / "r")
        recs = read_steps(tmp_path / "r")
        assert len(recs) == 180 // 20
        late = recs[-1]
        assert late["lam"] >= 1.0 and late["lam_g_il"] is not None and late["j_il"] is not None
        assert len(read_evals(tmp_path / "r")) == 180 // 60
        assert len(list((tmp_path / "r" / "checkpoints").glob("*.npz"))) == 1 + 3

    @pytest.mark.parametrize("algo", ["dagger", "coach", "ddpg_pmodl_coach"])
    def test_other_algorithms_run(self, algo, tmp_path):
        t = train(tiny_config(algorithm=algo, total_steps=60), tmp_path / algo)
        recs = read_steps(tmp_path / algo)
        assert t.step == 60 and any(r["j_il"] is not None for r in recs)
        if algo in ("dagger", "coach"):
            assert all(r["noise_decay"] is None and r["critic_loss"] is None for r in recs)

    def test_eval_has_no_side_effects(self, tmp_path):
        t = Trainer(tiny_config(), tmp_path / "r")
        t._open_logs(False)
        try:
            for _ in range(30):
                t.train_step()
            before = (t.nets.actor.flat().copy(), t.pmodl.z, t.pmodl.lam, t.env_rng.bit_generator.state)
            t.evaluate_now()
            after = (t.nets.actor.flat(), t.pmodl.z, t.pmodl.lam, t.env_rng.bit_generator.state)
        finally:
            t._close_logs()
        assert np.array_equal(before[0], after[0]) and before[1:] == after[1:]

    def test_resume_keeps_schedule(self, tmp_path):
        cfg = tiny_config(total_steps=180)
        first = train(replace(cfg, halt_step=60), tmp_path / "r")
        assert first.step == 60
        resumed = train(cfg, tmp_path / "r", resume_from=tmp_path / "r" / "checkpoints" / "step_00000060.npz")
        assert resumed.step == 180
        steps = [int(r["step"]) for r in read_evals(tmp_path / "r")]
        assert steps == [60, 120, 180]

    def test_determinism(self, tmp_path):
        cfg = tiny_config(algorithm="ddpg_pmodl_coach")
        train(cfg, tmp_path / "a")
        train(cfg, tmp_path / "b")
        for name in ("steps.jsonl", "evals.csv", "trajectories.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_evaluate_checkpoint(self, tmp_path):
        t = train(tiny_config(total_steps=60), tmp_path / "r")
        report = evaluate(tmp_path / "r" / "checkpoints" / "step_00000060.npz", "desk_eval", 2, 0)
        assert report.episodes + report.skipped == 2
        assert t.last_report is not None


class TestExport:
    def test_missing(self, tmp_path):
        with pytest.raises(ExportError) as err:
            export_plots_data(tmp_path)
        assert "steps.jsonl" in str(err.value) and "evals.csv" in str(err.value)

    def test_tables(self, tmp_path):
        train(tiny_config(lambda_mode="fixed:10"), tmp_path / "r")
        out = export_plots_data(tmp_path / "r")
        with open(out["eval"], newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert list(rows[0]) == EVAL_COLUMNS and len(rows) == 120 // 60
        with open(out["training"], newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert list(rows[0]) == TRAINING_COLUMNS
        assert {r["lam"] for r in rows if r["lam"]} == {"10.0"}
        with open(out["trajectories"], newline="") as fh:
            outcomes = {r["outcome"] for r in csv.DictReader(fh)}
        assert outcomes and outcomes <= {SUCCESS, COLLISION, TIMEOUT}


class TestCli:
    def test_train_eval_export(self, tmp_path, capsys):
        cfg_path = tmp_path / "cfg.yaml"
        cfg_path.write_text(yaml.safe_dump(tiny_config(total_steps=60).to_dict()))
        run = tmp_path / "run"
        assert main(["train", "--config", str(cfg_path), "--seed", "2", "--algo", "dagger", "--out", str(run)]) == 0
        assert yaml.safe_load((run / "config.yaml").read_text())["algorithm"] == "dagger"
        ckpt = run / "checkpoints" / "step_00000060.npz"
        capsys.readouterr()
        assert main(["eval", "--checkpoint", str(ckpt), "--episodes", "2"]) == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["episodes"] + summary["skipped"] == 2
        assert main(["export", "--run", str(run)]) == 0
        assert (run / "export" / "eval_series.csv").exists()

    def test_expert_run(self, capsys):
        assert main(["expert-run", "--episodes", "2", "--seed", "4"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["sr"] == 1.0

    def test_usage_errors(self, tmp_path, capsys):
        assert main(["export", "--run", str(tmp_path)]) == 2
        assert main(["train", "--lambda", "bogus", "--out", str(tmp_path / "x")]) == 2
        assert "error:" in capsys.readouterr().err
