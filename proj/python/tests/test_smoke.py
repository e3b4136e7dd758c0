import math
import os

import pytest

import a3rl


def tiny(**overrides):
    cfg = dict(batch_size=16, gradient_steps=1, ensemble_size=2, hidden=8, density_members=2,
               density_hidden=8, mc_samples=2, total_steps=200, warmup_steps=100,
               eval_interval=100, eval_episodes=1)
    cfg.update(overrides)
    return cfg


def test_names():
    assert "A3" in a3rl.mode_names()
    assert set(a3rl.env_names()) >= {"PointReach", "PointMaze"}
    assert "random" in a3rl.policy_names()


def test_config_defaults_and_errors():
    cfg = a3rl.default_config()
    assert cfg["batch_size"] == 256 and cfg["mode"] == "A3"
    assert a3rl.config(xi=0.1)["xi"] == 0.1
    with pytest.raises(ValueError, match="colour"):
        a3rl.config(colour=1)
    with pytest.raises(a3rl.ConfigError):
        a3rl.config(target_subset=5)


def test_priority_formulas():
    assert a3rl.a3_priority(True, 1.5, 10.0, 0.03) == pytest.approx(1.5 * math.exp(0.3), abs=1e-6)
    probs = a3rl.priority_probs([1.0, 2.0, 4.0], 0.3)
    z = 1 + 2 ** 0.3 + 4 ** 0.3
    assert probs == pytest.approx([1 / z, 2 ** 0.3 / z, 4 ** 0.3 / z], abs=1e-12)
    assert a3rl.importance_weights([0.8, 0.2], 1.0, [0, 1], 1.0) == pytest.approx([0.25, 1.0])
    assert a3rl.anneal_beta(50, 100, 0.4) == pytest.approx(0.7)
    idx = a3rl.sample_batch([1.0, 3.0], 1.0, 20000, 1)
    assert sum(i == 1 for i in idx) / len(idx) == pytest.approx(0.75, abs=0.02)


def test_density_and_theory():
    assert a3rl.f_prime(1.0) == pytest.approx(0.0)
    assert a3rl.f_conj_of_fprime(3.0) == pytest.approx(math.log(2.0))
    assert a3rl.bandit_R([0.0, 1.0], 1.0, 2.0, 1, 0.0) == pytest.approx(1.2048, abs=1e-3)
    report = a3rl.check_lemma1([0.0, 0.5, 1.0], 1.0, 2.0)
    assert report["holds"] and len(report["xi"]) == 5
    assert a3rl.lemma1_sweep(10, 5, 3)["failures"] == 0


def test_env_roundtrip():
    s = a3rl.env_reset("PointReach", 0)
    nxt, r, done = a3rl.env_step("PointReach", s, [1.0, 1.0])
    assert len(nxt) == 4 and r < 0 and not done


def test_train_dataset_and_checkpoint(tmp_path):
    data = tmp_path / "d.ds"
    assert a3rl.generate_dataset("PointReach", "random", 1000, 2, str(data)) == 1000
    assert a3rl.dataset_info(str(data))["size"] == 1000

    ck, csv = tmp_path / "run.ckpt", tmp_path / "run.csv"
    a = a3rl.train(tiny(offline_path=str(data)), metrics_csv=str(csv), checkpoint=str(ck))
    b = a3rl.train(tiny(offline_path=str(data)))
    assert a["metrics"] == b["metrics"]
    assert len(a["metrics"]) == 2
    assert a["gradient_steps"] == 100 and a["offline_reads"] == 100 * 8
    assert not a["pure_online"]
    assert os.path.getsize(csv) > 0

    loaded = a3rl.load_checkpoint(str(ck))
    assert loaded["config_hash"] == a["config_hash"] and loaded["env_step"] == 200
    assert {"critic0", "critic1", "target0", "actor", "log_alpha"} <= set(loaded["blocks"])


def test_pure_online_and_suite(tmp_path):
    r = a3rl.train(tiny(mode="UNIFORM"))
    assert r["pure_online"] and r["offline_reads"] == 0
    rows = a3rl.run_ablation_suite(tiny(total_steps=120, eval_interval=60), 1, str(tmp_path))
    assert [row["mode"] for row in rows][-2:] == ["A3_PURE_ONLINE", "SAC_PURE_ONLINE"]
    assert all(row["return_std"] == 0.0 for row in rows)
    assert len(list(tmp_path.glob("*.csv"))) == 9
