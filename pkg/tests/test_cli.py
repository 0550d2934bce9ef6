import os
import json
import pytest
import numpy as np

from parallel_lsvi.agents import AlgoParams, rf_explore, rfmg_explore
from parallel_lsvi.cli import EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC, EXIT_OK, environment_workers, exit_code, get_args, main
from parallel_lsvi.envs import LinearMdpSpec, RewardFunction, save_reward, save_spec
from parallel_lsvi.errors import ConsistencyError, ExperimentError, NumericError
from parallel_lsvi.harness import PointSummary, SweepSummary
from parallel_lsvi.oracle import DeterministicPolicy, MixedPolicyPair, load_policy, optimal_value, save_policy


@pytest.fixture
def spec_file(tmp_path, tabular_spec):
    path = str(tmp_path / "spec.json")
    save_spec(tabular_spec, path)
    return path


def test_validate_command(spec_file, capsys):
    assert main(["validate", "--spec", spec_file]) == EXIT_OK
    assert "no violations" in capsys.readouterr().out


def test_validate_command_reports_violations(tmp_path, tabular_spec, capsys):
    features = tabular_spec.features.copy()
    features[0, 1] *= 1.5
    broken = LinearMdpSpec(2, 2, 3, 4, features, tabular_spec.measures, tabular_spec.theta)
    path = str(tmp_path / "broken.json")
    save_spec(broken, path)
    assert main(["validate", "--spec", path]) == EXIT_CONFIG
    assert "feature_bound" in capsys.readouterr().out


def test_certify_command(tmp_path, spec_file, tabular_spec, capsys):
    _, greedy = optimal_value(tabular_spec)
    policy_path = str(tmp_path / "policy.json")
    save_policy(greedy, policy_path)
    assert main(["certify", "--spec", spec_file, "--policy", policy_path]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report == {"spec_hash": tabular_spec.hash(), "subopt": 0.0}

    reward_path = str(tmp_path / "reward.json")
    save_reward(RewardFunction.zero(tabular_spec), reward_path)
    stay = DeterministicPolicy(np.zeros((3, 2), dtype=int), 2)
    save_policy(stay, policy_path)
    assert main(["certify", "--spec", spec_file, "--policy", policy_path, "--reward", reward_path]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["subopt"] == 0.0


def test_certify_rejects_mismatched_policy(tmp_path, spec_file):
    policy_path = str(tmp_path / "policy.json")
    save_policy(MixedPolicyPair.uniform(3, 2, 2, 2), policy_path)
    assert main(["certify", "--spec", spec_file, "--policy", policy_path]) == EXIT_CONFIG


def test_plan_command(tmp_path, tabular_spec, random_mg):
    dataset, _ = rf_explore(tabular_spec, AlgoParams(episodes=4, agents=2))
    dataset_path = str(tmp_path / "data.ndjson")
    dataset.save(dataset_path, ndjson=True)
    reward_path = str(tmp_path / "reward.json")
    save_reward(RewardFunction.single_goal(tabular_spec, 1), reward_path)
    out = str(tmp_path / "policy.json")
    assert main(["plan", "--dataset", dataset_path, "--reward", reward_path, "--out", out]) == EXIT_OK
    assert isinstance(load_policy(out), DeterministicPolicy)

    dataset, _ = rfmg_explore(random_mg, AlgoParams(episodes=2, agents=2))
    dataset.save(dataset_path)
    save_reward(RewardFunction.single_goal(random_mg, 0), reward_path)
    assert main(["plan", "--dataset", dataset_path, "--reward", reward_path, "--out", out]) == EXIT_OK
    assert isinstance(load_policy(out), MixedPolicyPair)


def test_run_command(tmp_path, write_config, capsys):
    config = write_config(
        {
            "algorithm": "rf",
            "environment": {"n_states": 2, "n_actions": 2, "horizon": 3, "dim": 4},
            "grid": {"episodes": [3], "agents": [1, 2, 4]},
            "replications": 1,
        }
    )
    root = str(tmp_path / "runs")
    assert main(["run", "--config", config, "--output-dir", root, "--workers", "2"]) == EXIT_OK
    (directory,) = os.listdir(root)
    summary = SweepSummary.load(os.path.join(root, directory, "summary.json"))
    assert summary.metric == "subopt"
    assert sorted(point.kp for point in summary.points) == [3, 6, 12]
    assert "artifacts:" in capsys.readouterr().out


def _write_summary(path, means):
    points = [
        PointSummary(coordinates={"episodes": 2, "agents": agents, "beta": None, "seed": 0}, values=[mean], doubling_counts=[0])
        for agents, mean in zip((1, 4, 16), means)
    ]
    SweepSummary("rf", "subopt", "0" * 64, points).save(path)


def test_slope_command(tmp_path, capsys):
    path = str(tmp_path / "summary.json")
    _write_summary(path, [4.0 / np.sqrt(kp) for kp in (2, 8, 32)])
    assert main(["slope", "--summary", path]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["metric"] == "subopt"
    assert report["slope"] == pytest.approx(-0.5, abs=1e-12)
    assert report["stderr"] == pytest.approx(0.0, abs=1e-12)


def test_slope_command_needs_positive_points(tmp_path):
    path = str(tmp_path / "summary.json")
    _write_summary(path, [0.5, 0.0, 0.0])
    assert main(["slope", "--summary", path]) == EXIT_CONFIG
    assert main(["slope", "--summary", path, "--metric", "regret"]) == EXIT_CONFIG


def test_missing_files_map_to_io_exit(tmp_path):
    assert main(["validate", "--spec", str(tmp_path / "missing.json")]) == EXIT_IO
    (tmp_path / "garbage.json").write_text("{not json")
    assert main(["validate", "--spec", str(tmp_path / "garbage.json")]) == EXIT_IO


def test_bad_config_maps_to_config_exit(write_config):
    assert main(["run", "--config", write_config({"algorithm": "dqn"})]) == EXIT_CONFIG


def test_exit_codes():
    assert exit_code(NumericError("nan")) == EXIT_NUMERIC
    assert exit_code(ConsistencyError("negative gap")) == EXIT_NUMERIC
    assert exit_code(OSError("disk")) == EXIT_IO
    assert exit_code(ValueError("bad")) == EXIT_CONFIG

    wrapped = ExperimentError("failed", {"episodes": 1})
    wrapped.__cause__ = NumericError("nan")
    assert exit_code(wrapped) == EXIT_NUMERIC


def test_workers_default_from_environment(monkeypatch):
    monkeypatch.setenv("SIMULATE_WORKERS", "3")
    assert get_args(["run", "--config", "c.json"]).workers is None
    assert environment_workers() == 3
    monkeypatch.delenv("SIMULATE_WORKERS")
    assert environment_workers() is None


def test_non_integer_workers_variable_maps_to_config_exit(monkeypatch, write_config):
    monkeypatch.setenv("SIMULATE_WORKERS", "many")
    config = write_config({"algorithm": "rf"})
    assert main(["run", "--config", config]) == EXIT_CONFIG


def test_malformed_config_json_maps_to_io_exit(tmp_path):
    path = tmp_path / "config.json"
    path.write_text("{\"algorithm\": ")
    assert main(["run", "--config", str(path)]) == EXIT_IO
