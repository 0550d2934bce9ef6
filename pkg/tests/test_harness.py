import os
import glob
import json
import math
import pytest
import numpy as np

from parallel_lsvi.agents import AlgoParams, Algorithm, RunLog
from parallel_lsvi.agents import runlog as metrics
from parallel_lsvi.envs import generate_random_mg, save_spec
from parallel_lsvi.errors import ConfigError, ExperimentError, ParameterError
from parallel_lsvi.harness import (
    DoublingBoundCheck,
    ExperimentConfig,
    NonNegativeGapCheck,
    OptimismRateCheck,
    PointSummary,
    RegretMonotoneCheck,
    SweepSummary,
    build_environment,
    build_reward,
    default_checks,
    fit_speedup_slope,
    optimism_with_retry,
    run_experiment,
    run_pipeline,
    run_seed,
    summarize_runlogs,
    theory_terms,
)

SMALL_RF = {
    "algorithm": "rf",
    "environment": {"n_states": 2, "n_actions": 2, "horizon": 3, "dim": 4},
    "grid": {"episodes": [5], "agents": [2]},
    "replications": 2,
}


def _summary(kp_values, means, metric="subopt") -> SweepSummary:
    points = [
        PointSummary(coordinates={"episodes": kp, "agents": 1, "beta": None, "seed": 0}, values=[mean], doubling_counts=[0])
        for kp, mean in zip(kp_values, means)
    ]
    return SweepSummary("rf", metric, "0" * 64, points)


@pytest.mark.parametrize(
    "payload",
    [
        {"bogus": 1},
        {"grid": {"K": [1]}},
        {"grid": []},
        {"algorithm": "dqn"},
        {"algorithm": "polsvi", "oracle": False},
        {"environment": {"spec": "spec.json"}, "grid": {"dim": [4]}},
        {"grid": {"episodes": []}},
        {"grid": {"agents": [0]}},
        {"grid": {"delta": [1.5]}},
        {"grid": {"beta": [-1.0]}},
        {"reward": {"family": "sparse"}},
        {"reward": {"value": 2.0}},
        {"replications": 0},
        {"ridge": 0},
        {"oracle": "yes"},
    ],
)
def test_config_rejects(payload):
    with pytest.raises(ConfigError):
        ExperimentConfig(payload)


def test_config_defaults_and_update():
    config = ExperimentConfig(SMALL_RF)
    assert config.environment["n_actions_p2"] == 3
    assert config.reward["family"] == "single-goal"
    assert config.workers == 1

    unused = config.update(workers=3, foo=1)
    assert unused == {"foo": 1}
    assert config.workers == 3


def test_config_hash_ignores_execution_settings():
    base = ExperimentConfig(SMALL_RF)
    executed = ExperimentConfig(dict(SMALL_RF, workers=4, parallel_runs=2, output_dir="elsewhere", overwrite=True))
    assert base.hash() == executed.hash()
    assert base.hash() != ExperimentConfig(dict(SMALL_RF, replications=3)).hash()
    assert "workers" not in base.provenance()


def test_grid_points():
    config = ExperimentConfig(dict(SMALL_RF, grid={"episodes": [10, 20], "agents": [1, 2, 4], "seed": [5]}))
    points = config.grid_points()
    assert len(points) == 6
    assert {(p.episodes, p.agents) for p in points} == {(k, p) for k in (10, 20) for p in (1, 2, 4)}
    assert all(p.dim == 4 and p.horizon == 3 for p in points)

    params = points[0].params(replication=2, ridge=1.0, workers=1, oracle=True)
    assert params.seed == run_seed(5, 2)
    assert params.beta is None
    assert points[0].label() == "K10-P1-betaderived-c1-delta0.05-seed5-d4-H3"


def test_run_seeds_are_distinct_and_paired():
    config = ExperimentConfig(dict(SMALL_RF, grid={"agents": [1, 16], "seed": [0, 1, 2]}, replications=5))
    seeds = {
        (point.agents, point.seed, r): point.params(r, 1.0, 1, True).seed for point in config.grid_points() for r in range(5)
    }
    assert len({seed for (agents, _, _), seed in seeds.items() if agents == 1}) == 15
    assert all(seeds[(1, s, r)] == seeds[(16, s, r)] for s in range(3) for r in range(5))


def test_config_file_paths_are_relative_to_the_file(tmp_path, write_config, random_mdp):
    save_spec(random_mdp, str(tmp_path / "spec.json"))
    path = write_config({"environment": {"spec": "spec.json"}, "reward": {"path": "reward.json"}})
    config = ExperimentConfig.from_file(path)
    assert config.environment["spec"] == str(tmp_path / "spec.json")
    assert config.reward["path"] == str(tmp_path / "reward.json")

    point = config.grid_points()[0]
    assert point.dim is None
    assert build_environment(config, point).hash() == random_mdp.hash()


def test_default_reward_is_last_state_goal(random_mdp):
    config = ExperimentConfig(SMALL_RF)
    reward = build_reward(config, random_mdp)
    assert reward.table[:, random_mdp.n_states - 1].min() == 1.0
    assert reward.table[:, : random_mdp.n_states - 1].max() == 0.0

    config = ExperimentConfig(dict(SMALL_RF, reward={"family": "constant", "value": 0.5}))
    assert build_reward(config, random_mdp).table.max() == 0.5


def test_checks():
    runlog = RunLog("polsvi")
    for k, value in enumerate([0.0, 0.5, 0.4]):
        runlog.log(metrics.REGRET, value, k)
    runlog.log(metrics.GAP, -1e-6, 0, agent=0)
    runlog.log(metrics.DOUBLING, 1.0, 0, step=0)
    runlog.log(metrics.DOUBLING, 1.0, 1, step=0)

    runlog.results["doubling_bound"] = 2.0
    assert not DoublingBoundCheck()(runlog).passed
    runlog.results["doubling_bound"] = 2.5
    assert DoublingBoundCheck()(runlog).passed
    assert not RegretMonotoneCheck()(runlog).passed
    assert not NonNegativeGapCheck()(runlog).passed

    runlog.log(metrics.OPTIMISM, 1.0, 0)
    runlog.log(metrics.OPTIMISM, 0.0, 1)
    assert not OptimismRateCheck(0.95)(runlog).passed
    assert OptimismRateCheck(0.5)(runlog).passed


def test_default_checks():
    polsvi = default_checks("polsvi")
    assert len(polsvi) == 3
    assert polsvi.optimism_target is None
    assert default_checks("rfmg", optimism_target=0.99).optimism_target == 0.99

    empty = RunLog("rf")
    assert default_checks("rf").all_passed(empty)


def test_slope_of_exact_power_law():
    kp = [100, 400, 1600]
    slope, stderr = fit_speedup_slope(_summary(kp, [v**-0.5 for v in kp]))
    assert slope == pytest.approx(-0.5, abs=1e-12)
    assert stderr == pytest.approx(0.0, abs=1e-12)

    slope, _ = fit_speedup_slope(_summary(kp, [0.3, 0.3, 0.3]))
    assert slope == pytest.approx(0.0, abs=1e-12)


def test_slope_drops_non_positive_points():
    kp = [50, 100, 400, 1600]
    slope, _ = fit_speedup_slope(_summary(kp, [0.0] + [v**-1.0 for v in kp[1:]]))
    assert slope == pytest.approx(-1.0, abs=1e-12)


def test_slope_rejects():
    with pytest.raises(ParameterError):
        fit_speedup_slope(_summary([100, 400], [0.1, 0.05]))
    with pytest.raises(ParameterError):
        fit_speedup_slope(_summary([100, 100, 100], [0.1, 0.05, 0.02]))
    with pytest.raises(ParameterError):
        fit_speedup_slope(_summary([100, 400, 1600], [0.1, 0.05, 0.02]), metric="regret")
    with pytest.raises(ParameterError):
        fit_speedup_slope(_summary([100, 400, 1600], [0.1, 0.05, 0.02]), metric="reward")


def test_theory_terms():
    iota = math.log(6 * 100 * 4 * 4 / 0.05)
    terms = theory_terms("polsvi", 6, 4, 100, 4)
    assert terms["base_term"] == pytest.approx(math.sqrt(400) * math.sqrt(6**3 * 4**4 * iota**2))
    assert terms["overhead_term"] == pytest.approx(math.sqrt(6**4 * 4**4 * iota) * 4 * math.log(1 + 400 / 6))

    terms = theory_terms("rf", 6, 4, 100, 4)
    assert terms["base_term"] == pytest.approx(math.sqrt(6**3 * 4**6 * iota**2 / 400))
    assert theory_terms("rfmg", 6, 4, 100, 16)["base_term"] < theory_terms("rfmg", 6, 4, 100, 1)["base_term"]


def test_summary_file_round_trip(tmp_path):
    summary = _summary([100, 400, 1600], [0.1, 0.05, 0.02])
    summary.points[0].values = [0.1, 0.3]
    path = str(tmp_path / "summary.json")
    summary.save(path)
    loaded = SweepSummary.load(path)
    assert loaded.to_dict() == summary.to_dict()
    assert loaded.points[0].mean == pytest.approx(0.2)
    assert loaded.points[0].stderr == pytest.approx(0.1)

    (tmp_path / "other.json").write_text(json.dumps({"algorithm": "rf"}))
    with pytest.raises(ParameterError):
        SweepSummary.load(str(tmp_path / "other.json"))


def test_pipeline_rfmg(random_mg):
    params = AlgoParams(episodes=3, agents=2, seed=1)
    outcome = run_pipeline(random_mg, params, Algorithm.RFMG, build_reward(ExperimentConfig({"algorithm": "rfmg"}), random_mg))
    results = outcome.runlog.results
    assert outcome.value >= 0.0
    assert results["subopt"] == outcome.value
    assert {"nash_value", "sandwich", "optimism_rate", "game_tol"} <= set(results)
    assert outcome.runlog.series(metrics.UPPER_VALUE).size == 1
    assert outcome.runlog.series(metrics.LOWER_VALUE).size == 1
    assert outcome.runlog.series(metrics.PLANNING_UNCERTAINTY)[0] >= 0.0
    assert outcome.dataset.is_complete()


def test_pipeline_needs_reward_for_planning(tabular_spec):
    with pytest.raises(ConfigError):
        run_pipeline(tabular_spec, AlgoParams(episodes=1, agents=1), Algorithm.RF)


def test_optimism_retry(tabular_spec):
    params = AlgoParams(episodes=10, agents=2, oracle=False)
    report = optimism_with_retry(tabular_spec, params)
    assert report.rate >= 0.95
    assert report.retry_rate is None
    assert report.final_rate == report.rate

    forced = optimism_with_retry(tabular_spec, params, target=1.01)
    assert forced.retry_beta == pytest.approx(2.0 * forced.beta)
    assert forced.final_rate == forced.retry_rate


def test_run_experiment_is_reproducible(tmp_path):
    root = str(tmp_path / "runs")
    first = run_experiment(ExperimentConfig(SMALL_RF), output_dir=root)
    second = run_experiment(ExperimentConfig(dict(SMALL_RF, workers=2, parallel_runs=2)), output_dir=root)
    assert first.directory != second.directory
    assert first.config_hash == second.config_hash

    with open(os.path.join(first.directory, "summary.json"), "rb") as f:
        first_bytes = f.read()
    with open(os.path.join(second.directory, "summary.json"), "rb") as f:
        assert f.read() == first_bytes

    for name in ("config.json", "timing.json", "curve.csv"):
        assert os.path.exists(os.path.join(first.directory, name))
    with open(os.path.join(first.directory, "config.json")) as f:
        assert json.load(f)["config_hash"] == first.config_hash
    with open(os.path.join(first.directory, "curve.csv")) as f:
        assert f.readline().strip() == metrics.HASH_PREFIX + first.config_hash
        assert f.readline().startswith("episodes,agents,KP,mean")


def test_summary_recomputes_from_runlogs(tmp_path):
    summary = run_experiment(ExperimentConfig(SMALL_RF), output_dir=str(tmp_path))
    point_dirs = glob.glob(os.path.join(summary.directory, "points", "*"))
    assert len(point_dirs) == 1

    paths = sorted(glob.glob(os.path.join(point_dirs[0], "run_*.csv")))
    assert len(paths) == SMALL_RF["replications"]
    recomputed = summarize_runlogs(paths, metrics.SUBOPT)
    assert recomputed.values == summary.points[0].values
    assert recomputed.doubling_counts == summary.points[0].doubling_counts
    assert RunLog.load(paths[0]).config_hash == summary.config_hash


def test_overwrite_reuses_the_hash_directory(tmp_path):
    config = ExperimentConfig(dict(SMALL_RF, overwrite=True, replications=1))
    first = run_experiment(config, output_dir=str(tmp_path))
    second = run_experiment(config, output_dir=str(tmp_path))
    assert first.directory == second.directory == os.path.join(str(tmp_path), first.config_hash[:12])


def test_polsvi_zero_bonus_single_action_has_zero_regret(tmp_path):
    config = ExperimentConfig(
        {
            "algorithm": "polsvi",
            "environment": {"n_states": 3, "n_actions": 1, "horizon": 3, "dim": 3},
            "grid": {"episodes": [4], "agents": [1, 2], "beta": [0.0]},
            "replications": 2,
        }
    )
    summary = run_experiment(config, output_dir=str(tmp_path))
    assert summary.metric == "regret"
    assert [point.mean for point in summary.points] == [0.0, 0.0]


def test_kind_mismatch_aborts_the_sweep(tmp_path, random_mdp):
    save_spec(random_mdp, str(tmp_path / "spec.json"))
    config = ExperimentConfig({"algorithm": "rfmg", "environment": {"spec": str(tmp_path / "spec.json")}})
    with pytest.raises(ExperimentError) as info:
        run_experiment(config, output_dir=str(tmp_path / "runs"))
    assert isinstance(info.value.__cause__, ConfigError)
    assert info.value.coordinates["episodes"] == 100


@pytest.mark.slow
def test_doubling_bound_on_random_runs():
    rng = np.random.default_rng(2024)
    for run in range(50):
        dim, horizon = int(rng.integers(2, 9)), int(rng.integers(2, 6))
        n_states = int(rng.integers(2, 6))
        spec = generate_random_mg(n_states, 2, 2, horizon, min(dim, n_states * 4), seed=run)
        params = AlgoParams(episodes=int(rng.integers(1, 401)), agents=int(rng.integers(1, 17)), seed=run, oracle=False)
        outcome = run_pipeline(spec, params, Algorithm.RFMG, build_reward(ExperimentConfig({"algorithm": "rfmg"}), spec))
        assert outcome.runlog.results["doubling_count"] < outcome.runlog.results["doubling_bound"]


@pytest.mark.slow
def test_exploration_optimism_acceptance(tabular_spec):
    rates = []
    for seed in range(10):
        report = optimism_with_retry(tabular_spec, AlgoParams(episodes=100, agents=1, seed=seed))
        rates.append(report.final_rate)
    assert np.mean(rates) >= 0.95


# the derived rule with c_beta = 1 caps every bonus at H for KP <= 1600
TREND_C_BETA = 0.1

TREND_ENVIRONMENTS = {
    "rf": {"n_states": 5, "n_actions": 3, "horizon": 4, "dim": 6},
    "rfmg": {"n_states": 5, "n_actions": 2, "n_actions_p2": 2, "horizon": 4, "dim": 6},
}


def _trend_sweep(tmp_path, algorithm: str, agents) -> SweepSummary:
    config = ExperimentConfig(
        {
            "algorithm": algorithm,
            "environment": TREND_ENVIRONMENTS[algorithm],
            "grid": {"episodes": [100], "agents": agents, "c_beta": [TREND_C_BETA]},
            "replications": 10,
            "parallel_runs": 4,
        }
    )
    summary = run_experiment(config, output_dir=str(tmp_path))
    assert all(point.coordinates["beta"] is None for point in summary.points)
    assert all(point.coordinates["c_beta"] == TREND_C_BETA for point in summary.points)
    return summary


@pytest.mark.slow
@pytest.mark.parametrize("algorithm", ["rf", "rfmg"])
def test_speedup_slope(tmp_path, algorithm):
    slope, _ = fit_speedup_slope(_trend_sweep(tmp_path, algorithm, [1, 4, 16]))
    assert -0.8 <= slope <= -0.2


@pytest.mark.slow
@pytest.mark.parametrize("algorithm", ["rf", "rfmg"])
def test_more_agents_lower_subopt_on_paired_seeds(tmp_path, algorithm):
    summary = _trend_sweep(tmp_path, algorithm, [1, 16])
    means = {point.coordinates["agents"]: point.mean for point in summary.points}
    assert means[16] < means[1]
