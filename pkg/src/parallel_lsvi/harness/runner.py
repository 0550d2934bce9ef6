import os
import json
import time
import logging

from datetime import datetime
from dataclasses import dataclass, field
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Tuple

from ..agents import (
    Algorithm,
    AlgoParams,
    RfPlanner,
    RfmgPlanner,
    RunLog,
    TrajectoryDataset,
    polsvi_run,
    rf_explore,
    rfmg_explore,
)
from ..agents import runlog as metrics
from ..envs import LinearSpec, RewardFunction, SpecKind, generate_random_mdp, generate_random_mg, load_reward, load_spec
from ..errors import ConfigError, ExperimentError, SimulatorError
from ..oracle import nash_value_backward, optimal_value, subopt_mdp, subopt_mg
from .checks import default_checks
from .config import ExperimentConfig, GridPoint, RewardFamily
from .summary import PointSummary, SweepSummary, metric_for, theory_terms

logger = logging.getLogger(__name__)

DEFAULT_OUTPUT_DIR = "runs"
SANDWICH_TOL = 1e-7


@dataclass
class RunOutcome:
    value: float
    runlog: RunLog
    dataset: TrajectoryDataset
    wall_time: float = 0.0


@dataclass
class OptimismReport:
    rate: float
    beta: float
    retry_rate: Optional[float] = None
    retry_beta: Optional[float] = None

    @property
    def final_rate(self) -> float:
        return self.rate if self.retry_rate is None else self.retry_rate


def build_environment(config: ExperimentConfig, point: GridPoint) -> LinearSpec:
    env = config.environment
    if env["spec"] is not None:
        spec = load_spec(env["spec"])
    elif config.expected_kind == SpecKind.MG:
        spec = generate_random_mg(env["n_states"], env["n_actions"], env["n_actions_p2"], point.horizon, point.dim, env["seed"])
    else:
        spec = generate_random_mdp(env["n_states"], env["n_actions"], point.horizon, point.dim, env["seed"])
    if spec.kind != config.expected_kind:
        raise ConfigError(f"algorithm {config.algorithm} needs a {config.expected_kind.value} environment, got {spec.kind.value}")
    return spec


def build_reward(config: ExperimentConfig, spec: LinearSpec) -> RewardFunction:
    reward = config.reward
    if reward["path"] is not None:
        return load_reward(spec, reward["path"])
    family = RewardFamily(reward["family"])
    if family == RewardFamily.SINGLE_GOAL:
        goal = spec.n_states - 1 if reward["goal_state"] is None else reward["goal_state"]
        return RewardFunction.single_goal(spec, goal)
    if family == RewardFamily.RANDOM_LINEAR:
        return RewardFunction.random_linear(spec, reward["seed"])
    if family == RewardFamily.CONSTANT:
        return RewardFunction.constant(spec, reward["value"])
    return RewardFunction.zero(spec)


def run_pipeline(spec: LinearSpec, params: AlgoParams, algorithm: Algorithm, reward: Optional[RewardFunction] = None) -> RunOutcome:
    """One replication: the online loop for polsvi, explore -> plan -> certify otherwise."""
    algorithm = Algorithm(algorithm)
    start = time.perf_counter()
    last = params.episodes - 1
    s0 = spec.initial_state

    if algorithm == Algorithm.POLSVI:
        runlog, dataset = polsvi_run(spec, params)
        return RunOutcome(runlog.final_regret(), runlog, dataset, time.perf_counter() - start)

    if reward is None:
        raise ConfigError(f"{algorithm.value} planning needs a reward function")

    if algorithm == Algorithm.RF:
        dataset, runlog = rf_explore(spec, params)
        planner = RfPlanner(dataset, spec.feature_map(), params)
        policy = planner.plan(reward)
        value = subopt_mdp(spec, policy, reward)
    else:
        dataset, runlog = rfmg_explore(spec, params)
        planner = RfmgPlanner(dataset, spec.feature_map(), params)
        pair = planner.plan(reward)
        value = subopt_mg(spec, pair, reward)
        runlog.log(metrics.UPPER_VALUE, planner.upper_value, last)
        runlog.log(metrics.LOWER_VALUE, planner.lower_value, last)
        runlog.results["game_tol"] = planner.tol
        if params.oracle:
            nash_value = nash_value_backward(spec, reward)[0].at(s0)
            runlog.results["nash_value"] = nash_value
            runlog.results["sandwich"] = planner.upper_value + SANDWICH_TOL >= nash_value >= planner.lower_value - SANDWICH_TOL

    runlog.log(metrics.SUBOPT, value, last)
    runlog.results["subopt"] = value
    if params.oracle:
        # V*(s0, u/H) bounds the planning error for every reward at once
        uncertainty = RewardFunction.from_table(spec, planner.bonus_table() / spec.horizon)
        runlog.log(metrics.PLANNING_UNCERTAINTY, optimal_value(spec, uncertainty)[0].at(s0), last)
    return RunOutcome(value, runlog, dataset, time.perf_counter() - start)


def optimism_with_retry(spec: LinearSpec, params: AlgoParams, target: float = 0.95) -> OptimismReport:
    """Exploration optimism rate, rerun once with doubled beta when it misses `target`."""
    explore = rfmg_explore if spec.kind == SpecKind.MG else rf_explore
    params = params.replace(oracle=True)
    beta = params.resolve_beta(spec.dim, spec.horizon)
    _, runlog = explore(spec, params)
    report = OptimismReport(rate=runlog.optimism_rate(), beta=beta)
    if report.rate >= target:
        return report

    logger.warning(f"optimism rate {report.rate:.4f} below {target:.2f} at beta={beta:.6g}, retrying with {2 * beta:.6g}")
    _, retry = explore(spec, params.replace(beta=2.0 * beta))
    report.retry_rate = retry.optimism_rate()
    report.retry_beta = 2.0 * beta
    return report


def _run_directory(root: str, config_hash: str, overwrite: bool) -> str:
    if overwrite:
        path = os.path.join(root, config_hash[:12])
        os.makedirs(path, exist_ok=True)
        return path
    base = os.path.join(root, f"{datetime.now().strftime('%Y%m%d-%H%M%S')}-{config_hash[:12]}")
    path, suffix = base, 1
    while os.path.exists(path):
        path = f"{base}-{suffix}"
        suffix += 1
    os.makedirs(path)
    return path


def _write_artifacts(summary: SweepSummary, directory: str) -> None:
    summary.save(os.path.join(directory, "summary.json"))
    with open(os.path.join(directory, "timing.json"), "w") as f:
        json.dump(summary.timing(), f, sort_keys=True, indent=2)
    summary.save_curve(os.path.join(directory, "curve.csv"))


@dataclass
class _PointJobs:
    index: int
    point: GridPoint
    spec: LinearSpec
    reward: Optional[RewardFunction]
    directory: str
    outcomes: List[RunOutcome] = field(default_factory=list)


def run_experiment(config: ExperimentConfig, output_dir: Optional[str] = None) -> SweepSummary:
    """Execute every grid point `config.replications` times and write the sweep artifacts."""
    config.check_params()
    config_hash = config.hash()
    root = output_dir or config.output_dir or os.environ.get("SIMULATE_OUTPUT_DIR") or DEFAULT_OUTPUT_DIR
    directory = _run_directory(root, config_hash, config.overwrite)
    with open(os.path.join(directory, "config.json"), "w") as f:
        json.dump({"config_hash": config_hash, "config": config.provenance()}, f, sort_keys=True, indent=2)

    algorithm = Algorithm(config.algorithm)
    summary = SweepSummary(algorithm.value, metric_for(algorithm.value), config_hash, directory=directory)
    checks = default_checks(algorithm.value)

    specs: Dict[Tuple[Optional[int], Optional[int]], LinearSpec] = {}
    points: List[_PointJobs] = []
    for index, point in enumerate(config.grid_points()):
        try:
            key = (point.dim, point.horizon)
            if key not in specs:
                specs[key] = build_environment(config, point)
            spec = specs[key]
            reward = None if algorithm == Algorithm.POLSVI else build_reward(config, spec)
        except (SimulatorError, OSError) as e:
            raise ExperimentError(str(e), point.coordinates()) from e
        point_dir = os.path.join(directory, "points", f"{index:03d}-{point.label()}")
        os.makedirs(point_dir, exist_ok=True)
        points.append(_PointJobs(index, point, spec, reward, point_dir))

    logger.info(f"sweep {config_hash[:12]}: {len(points)} grid points x {config.replications} replications -> {directory}")
    jobs = [(point_jobs, r) for point_jobs in points for r in range(config.replications)]

    def execute(item) -> RunOutcome:
        point_jobs, replication = item
        params = point_jobs.point.params(replication, config.ridge, config.workers, config.oracle)
        return run_pipeline(point_jobs.spec, params, algorithm, point_jobs.reward)

    with ThreadPoolExecutor(max_workers=config.parallel_runs) as executor:
        futures = [executor.submit(execute, item) for item in jobs]
        for (point_jobs, replication), future in zip(jobs, futures):
            try:
                outcome = future.result()
                name = f"run_{replication:03d}"
                outcome.runlog.config_hash = config_hash
                outcome.runlog.save(point_jobs.directory, name)
                if config.save_datasets:
                    outcome.dataset.save(os.path.join(point_jobs.directory, f"{name}.dataset.json"))
            except (SimulatorError, OSError) as e:
                for pending in futures:
                    pending.cancel()
                summary.status = "aborted"
                _write_artifacts(summary, directory)
                coordinates = dict(point_jobs.point.coordinates(), replication=replication)
                raise ExperimentError(str(e), coordinates) from e

            point_jobs.outcomes.append(outcome)
            if len(point_jobs.outcomes) == config.replications:
                summary.points.append(_summarize_point(point_jobs, checks, algorithm, config))
                logger.info(f"grid point {point_jobs.index}: mean {summary.metric} {summary.points[-1].mean:.6g}")

    _write_artifacts(summary, directory)
    return summary


def _summarize_point(point_jobs: _PointJobs, checks, algorithm: Algorithm, config: ExperimentConfig) -> PointSummary:
    point = point_jobs.point
    failures: Dict[str, int] = {}
    for replication, outcome in enumerate(point_jobs.outcomes):
        for result in checks(outcome.runlog):
            if not result.passed:
                failures[result.name] = failures.get(result.name, 0) + 1
                logger.warning(f"grid point {point_jobs.index} replication {replication}: {result.name} failed, {result.detail}")

    spec = point_jobs.spec
    return PointSummary(
        coordinates=dict(point.coordinates(), dim=spec.dim, horizon=spec.horizon),
        values=[outcome.value for outcome in point_jobs.outcomes],
        doubling_counts=[outcome.runlog.doubling_count for outcome in point_jobs.outcomes],
        optimism_rates=[outcome.runlog.optimism_rate() for outcome in point_jobs.outcomes],
        check_failures=failures,
        theory=theory_terms(algorithm.value, spec.dim, spec.horizon, point.episodes, point.agents, point.delta),
        wall_time=sum(outcome.wall_time for outcome in point_jobs.outcomes),
    )
