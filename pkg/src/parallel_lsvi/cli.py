import os
import sys
import json
import logging
import argparse

from typing import Optional
from dotenv import load_dotenv

from .agents import RfmgPlanner, RfPlanner, TrajectoryDataset
from .envs import SpecKind, load_reward, load_spec, validate
from .errors import ConfigError, ConsistencyError, ExperimentError, NumericError, ParameterError
from .harness import ExperimentConfig, SweepSummary, fit_speedup_slope, run_experiment
from .matrix_game import PLANNING_TOL
from .oracle import DeterministicPolicy, load_policy, save_policy, subopt_mdp, subopt_mg
from .utils import render_table

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4


def get_args(argv=None):
    parser = argparse.ArgumentParser(
        prog="simulate",
        description="Parallel optimistic LSVI simulator for linear MDPs and zero-sum linear Markov games",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument(
        "--log-level",
        type=str,
        default=os.environ.get("SIMULATE_LOG_LEVEL", "WARNING"),
        help="logging level, default comes from SIMULATE_LOG_LEVEL",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    run = subparsers.add_parser("run", help="execute an experiment sweep", formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    run.add_argument("--config", type=str, required=True, help="experiment config JSON")
    run.add_argument("--output-dir", type=str, default=None, help="root directory for run artifacts")
    run.add_argument(
        "--workers",
        type=int,
        default=None,
        help="rollout threads per run, default comes from SIMULATE_WORKERS or the config",
    )
    run.add_argument("--overwrite", action="store_true", help="reuse the config-hash directory instead of a fresh timestamped one")
    run.set_defaults(handler=run_command)

    check = subparsers.add_parser("validate", help="check a spec file against the linear-model constraints")
    check.add_argument("--spec", type=str, required=True, help="spec JSON")
    check.set_defaults(handler=validate_command)

    plan = subparsers.add_parser("plan", help="plan from a recorded dataset and a reward file", formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    plan.add_argument("--dataset", type=str, required=True, help="dataset JSON or NDJSON")
    plan.add_argument("--reward", type=str, required=True, help="reward JSON")
    plan.add_argument("--out", type=str, required=True, help="where to write the policy JSON")
    plan.add_argument("--tol", type=float, default=PLANNING_TOL, help="matrix-game tolerance for game datasets")
    plan.set_defaults(handler=plan_command)

    certify = subparsers.add_parser("certify", help="exact suboptimality of a policy file")
    certify.add_argument("--spec", type=str, required=True, help="spec JSON")
    certify.add_argument("--policy", type=str, required=True, help="policy JSON")
    certify.add_argument("--reward", type=str, default=None, help="reward JSON, default is the spec's own reward")
    certify.set_defaults(handler=certify_command)

    slope = subparsers.add_parser("slope", help="fit log(metric) against log(K*P)")
    slope.add_argument("--summary", type=str, required=True, help="summary.json of a sweep")
    slope.add_argument("--metric", type=str, default=None, help="regret or subopt, default is the summary's metric")
    slope.set_defaults(handler=slope_command)

    return parser.parse_args(argv)


def environment_workers() -> Optional[int]:
    value = os.environ.get("SIMULATE_WORKERS")
    if not value:
        return None
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"SIMULATE_WORKERS must be an integer, got {value!r}") from None


def run_command(args) -> int:
    workers = args.workers if args.workers is not None else environment_workers()
    config = ExperimentConfig.from_file(args.config)
    overrides = {"overwrite": True} if args.overwrite else {}
    if workers is not None:
        overrides["workers"] = workers
    config.update(**overrides)
    config.validate()

    summary = run_experiment(config, output_dir=args.output_dir)
    print(summary.table())
    print(f"artifacts: {summary.directory}")
    return EXIT_OK


def validate_command(args) -> int:
    spec = load_spec(args.spec)
    violations = validate(spec)
    print(spec)
    if not violations:
        print("no violations")
        return EXIT_OK
    rows = [{"code": v.code, "index": v.index, "value": f"{v.value:.6g}", "message": v.message} for v in violations]
    print(render_table(rows, ["code", "index", "value", "message"], "Violations"))
    return EXIT_CONFIG


def plan_command(args) -> int:
    dataset = TrajectoryDataset.load(args.dataset)
    feature_map = dataset.feature_map()
    reward = load_reward(feature_map, args.reward)
    if dataset.kind == SpecKind.MG:
        policy = RfmgPlanner(dataset, feature_map, tol=args.tol).plan(reward)
    else:
        policy = RfPlanner(dataset, feature_map).plan(reward)
    save_policy(policy, args.out)
    print(f"{dataset} -> {args.out}")
    return EXIT_OK


def certify_command(args) -> int:
    spec = load_spec(args.spec)
    policy = load_policy(args.policy)
    reward = load_reward(spec, args.reward) if args.reward else spec.reward_function()
    if isinstance(policy, DeterministicPolicy):
        value = subopt_mdp(spec, policy, reward)
    else:
        value = subopt_mg(spec, policy, reward)
    print(json.dumps({"spec_hash": spec.hash(), "subopt": value}))
    return EXIT_OK


def slope_command(args) -> int:
    summary = SweepSummary.load(args.summary)
    slope, stderr = fit_speedup_slope(summary, args.metric)
    print(json.dumps({"metric": args.metric or summary.metric, "slope": slope, "stderr": stderr}))
    return EXIT_OK


def exit_code(error: BaseException) -> int:
    """Map an error to the process exit status.

    Numeric and consistency failures give 3. OSError and undecodable JSON give 4, including a
    config, spec, dataset or policy file that is not valid JSON. Parameter errors give 2, which
    covers well-formed JSON with bad values. A sweep failure maps through its cause.
    """
    if isinstance(error, ExperimentError) and error.__cause__ is not None:
        return exit_code(error.__cause__)
    if isinstance(error, (NumericError, ConsistencyError)):
        return EXIT_NUMERIC
    if isinstance(error, (OSError, json.JSONDecodeError)):
        return EXIT_IO
    if isinstance(error, (ParameterError, ValueError)):
        return EXIT_CONFIG
    return EXIT_NUMERIC


def main(argv=None) -> int:
    load_dotenv()
    args = get_args(argv)
    logging.basicConfig(level=args.log_level.upper())
    try:
        return args.handler(args)
    except (ParameterError, NumericError, ConsistencyError, ExperimentError, OSError, ValueError) as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return exit_code(e)


if __name__ == "__main__":
    sys.exit(main())
