from .config import ExperimentConfig, GridPoint, RewardFamily, DEFAULTS, run_seed
from .checks import (
    CheckResult,
    RunCheck,
    RunCheckList,
    DoublingBoundCheck,
    OptimismRateCheck,
    RegretMonotoneCheck,
    NonNegativeGapCheck,
    default_checks,
)
from .summary import PointSummary, SweepSummary, fit_speedup_slope, theory_terms, summarize_runlogs, final_metric, metric_for
from .runner import (
    OptimismReport,
    RunOutcome,
    build_environment,
    build_reward,
    optimism_with_retry,
    run_experiment,
    run_pipeline,
)
