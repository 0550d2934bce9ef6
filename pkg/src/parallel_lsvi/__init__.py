from .errors import (
    SimulatorError,
    ParameterError,
    FeatureBoundError,
    GenerationError,
    ConfigError,
    DatasetError,
    NumericError,
    SolverError,
    ConsistencyError,
    ExperimentError,
)
from .envs import LinearMdpSpec, LinearMgSpec, RewardFunction, generate_random_mdp, generate_random_mg
from .agents import AlgoParams, polsvi_run, rf_explore, rf_plan, rfmg_explore, rfmg_plan
from .harness import ExperimentConfig, run_experiment

__version__ = "1.0.0"
