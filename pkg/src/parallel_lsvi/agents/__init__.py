from .params import AlgoParams, Algorithm, ClipMode
from .estimate import QEstimate
from .dataset import TrajectoryDataset
from .runlog import RunLog, LogRow
from .engine import (
    CentralServer,
    EpisodePlan,
    agent_stream,
    regression_weights,
    run_learner,
    polsvi_run,
    rf_explore,
    rfmg_explore,
)
from .planning import RfPlanner, RfmgPlanner, rf_plan, rfmg_plan, replay_covariances
