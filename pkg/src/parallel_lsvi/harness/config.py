import os
import copy
import json
import itertools
import logging
import numpy as np

from dataclasses import dataclass
from typing import Any, Dict, List, Optional

from ..agents import Algorithm, AlgoParams
from ..envs import SpecKind
from ..errors import ConfigError, ParameterError
from ..utils import ExplicitEnum, content_hash

logger = logging.getLogger(__name__)


class RewardFamily(ExplicitEnum):
    SINGLE_GOAL = "single-goal"
    RANDOM_LINEAR = "random-linear"
    ZERO = "zero"
    CONSTANT = "constant"


DEFAULTS: Dict[str, Any] = {
    "algorithm": "rf",
    "environment": {
        "spec": None,
        "n_states": 5,
        "n_actions": 3,
        "n_actions_p2": 3,
        "horizon": 4,
        "dim": 6,
        "seed": 0,
    },
    "grid": {
        "episodes": [100],
        "agents": [1, 4],
        "beta": [None],
        "c_beta": [1.0],
        "delta": [0.05],
        "seed": [0],
        "dim": [None],
        "horizon": [None],
    },
    "reward": {
        "family": "single-goal",
        "path": None,
        "goal_state": None,
        "value": 1.0,
        "seed": 0,
    },
    "replications": 10,
    "ridge": 1.0,
    "output_dir": None,
    "oracle": True,
    "save_datasets": False,
    "workers": 1,
    "parallel_runs": 1,
    "overwrite": False,
}

SECTIONS = ("environment", "grid", "reward")
# execution settings; they never change a result and stay out of the config hash
EXECUTION_KEYS = ("output_dir", "workers", "parallel_runs", "overwrite")


def run_seed(seed: int, replication: int) -> int:
    """Seed of one replication; distinct (seed, replication) pairs give independent streams."""
    return int(np.random.SeedSequence([seed, replication]).generate_state(1)[0])


@dataclass(frozen=True)
class GridPoint:
    episodes: int
    agents: int
    beta: Optional[float]
    c_beta: float
    delta: float
    seed: int
    dim: Optional[int]
    horizon: Optional[int]

    def coordinates(self) -> dict:
        return {
            "episodes": self.episodes,
            "agents": self.agents,
            "beta": self.beta,
            "c_beta": self.c_beta,
            "delta": self.delta,
            "seed": self.seed,
            "dim": self.dim,
            "horizon": self.horizon,
        }

    def label(self) -> str:
        beta = "derived" if self.beta is None else f"{self.beta:g}"
        return f"K{self.episodes}-P{self.agents}-beta{beta}-c{self.c_beta:g}-delta{self.delta:g}-seed{self.seed}-d{self.dim}-H{self.horizon}"

    def params(self, replication: int, ridge: float, workers: int, oracle: bool) -> AlgoParams:
        return AlgoParams(
            episodes=self.episodes,
            agents=self.agents,
            ridge=ridge,
            beta=self.beta,
            c_beta=self.c_beta,
            delta=self.delta,
            seed=run_seed(self.seed, replication),
            workers=workers,
            oracle=oracle,
        )


def _positive_int(value, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise ConfigError(f"Invalid '{name}' parameter {value!r}. Must be a positive integer.")
    return value


def _non_negative_int(value, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < 0:
        raise ConfigError(f"Invalid '{name}' parameter {value!r}. Must be a non-negative integer.")
    return value


def _number(value, name: str, allow_none: bool = False) -> Optional[float]:
    if value is None and allow_none:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"Invalid '{name}' parameter {value!r}. Must be a number.")
    return float(value)


def _flag(value, name: str) -> bool:
    if not isinstance(value, bool):
        raise ConfigError(f"Invalid '{name}' parameter {value!r}. Must be true or false.")
    return value


def _grid_list(value, name: str) -> list:
    if not isinstance(value, list) or not value:
        raise ConfigError(f"Invalid 'grid.{name}' parameter {value!r}. Must be a non-empty list.")
    return value


class ExperimentConfig:
    """Sweep description loaded from JSON; missing keys take the values in DEFAULTS."""

    def __init__(self, payload: Optional[dict] = None, **kwargs):
        payload = {} if payload is None else payload
        if not isinstance(payload, dict):
            raise ConfigError("experiment config must be a JSON object")
        self._check_keys(payload)

        config = copy.deepcopy(DEFAULTS)
        for key, value in payload.items():
            if key in SECTIONS:
                config[key].update(value)
            else:
                config[key] = value

        for key, value in config.items():
            setattr(self, key, value)
        self.update(**kwargs)
        self.validate()

    @classmethod
    def from_file(cls, path: str, **kwargs) -> "ExperimentConfig":
        with open(path, "r") as f:
            payload = json.load(f)
        config = cls(payload, **kwargs)
        spec_path = config.environment["spec"]
        if spec_path is not None and not os.path.isabs(spec_path):
            config.environment["spec"] = os.path.join(os.path.dirname(os.path.abspath(path)), spec_path)
        reward_path = config.reward["path"]
        if reward_path is not None and not os.path.isabs(reward_path):
            config.reward["path"] = os.path.join(os.path.dirname(os.path.abspath(path)), reward_path)
        return config

    @staticmethod
    def _check_keys(payload: dict) -> None:
        unknown = sorted(set(payload) - set(DEFAULTS))
        if unknown:
            raise ConfigError(f"unknown config keys {unknown}, valid keys are {sorted(DEFAULTS)}")
        for section in SECTIONS:
            if section not in payload:
                continue
            if not isinstance(payload[section], dict):
                raise ConfigError(f"config section '{section}' must be an object")
            unknown = sorted(set(payload[section]) - set(DEFAULTS[section]))
            if unknown:
                raise ConfigError(f"unknown keys {unknown} in '{section}', valid keys are {sorted(DEFAULTS[section])}")

    def update(self, **kwargs) -> dict:
        """Overwrite known top-level fields and return the unused keyword arguments."""
        to_remove = []
        for key, value in kwargs.items():
            if key in DEFAULTS and key not in SECTIONS:
                setattr(self, key, value)
                to_remove.append(key)

        unused_kwargs = {key: value for key, value in kwargs.items() if key not in to_remove}
        return unused_kwargs

    def validate(self) -> None:
        try:
            self.algorithm = Algorithm(self.algorithm).value
        except ValueError as e:
            raise ConfigError(str(e)) from e

        env = self.environment
        if env["spec"] is not None and not isinstance(env["spec"], str):
            raise ConfigError(f"Invalid 'environment.spec' parameter {env['spec']!r}. Must be a path or null.")
        for name in ("n_states", "n_actions", "n_actions_p2", "horizon", "dim"):
            _positive_int(env[name], f"environment.{name}")
        _non_negative_int(env["seed"], "environment.seed")

        grid = self.grid
        for name in ("episodes", "agents"):
            for value in _grid_list(grid[name], name):
                _positive_int(value, f"grid.{name}")
        for value in _grid_list(grid["beta"], "beta"):
            beta = _number(value, "grid.beta", allow_none=True)
            if beta is not None and beta < 0.0:
                raise ConfigError(f"Invalid 'grid.beta' parameter {value!r}. Must be non-negative.")
        for value in _grid_list(grid["c_beta"], "c_beta"):
            if _number(value, "grid.c_beta") < 0.0:
                raise ConfigError(f"Invalid 'grid.c_beta' parameter {value!r}. Must be non-negative.")
        for value in _grid_list(grid["delta"], "delta"):
            if not 0.0 < _number(value, "grid.delta") < 1.0:
                raise ConfigError(f"Invalid 'grid.delta' parameter {value!r}. Must lie in (0, 1).")
        for value in _grid_list(grid["seed"], "seed"):
            _non_negative_int(value, "grid.seed")
        for name in ("dim", "horizon"):
            for value in _grid_list(grid[name], name):
                if value is not None:
                    _positive_int(value, f"grid.{name}")
                    if env["spec"] is not None:
                        raise ConfigError(f"'grid.{name}' cannot vary when the environment is a spec file")

        reward = self.reward
        if reward["path"] is None:
            try:
                reward["family"] = RewardFamily(reward["family"]).value
            except ValueError as e:
                raise ConfigError(str(e)) from e
        elif not isinstance(reward["path"], str):
            raise ConfigError(f"Invalid 'reward.path' parameter {reward['path']!r}. Must be a path or null.")
        if reward["goal_state"] is not None:
            _non_negative_int(reward["goal_state"], "reward.goal_state")
        value = _number(reward["value"], "reward.value")
        if not 0.0 <= value <= 1.0:
            raise ConfigError(f"Invalid 'reward.value' parameter {value!r}. Must lie in [0, 1].")
        _non_negative_int(reward["seed"], "reward.seed")

        _positive_int(self.replications, "replications")
        _positive_int(self.workers, "workers")
        _positive_int(self.parallel_runs, "parallel_runs")
        if not _number(self.ridge, "ridge") > 0.0:
            raise ConfigError(f"Invalid 'ridge' parameter {self.ridge!r}. Must be positive.")
        for name in ("oracle", "save_datasets", "overwrite"):
            _flag(getattr(self, name), name)
        if self.output_dir is not None and not isinstance(self.output_dir, str):
            raise ConfigError(f"Invalid 'output_dir' parameter {self.output_dir!r}. Must be a path or null.")
        if self.algorithm == Algorithm.POLSVI.value and not self.oracle:
            raise ConfigError("polsvi reports regret, which needs 'oracle': true")

    @property
    def expected_kind(self) -> SpecKind:
        return SpecKind.MG if self.algorithm == Algorithm.RFMG.value else SpecKind.MDP

    def grid_points(self) -> List[GridPoint]:
        grid = self.grid
        points = []
        for episodes, agents, beta, c_beta, delta, seed, dim, horizon in itertools.product(
            grid["episodes"], grid["agents"], grid["beta"], grid["c_beta"], grid["delta"], grid["seed"], grid["dim"], grid["horizon"]
        ):
            if self.environment["spec"] is None:
                dim = self.environment["dim"] if dim is None else dim
                horizon = self.environment["horizon"] if horizon is None else horizon
            points.append(GridPoint(episodes, agents, beta, float(c_beta), float(delta), seed, dim, horizon))
        return points

    def check_params(self) -> None:
        """Build AlgoParams for every grid point so invalid combinations fail before any run starts."""
        for point in self.grid_points():
            try:
                point.params(0, self.ridge, self.workers, self.oracle)
            except ParameterError as e:
                raise ConfigError(f"grid point {point.coordinates()}: {e}") from e

    def to_dict(self) -> dict:
        return {key: copy.deepcopy(getattr(self, key)) for key in DEFAULTS}

    def provenance(self) -> dict:
        return {key: value for key, value in self.to_dict().items() if key not in EXECUTION_KEYS}

    def hash(self) -> str:
        return content_hash(self.provenance())
