import logging
import numpy as np

from typing import List, Optional, Tuple, Union

from ..envs import FeatureMap, RewardFunction, SpecKind
from ..errors import DatasetError, ParameterError
from ..matrix_game import MatrixGame, PLANNING_TOL, solve
from ..numerics import CovarianceState, detect_doubling, new_covariance
from ..oracle import DeterministicPolicy, MixedPolicyPair
from .dataset import TrajectoryDataset
from .engine import regression_weights
from .estimate import QEstimate
from .params import AlgoParams, ClipMode

logger = logging.getLogger(__name__)


def _joint_features(features: Union[FeatureMap, np.ndarray], n_states: int) -> np.ndarray:
    if isinstance(features, FeatureMap):
        return features.joint_features
    features = np.asarray(features, dtype=np.float64)
    return features.reshape(n_states, -1, features.shape[-1])


def replay_covariances(
    dataset: TrajectoryDataset,
    features: Union[FeatureMap, np.ndarray],
    ridge: float = 1.0,
    sequential: bool = False,
) -> Tuple[List[CovarianceState], int]:
    """Rebuild Λ_h from a recorded dataset and count doubling rounds along the way.

    With `sequential=True` the K·P trajectories are replayed as K·P single-agent
    episodes instead of K episodes of P agents; the final matrices agree.
    """
    dataset.check_complete()
    joint = _joint_features(features, dataset.n_states)
    dim = joint.shape[-1]
    covariances = [new_covariance(dim, ridge) for _ in range(dataset.horizon)]

    batches = [[(k, p)] for k in range(dataset.episodes) for p in range(dataset.agents)] if sequential else [
        [(k, p) for p in range(dataset.agents)] for k in range(dataset.episodes)
    ]
    doublings = 0
    for batch in batches:
        for h, covariance in enumerate(covariances):
            before = covariance.copy()
            for k, p in batch:
                covariance.add(joint[dataset.states[k, p, h], dataset.actions[k, p, h]])
            doublings += int(detect_doubling(before, covariance))
    return covariances, doublings


class _Planner:
    """Shared setup of both planning phases: Λ_h, transition counts and the bonus u_h."""

    kind: SpecKind
    clip_mode: ClipMode

    def __init__(
        self,
        dataset: TrajectoryDataset,
        feature_map: Optional[FeatureMap] = None,
        params: Optional[AlgoParams] = None,
    ):
        if dataset.kind != self.kind:
            raise ParameterError(f"{self.__class__.__name__} needs a {self.kind.value} dataset, got {dataset.kind.value}")
        dataset.check_complete()
        feature_map = feature_map if feature_map is not None else dataset.feature_map()
        if feature_map.kind != dataset.kind or feature_map.n_states != dataset.n_states:
            raise ParameterError("feature map does not match the dataset")
        if feature_map.action_shape != dataset.action_shape or feature_map.horizon != dataset.horizon:
            raise ParameterError(
                f"feature map covers actions {feature_map.action_shape} over H={feature_map.horizon}, "
                f"dataset has {dataset.action_shape} over H={dataset.horizon}"
            )

        if params is not None:
            self.beta = params.resolve_beta(feature_map.dim, dataset.horizon)
            self.ridge = params.ridge
        elif dataset.beta is not None:
            self.beta = dataset.beta
            self.ridge = dataset.ridge
        else:
            raise DatasetError("no beta given and the dataset header does not record one")

        self.dataset = dataset
        self.feature_map = feature_map
        self.horizon = dataset.horizon
        self.features = feature_map.joint_features
        self.covariances, _ = replay_covariances(dataset, self.features, self.ridge)
        self.counts = dataset.transition_counts()
        self.inverses = [covariance.snapshot() for covariance in self.covariances]

    def _estimate(self, h: int, weights: np.ndarray, reward: np.ndarray, bonus_sign: float = 1.0) -> QEstimate:
        return QEstimate(
            weights=weights,
            inverse=self.inverses[h],
            beta=self.beta,
            horizon=self.horizon,
            clip_mode=self.clip_mode,
            reward=reward,
            bonus_sign=bonus_sign,
            capped_bonus=True,
        )

    def bonus_table(self) -> np.ndarray:
        """u_h(x, j) for every step; u/H is the reward whose optimal value bounds the planning error."""
        return np.stack(
            [self._estimate(h, np.zeros(self.features.shape[-1]), None).bonus(self.features) for h in range(self.horizon)]
        )

    def _reward_table(self, reward: RewardFunction) -> np.ndarray:
        if reward.kind != self.kind:
            raise ParameterError(f"reward is for a {reward.kind.value}, planner expects {self.kind.value}")
        table = reward.joint_table
        expected = (self.horizon, self.feature_map.n_states, self.feature_map.n_joint)
        if table.shape != expected:
            raise ParameterError(f"reward table covers {table.shape}, expected {expected}")
        return table


class RfPlanner(_Planner):
    kind = SpecKind.MDP
    clip_mode = ClipMode.UPPER

    def plan(self, reward: RewardFunction) -> DeterministicPolicy:
        rewards = self._reward_table(reward)
        n_states = self.feature_map.n_states
        values = np.zeros((self.horizon + 1, n_states))
        q_tables = np.zeros((self.horizon, n_states, self.feature_map.n_joint))
        actions = np.zeros((self.horizon, n_states), dtype=np.int64)

        for h in reversed(range(self.horizon)):
            weights = regression_weights(self.covariances[h], self.features, self.counts[h], values[h + 1])
            q_tables[h] = self._estimate(h, weights, rewards[h])(self.features)
            actions[h] = np.argmax(q_tables[h], axis=1)
            values[h] = q_tables[h, np.arange(n_states), actions[h]]

        self.values = values
        self.q_tables = q_tables
        return DeterministicPolicy(actions, self.feature_map.n_joint)


class RfmgPlanner(_Planner):
    """Optimistic and pessimistic backward passes, one matrix game per (h, x) on each."""

    kind = SpecKind.MG
    clip_mode = ClipMode.TWO_SIDED

    def __init__(self, dataset, feature_map=None, params=None, tol: float = PLANNING_TOL):
        super().__init__(dataset, feature_map, params)
        self.tol = tol

    def plan(self, reward: RewardFunction) -> MixedPolicyPair:
        rewards = self._reward_table(reward)
        n_states = self.feature_map.n_states
        n_a, n_b = self.feature_map.action_shape
        upper = np.zeros((self.horizon + 1, n_states))
        lower = np.zeros((self.horizon + 1, n_states))
        pi = np.zeros((self.horizon, n_states, n_a))
        nu = np.zeros((self.horizon, n_states, n_b))

        for h in reversed(range(self.horizon)):
            # the NE values of step h+1 are the exact expectations under (π, D̄) and (D̲, ν)
            upper_weights = regression_weights(self.covariances[h], self.features, self.counts[h], upper[h + 1])
            lower_weights = regression_weights(self.covariances[h], self.features, self.counts[h], lower[h + 1])
            q_upper = self._estimate(h, upper_weights, rewards[h])(self.features).reshape(n_states, n_a, n_b)
            q_lower = self._estimate(h, lower_weights, rewards[h], bonus_sign=-1.0)(self.features).reshape(n_states, n_a, n_b)

            for x in range(n_states):
                optimistic = solve(MatrixGame(q_upper[x]), self.tol, location=(h, x))
                pessimistic = solve(MatrixGame(q_lower[x]), self.tol, location=(h, x))
                pi[h, x] = optimistic.row_strategy
                upper[h, x] = optimistic.value
                nu[h, x] = pessimistic.col_strategy
                lower[h, x] = pessimistic.value

        self.upper_values = upper
        self.lower_values = lower
        return MixedPolicyPair(pi, nu)

    @property
    def upper_value(self) -> float:
        return float(self.upper_values[0, self.feature_map.initial_state])

    @property
    def lower_value(self) -> float:
        return float(self.lower_values[0, self.feature_map.initial_state])


def rf_plan(
    dataset: TrajectoryDataset,
    feature_map: Optional[FeatureMap],
    reward: RewardFunction,
    params: Optional[AlgoParams] = None,
) -> DeterministicPolicy:
    return RfPlanner(dataset, feature_map, params).plan(reward)


def rfmg_plan(
    dataset: TrajectoryDataset,
    feature_map: Optional[FeatureMap],
    reward: RewardFunction,
    params: Optional[AlgoParams] = None,
    tol: float = PLANNING_TOL,
) -> MixedPolicyPair:
    return RfmgPlanner(dataset, feature_map, params, tol).plan(reward)
