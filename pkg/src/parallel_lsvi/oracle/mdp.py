import logging
import numpy as np

from typing import Tuple, Union

from ..envs import LinearSpec, RewardFunction
from ..errors import ConsistencyError, ParameterError
from .policies import DeterministicPolicy, ValueTable

logger = logging.getLogger(__name__)

GAP_TOL = 1e-9


def _reward_table(spec: LinearSpec, reward: RewardFunction) -> np.ndarray:
    if reward is None:
        return spec.joint_rewards
    table = reward.joint_table
    if table.shape != spec.joint_rewards.shape:
        raise ParameterError(f"reward covers {table.shape} (H, |S|, joint actions), spec needs {spec.joint_rewards.shape}")
    return table


def _policy_distribution(spec: LinearSpec, policy) -> np.ndarray:
    if isinstance(policy, DeterministicPolicy):
        if policy.n_actions != spec.n_joint:
            raise ParameterError(f"policy chooses among {policy.n_actions} actions, spec has {spec.n_joint}")
        dist = policy.as_distribution()
    else:
        dist = np.asarray(policy, dtype=np.float64)
        if dist.ndim == 2 + len(spec.action_shape):
            dist = dist.reshape(dist.shape[0], dist.shape[1], -1)
    expected = (spec.horizon, spec.n_states, spec.n_joint)
    if dist.shape != expected:
        raise ParameterError(f"policy has shape {dist.shape}, expected {expected}")
    if np.any(dist < -GAP_TOL) or np.max(np.abs(dist.sum(axis=-1) - 1.0)) > GAP_TOL:
        raise ParameterError("policy rows must be probability distributions")
    return dist


def bellman_backup(spec: LinearSpec, rewards: np.ndarray, h: int, next_values: np.ndarray) -> np.ndarray:
    """Q_h(x, j) = r_h(x, j) + Σ_x' P_h(x'|x, j) V_{h+1}(x')."""
    return rewards[h] + np.einsum("xjy,y->xj", spec.joint_kernel[h], next_values)


def evaluate_policy(
    spec: LinearSpec, policy: Union[DeterministicPolicy, np.ndarray], reward: RewardFunction = None
) -> ValueTable:
    """Exact value of a fixed (possibly stochastic) policy by backward induction."""
    rewards = _reward_table(spec, reward)
    dist = _policy_distribution(spec, policy)

    values = np.zeros((spec.horizon + 1, spec.n_states))
    q = np.zeros((spec.horizon, spec.n_states, spec.n_joint))
    for h in reversed(range(spec.horizon)):
        q[h] = bellman_backup(spec, rewards, h, values[h + 1])
        values[h] = np.einsum("xj,xj->x", dist[h], q[h])
    return ValueTable(values, q)


def optimal_value(spec: LinearSpec, reward: RewardFunction = None) -> Tuple[ValueTable, DeterministicPolicy]:
    """V* and its greedy policy; on a Markov game the max runs over joint actions."""
    rewards = _reward_table(spec, reward)

    values = np.zeros((spec.horizon + 1, spec.n_states))
    q = np.zeros((spec.horizon, spec.n_states, spec.n_joint))
    actions = np.zeros((spec.horizon, spec.n_states), dtype=np.int64)
    for h in reversed(range(spec.horizon)):
        q[h] = bellman_backup(spec, rewards, h, values[h + 1])
        # np.argmax returns the first maximiser
        actions[h] = np.argmax(q[h], axis=1)
        values[h] = q[h, np.arange(spec.n_states), actions[h]]
    return ValueTable(values, q), DeterministicPolicy(actions, spec.n_joint)


def clamp_gap(gap: float, name: str) -> float:
    if gap < -GAP_TOL:
        raise ConsistencyError(f"{name} is {gap:.3e}, below the float tolerance -{GAP_TOL:g}")
    return max(0.0, float(gap))


def subopt_mdp(spec: LinearSpec, policy, reward: RewardFunction = None) -> float:
    return greedy_policy_value_gap(spec, policy, reward)[2]


def greedy_policy_value_gap(spec: LinearSpec, policy, reward: RewardFunction = None) -> Tuple[float, float, float]:
    """(V*_1(s0), V^π_1(s0), clamped gap) in one pass over the optimal DP."""
    optimal, _ = optimal_value(spec, reward)
    achieved = evaluate_policy(spec, policy, reward)
    s0 = spec.initial_state
    gap = clamp_gap(optimal.at(s0) - achieved.at(s0), "suboptimality")
    return optimal.at(s0), achieved.at(s0), gap
