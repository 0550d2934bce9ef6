import logging
import numpy as np

from typing import Tuple

from ..envs import LinearMgSpec, RewardFunction, SpecKind
from ..errors import ParameterError
from ..matrix_game import MatrixGame, PLANNING_TOL, solve
from .mdp import _reward_table, bellman_backup, clamp_gap
from .policies import MixedPolicyPair, ValueTable

logger = logging.getLogger(__name__)


def _check_game(spec) -> None:
    if spec.kind != SpecKind.MG:
        raise ParameterError(f"expected a Markov game spec, got {spec.kind.value}")


def _check_strategies(spec: LinearMgSpec, table: np.ndarray, n_actions: int, name: str) -> np.ndarray:
    expected = (spec.horizon, spec.n_states, n_actions)
    if table.shape != expected:
        raise ParameterError(f"{name} has shape {table.shape}, expected {expected}")
    return table


def _game_q(spec: LinearMgSpec, rewards: np.ndarray, h: int, next_values: np.ndarray) -> np.ndarray:
    return bellman_backup(spec, rewards, h, next_values).reshape(spec.n_states, spec.n_actions_p1, spec.n_actions_p2)


def evaluate_joint_policy(spec: LinearMgSpec, pair: MixedPolicyPair, reward: RewardFunction = None) -> ValueTable:
    _check_game(spec)
    rewards = _reward_table(spec, reward)
    pi = _check_strategies(spec, pair.pi, spec.n_actions_p1, "pi")
    nu = _check_strategies(spec, pair.nu, spec.n_actions_p2, "nu")

    values = np.zeros((spec.horizon + 1, spec.n_states))
    q = np.zeros((spec.horizon, spec.n_states, spec.n_actions_p1, spec.n_actions_p2))
    for h in reversed(range(spec.horizon)):
        q[h] = _game_q(spec, rewards, h, values[h + 1])
        values[h] = np.einsum("xa,xab,xb->x", pi[h], q[h], nu[h])
    return ValueTable(values, q)


def best_response_p2(
    spec: LinearMgSpec, pi: np.ndarray, reward: RewardFunction = None
) -> Tuple[np.ndarray, ValueTable]:
    """Pure minimising response to a fixed Player 1 policy, ties to the lowest index."""
    _check_game(spec)
    rewards = _reward_table(spec, reward)
    pi = _check_strategies(spec, np.asarray(pi, dtype=np.float64), spec.n_actions_p1, "pi")

    values = np.zeros((spec.horizon + 1, spec.n_states))
    q = np.zeros((spec.horizon, spec.n_states, spec.n_actions_p1, spec.n_actions_p2))
    responses = np.zeros((spec.horizon, spec.n_states), dtype=np.int64)
    for h in reversed(range(spec.horizon)):
        q[h] = _game_q(spec, rewards, h, values[h + 1])
        against = np.einsum("xa,xab->xb", pi[h], q[h])
        responses[h] = np.argmin(against, axis=1)
        values[h] = against[np.arange(spec.n_states), responses[h]]
    nu = np.eye(spec.n_actions_p2)[responses]
    return nu, ValueTable(values, q)


def best_response_p1(
    spec: LinearMgSpec, nu: np.ndarray, reward: RewardFunction = None
) -> Tuple[np.ndarray, ValueTable]:
    """Pure maximising response to a fixed Player 2 policy, ties to the lowest index."""
    _check_game(spec)
    rewards = _reward_table(spec, reward)
    nu = _check_strategies(spec, np.asarray(nu, dtype=np.float64), spec.n_actions_p2, "nu")

    values = np.zeros((spec.horizon + 1, spec.n_states))
    q = np.zeros((spec.horizon, spec.n_states, spec.n_actions_p1, spec.n_actions_p2))
    responses = np.zeros((spec.horizon, spec.n_states), dtype=np.int64)
    for h in reversed(range(spec.horizon)):
        q[h] = _game_q(spec, rewards, h, values[h + 1])
        against = np.einsum("xab,xb->xa", q[h], nu[h])
        responses[h] = np.argmax(against, axis=1)
        values[h] = against[np.arange(spec.n_states), responses[h]]
    pi = np.eye(spec.n_actions_p1)[responses]
    return pi, ValueTable(values, q)


def duality_gap(spec: LinearMgSpec, pair: MixedPolicyPair, reward: RewardFunction = None) -> Tuple[float, float, float]:
    """(V^{br1(ν),ν}, V^{π,br2(π)}, clamped gap) at the initial state."""
    s0 = spec.initial_state
    _, upper = best_response_p1(spec, pair.nu, reward)
    _, lower = best_response_p2(spec, pair.pi, reward)
    gap = clamp_gap(upper.at(s0) - lower.at(s0), "duality gap")
    return upper.at(s0), lower.at(s0), gap


def subopt_mg(spec: LinearMgSpec, pair: MixedPolicyPair, reward: RewardFunction = None) -> float:
    return duality_gap(spec, pair, reward)[2]


def nash_value_backward(
    spec: LinearMgSpec, reward: RewardFunction = None, tol: float = PLANNING_TOL
) -> Tuple[ValueTable, MixedPolicyPair]:
    """Shapley's backward induction: one matrix game per (h, x) on Q†_h(x, ·, ·)."""
    _check_game(spec)
    rewards = _reward_table(spec, reward)

    values = np.zeros((spec.horizon + 1, spec.n_states))
    q = np.zeros((spec.horizon, spec.n_states, spec.n_actions_p1, spec.n_actions_p2))
    pi = np.zeros((spec.horizon, spec.n_states, spec.n_actions_p1))
    nu = np.zeros((spec.horizon, spec.n_states, spec.n_actions_p2))
    for h in reversed(range(spec.horizon)):
        q[h] = _game_q(spec, rewards, h, values[h + 1])
        for x in range(spec.n_states):
            solution = solve(MatrixGame(q[h, x]), tol, location=(h, x))
            pi[h, x] = solution.row_strategy
            nu[h, x] = solution.col_strategy
            values[h, x] = solution.value
        logger.debug(f"nash backup at step {h}: V range [{values[h].min():.4f}, {values[h].max():.4f}]")
    return ValueTable(values, q), MixedPolicyPair(pi, nu)
