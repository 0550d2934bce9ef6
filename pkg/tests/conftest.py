import json
import pytest
import numpy as np

from parallel_lsvi.envs import generate_random_mdp, generate_random_mg, tabular_mdp, tabular_mg


@pytest.fixture
def chain_mdp():
    """Two states, action 0 stays and action 1 switches, H=2.

    Hand backward induction with these rewards gives V*_0(0) = 1 (switch, then
    collect 1 at state 1) and 0.4 for the always-stay policy.
    """
    horizon, n_states, n_actions = 2, 2, 2
    transitions = np.zeros((horizon, n_states, n_actions, n_states))
    for h in range(horizon):
        for x in range(n_states):
            transitions[h, x, 0, x] = 1.0
            transitions[h, x, 1, 1 - x] = 1.0
    rewards = np.zeros((horizon, n_states, n_actions))
    rewards[:, 0, 0] = 0.2
    rewards[:, 1, 0] = 1.0
    rewards[:, 1, 1] = 0.5
    return tabular_mdp(transitions, rewards)


@pytest.fixture
def tabular_spec():
    return generate_random_mdp(n_states=2, n_actions=2, horizon=3, dim=4, seed=0)


@pytest.fixture
def random_mdp():
    return generate_random_mdp(n_states=4, n_actions=3, horizon=4, dim=5, seed=7)


@pytest.fixture
def random_mg():
    return generate_random_mg(n_states=3, n_actions_p1=2, n_actions_p2=2, horizon=3, dim=4, seed=1)


def _one_step_game(payoff):
    payoff = np.asarray(payoff, dtype=np.float64)
    n_a, n_b = payoff.shape
    transitions = np.ones((1, 1, n_a, n_b, 1))
    return tabular_mg(transitions, payoff.reshape(1, 1, n_a, n_b))


@pytest.fixture
def one_step_game():
    """Builds a single-state H=1 game whose reward table is the given payoff in [0, 1]."""
    return _one_step_game


@pytest.fixture
def matching_pennies():
    # payoff [[1, -1], [-1, 1]] rescaled to [0, 1] by (payoff + 1) / 2
    return _one_step_game([[1.0, 0.0], [0.0, 1.0]])


@pytest.fixture
def write_config(tmp_path):
    def _write(payload: dict, name: str = "config.json") -> str:
        path = tmp_path / name
        path.write_text(json.dumps(payload))
        return str(path)

    return _write
