import logging
import numpy as np

from typing import Tuple

from .spec import LinearMdpSpec, LinearMgSpec, validate
from ..errors import GenerationError

logger = logging.getLogger(__name__)

FEATURE_CONCENTRATION = 0.5
KERNEL_CONCENTRATION = 0.3


def _check_sizes(n_states: int, n_pairs: int, horizon: int, dim: int) -> None:
    if n_states < 1 or n_pairs < 1:
        raise GenerationError(f"state and action counts must be positive, got |S|={n_states}, pairs={n_pairs}")
    if horizon < 2:
        raise GenerationError(f"Invalid horizon={horizon}. Must be >= 2.")
    if dim < 2:
        raise GenerationError(f"Invalid dim={dim}. Must be >= 2.")
    if dim > n_states * n_pairs:
        raise GenerationError(
            f"dim={dim} exceeds the {n_states * n_pairs} state-action pairs available as anchors. "
            f"Must be <= |S| x |actions|."
        )


def _simplex_model(
    n_states: int, n_pairs: int, horizon: int, dim: int, rng: np.random.Generator
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Features on the probability simplex, one next-state distribution per latent coordinate.

    The first `dim` pairs are anchors with φ = e_i. Because every φ sums to one and
    every μ_h^{(i)} is a distribution, each kernel row is a distribution exactly.
    """
    n_rows = n_states * n_pairs
    features = np.zeros((n_rows, dim))
    features[:dim] = np.eye(dim)
    if n_rows > dim:
        features[dim:] = rng.dirichlet(np.full(dim, FEATURE_CONCENTRATION), size=n_rows - dim)

    measures = np.empty((horizon, n_states, dim))
    for h in range(horizon):
        # latent i moves to x' with probability measures[h, x', i]
        measures[h] = rng.dirichlet(np.full(n_states, KERNEL_CONCENTRATION), size=dim).T

    theta = rng.uniform(0.0, 1.0, size=(horizon, dim))
    return features, measures, theta


def _finish(spec, label: str):
    violations = validate(spec)
    if violations:
        raise GenerationError(f"generated {label} violates {len(violations)} constraints, first: {violations[0].message}")
    logger.debug(f"generated {spec}")
    return spec


def generate_random_mdp(n_states: int, n_actions: int, horizon: int, dim: int, seed: int) -> LinearMdpSpec:
    """Random linear MDP; dim == n_states * n_actions yields the one-hot tabular embedding."""
    _check_sizes(n_states, n_actions, horizon, dim)
    rng = np.random.default_rng(seed)
    features, measures, theta = _simplex_model(n_states, n_actions, horizon, dim, rng)
    spec = LinearMdpSpec(
        n_states=n_states,
        n_actions=n_actions,
        horizon=horizon,
        dim=dim,
        features=features.reshape(n_states, n_actions, dim),
        measures=measures,
        theta=theta,
    )
    return _finish(spec, "MDP")


def generate_random_mg(
    n_states: int, n_actions_p1: int, n_actions_p2: int, horizon: int, dim: int, seed: int
) -> LinearMgSpec:
    _check_sizes(n_states, n_actions_p1 * n_actions_p2, horizon, dim)
    rng = np.random.default_rng(seed)
    features, measures, theta = _simplex_model(n_states, n_actions_p1 * n_actions_p2, horizon, dim, rng)
    spec = LinearMgSpec(
        n_states=n_states,
        n_actions_p1=n_actions_p1,
        n_actions_p2=n_actions_p2,
        horizon=horizon,
        dim=dim,
        features=features.reshape(n_states, n_actions_p1, n_actions_p2, dim),
        measures=measures,
        theta=theta,
    )
    return _finish(spec, "MG")


def _one_hot_model(transitions: np.ndarray, rewards: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    horizon, n_states = transitions.shape[0], transitions.shape[1]
    n_rows = int(np.prod(transitions.shape[1:-1]))
    if transitions.shape[-1] != n_states:
        raise GenerationError(f"transition table has {transitions.shape[-1]} next states, expected {n_states}")
    if rewards.shape != transitions.shape[:-1]:
        raise GenerationError(f"reward table has shape {rewards.shape}, expected {transitions.shape[:-1]}")

    flat = transitions.reshape(horizon, n_rows, n_states)
    if np.any(flat < 0.0) or np.max(np.abs(flat.sum(axis=-1) - 1.0)) > 1e-12:
        raise GenerationError("transition rows must be probability distributions")
    if np.any(rewards < 0.0) or np.any(rewards > 1.0):
        raise GenerationError("tabular rewards must lie in [0, 1]")

    features = np.eye(n_rows)
    # μ_h(x')[(x, a)] = P_h(x' | x, a)
    measures = np.transpose(flat, (0, 2, 1)).copy()
    theta = rewards.reshape(horizon, n_rows).copy()
    return features, measures, theta


def tabular_mdp(transitions, rewards, initial_state: int = 0) -> LinearMdpSpec:
    """One-hot embedding of a tabular MDP; `transitions` is (H, S, A, S), `rewards` (H, S, A)."""
    transitions = np.asarray(transitions, dtype=np.float64)
    rewards = np.asarray(rewards, dtype=np.float64)
    if transitions.ndim != 4:
        raise GenerationError(f"transition table must be (H, S, A, S), got shape {transitions.shape}")
    horizon, n_states, n_actions = transitions.shape[:3]
    features, measures, theta = _one_hot_model(transitions, rewards)
    spec = LinearMdpSpec(
        n_states=n_states,
        n_actions=n_actions,
        horizon=horizon,
        dim=n_states * n_actions,
        features=features.reshape(n_states, n_actions, -1),
        measures=measures,
        theta=theta,
        initial_state=initial_state,
    )
    if horizon < 2:
        return spec
    return _finish(spec, "tabular MDP")


def tabular_mg(transitions, rewards, initial_state: int = 0) -> LinearMgSpec:
    """One-hot embedding of a tabular game; `transitions` is (H, S, A, B, S), `rewards` (H, S, A, B)."""
    transitions = np.asarray(transitions, dtype=np.float64)
    rewards = np.asarray(rewards, dtype=np.float64)
    if transitions.ndim != 5:
        raise GenerationError(f"transition table must be (H, S, A, B, S), got shape {transitions.shape}")
    horizon, n_states, n_a, n_b = transitions.shape[:4]
    features, measures, theta = _one_hot_model(transitions, rewards)
    spec = LinearMgSpec(
        n_states=n_states,
        n_actions_p1=n_a,
        n_actions_p2=n_b,
        horizon=horizon,
        dim=n_states * n_a * n_b,
        features=features.reshape(n_states, n_a, n_b, -1),
        measures=measures,
        theta=theta,
        initial_state=initial_state,
    )
    if horizon < 2:
        return spec
    return _finish(spec, "tabular MG")
