import json
import numpy as np

from dataclasses import dataclass
from typing import Optional, Union

from ..errors import ParameterError

DISTRIBUTION_TOL = 1e-9


def _check_distributions(table: np.ndarray, name: str) -> np.ndarray:
    table = np.array(table, dtype=np.float64)
    if table.ndim != 3:
        raise ParameterError(f"{name} must have shape (H, |S|, n_actions), got {table.shape}")
    if np.any(table < -DISTRIBUTION_TOL) or np.max(np.abs(table.sum(axis=-1) - 1.0)) > DISTRIBUTION_TOL:
        raise ParameterError(f"{name} rows must be probability distributions")
    table = np.clip(table, 0.0, None)
    table.setflags(write=False)
    return table


@dataclass(frozen=True)
class DeterministicPolicy:
    """actions[h, x] is the (joint) action index taken in state x at step h."""

    actions: np.ndarray
    n_actions: int

    def __post_init__(self):
        actions = np.array(self.actions, dtype=np.int64)
        if actions.ndim != 2:
            raise ParameterError(f"actions must have shape (H, |S|), got {actions.shape}")
        if actions.size and (actions.min() < 0 or actions.max() >= self.n_actions):
            raise ParameterError(f"action indices must lie in [0, {self.n_actions})")
        actions.setflags(write=False)
        object.__setattr__(self, "actions", actions)

    @property
    def horizon(self) -> int:
        return self.actions.shape[0]

    def __call__(self, h: int, x: int) -> int:
        return int(self.actions[h, x])

    def as_distribution(self) -> np.ndarray:
        return np.eye(self.n_actions)[self.actions]

    def to_dict(self) -> dict:
        return {"kind": "deterministic", "n_actions": self.n_actions, "actions": self.actions.tolist()}


@dataclass(frozen=True)
class MixedPolicyPair:
    """pi[h, x] in Δ(A) for Player 1 (max), nu[h, x] in Δ(B) for Player 2 (min)."""

    pi: np.ndarray
    nu: np.ndarray

    def __post_init__(self):
        pi = _check_distributions(self.pi, "pi")
        nu = _check_distributions(self.nu, "nu")
        if pi.shape[:2] != nu.shape[:2]:
            raise ParameterError(f"pi covers {pi.shape[:2]} (H, |S|) but nu covers {nu.shape[:2]}")
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "nu", nu)

    @classmethod
    def uniform(cls, horizon: int, n_states: int, n_a: int, n_b: int) -> "MixedPolicyPair":
        return cls(np.full((horizon, n_states, n_a), 1.0 / n_a), np.full((horizon, n_states, n_b), 1.0 / n_b))

    @classmethod
    def random(cls, horizon: int, n_states: int, n_a: int, n_b: int, rng: np.random.Generator) -> "MixedPolicyPair":
        return cls(
            rng.dirichlet(np.ones(n_a), size=(horizon, n_states)),
            rng.dirichlet(np.ones(n_b), size=(horizon, n_states)),
        )

    def to_dict(self) -> dict:
        return {"kind": "mixed", "pi": self.pi.tolist(), "nu": self.nu.tolist()}


@dataclass(frozen=True)
class ValueTable:
    """values[h, x] = V_h(x) for h in 0..H (values[H] == 0); q[h, x, ...] = Q_h(x, ...)."""

    values: np.ndarray
    q: Optional[np.ndarray] = None

    @property
    def horizon(self) -> int:
        return self.values.shape[0] - 1

    def at(self, x: int, h: int = 0) -> float:
        return float(self.values[h, x])


AnyPolicy = Union[DeterministicPolicy, MixedPolicyPair]


def policy_from_dict(payload: dict) -> AnyPolicy:
    try:
        return _policy_from_dict(payload)
    except KeyError as e:
        raise ParameterError(f"policy document is missing field {e}") from e


def _policy_from_dict(payload: dict) -> AnyPolicy:
    kind = payload.get("kind") if isinstance(payload, dict) else None
    if kind == "deterministic":
        actions = np.asarray(payload["actions"], dtype=np.int64)
        n_actions = int(payload.get("n_actions", actions.max(initial=0) + 1))
        return DeterministicPolicy(actions, n_actions)
    if kind == "mixed":
        return MixedPolicyPair(np.asarray(payload["pi"]), np.asarray(payload["nu"]))
    raise ParameterError(f"policy document kind must be 'deterministic' or 'mixed', got {kind!r}")


def load_policy(path: str) -> AnyPolicy:
    with open(path, "r") as f:
        return policy_from_dict(json.load(f))


def save_policy(policy: AnyPolicy, path: str) -> None:
    with open(path, "w") as f:
        json.dump(policy.to_dict(), f)
