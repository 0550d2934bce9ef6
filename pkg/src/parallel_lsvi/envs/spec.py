import logging
import numpy as np

from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

from ..errors import ParameterError
from ..utils import ExplicitEnum, content_hash

logger = logging.getLogger(__name__)

FEATURE_NORM_TOL = 1e-9
KERNEL_NEGATIVE_TOL = 1e-10
KERNEL_SUM_TOL = 1e-8
REWARD_TOL = 1e-9
MEASURE_NORM_TOL = 1e-9


class SpecKind(ExplicitEnum):
    MDP = "mdp"
    MG = "mg"


class LinearSpec:
    """Finite linear MDP/MG: P_h(x'|x,j) = <φ(x,j), μ_h(x')>, r_h(x,j) = <φ(x,j), θ_h>.

    `features` has shape (|S|,) + action_shape + (d,), `measures` (H, |S|, d) and
    `theta` (H, d). Steps are indexed 0..H-1. Joint actions of a game are
    flattened as j = a * |B| + b and every `joint_*` array uses that index.
    """

    kind: SpecKind

    def __init__(
        self,
        n_states: int,
        action_shape: Tuple[int, ...],
        horizon: int,
        dim: int,
        features: np.ndarray,
        measures: np.ndarray,
        theta: np.ndarray,
        initial_state: int = 0,
    ):
        for name, value in (("n_states", n_states), ("horizon", horizon), ("dim", dim)):
            if int(value) != value or value < 1:
                raise ParameterError(f"Invalid {name}={value}. Must be a positive integer.")
        if any(int(n) != n or n < 1 for n in action_shape):
            raise ParameterError(f"Invalid action counts {action_shape}. Must be positive integers.")

        self.n_states = int(n_states)
        self.action_shape = tuple(int(n) for n in action_shape)
        self.horizon = int(horizon)
        self.dim = int(dim)
        self.n_joint = int(np.prod(self.action_shape))

        self.features = _as_array(features, (self.n_states,) + self.action_shape + (self.dim,), "features")
        self.measures = _as_array(measures, (self.horizon, self.n_states, self.dim), "measures")
        self.theta = _as_array(theta, (self.horizon, self.dim), "theta")

        if not 0 <= initial_state < self.n_states:
            raise ParameterError(f"Invalid initial_state={initial_state}. Must lie in [0, {self.n_states}).")
        self.initial_state = int(initial_state)

        self.joint_features = self.features.reshape(self.n_states, self.n_joint, self.dim)
        self.joint_kernel = np.einsum("xjd,hyd->hxjy", self.joint_features, self.measures)
        self.joint_rewards = np.einsum("xjd,hd->hxj", self.joint_features, self.theta)
        self.sampling_kernel = _sampling_kernel(self.joint_kernel)

        for array in (self.joint_features, self.joint_kernel, self.joint_rewards, self.sampling_kernel):
            array.setflags(write=False)

    @property
    def kernel(self) -> np.ndarray:
        return self.joint_kernel.reshape((self.horizon, self.n_states) + self.action_shape + (self.n_states,))

    @property
    def rewards(self) -> np.ndarray:
        return self.joint_rewards.reshape((self.horizon, self.n_states) + self.action_shape)

    def joint_index(self, a: int, b: Optional[int] = None) -> int:
        raise NotImplementedError

    def split_joint(self, j: int) -> Tuple[int, ...]:
        return tuple(int(i) for i in np.unravel_index(j, self.action_shape))

    def reward_function(self) -> "RewardFunction":
        return RewardFunction.from_table(self, self.rewards)

    def feature_map(self) -> "FeatureMap":
        return FeatureMap(self.kind, self.horizon, self.features, self.initial_state)

    def to_dict(self) -> dict:
        raise NotImplementedError

    def hash(self) -> str:
        return content_hash(self.to_dict())

    def __str__(self) -> str:
        return (
            f"{self.__class__.__name__}(|S|={self.n_states}, actions={self.action_shape}, "
            f"H={self.horizon}, d={self.dim}, s0={self.initial_state})"
        )


class LinearMdpSpec(LinearSpec):
    kind = SpecKind.MDP

    def __init__(self, n_states, n_actions, horizon, dim, features, measures, theta, initial_state=0):
        super().__init__(n_states, (n_actions,), horizon, dim, features, measures, theta, initial_state)
        self.n_actions = int(n_actions)

    def joint_index(self, a: int, b: Optional[int] = None) -> int:
        if b is not None:
            raise ParameterError("an MDP takes a single action")
        if not 0 <= a < self.n_actions:
            raise ParameterError(f"Invalid action {a}. Must lie in [0, {self.n_actions}).")
        return int(a)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "n_states": self.n_states,
            "n_actions": self.n_actions,
            "horizon": self.horizon,
            "dim": self.dim,
            "initial_state": self.initial_state,
            "features": self.features.tolist(),
            "measures": self.measures.tolist(),
            "theta": self.theta.tolist(),
        }


class LinearMgSpec(LinearSpec):
    kind = SpecKind.MG

    def __init__(
        self, n_states, n_actions_p1, n_actions_p2, horizon, dim, features, measures, theta, initial_state=0
    ):
        super().__init__(n_states, (n_actions_p1, n_actions_p2), horizon, dim, features, measures, theta, initial_state)
        self.n_actions_p1 = int(n_actions_p1)
        self.n_actions_p2 = int(n_actions_p2)

    def joint_index(self, a: int, b: Optional[int] = None) -> int:
        if b is None:
            raise ParameterError("a Markov game step needs an action for each player")
        if not (0 <= a < self.n_actions_p1 and 0 <= b < self.n_actions_p2):
            raise ParameterError(
                f"Invalid joint action ({a}, {b}). Must lie in [0, {self.n_actions_p1}) x [0, {self.n_actions_p2})."
            )
        return int(a) * self.n_actions_p2 + int(b)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "n_states": self.n_states,
            "n_actions_p1": self.n_actions_p1,
            "n_actions_p2": self.n_actions_p2,
            "horizon": self.horizon,
            "dim": self.dim,
            "initial_state": self.initial_state,
            "features": self.features.tolist(),
            "measures": self.measures.tolist(),
            "theta": self.theta.tolist(),
        }


AnySpec = Union[LinearMdpSpec, LinearMgSpec]


class FeatureMap:
    """The known part of a linear model: φ and the shapes, without μ or θ.

    Planning receives only this and a dataset, so it cannot query the kernel.
    """

    def __init__(self, kind: SpecKind, horizon: int, features, initial_state: int = 0):
        self.kind = SpecKind(kind)
        self.features = np.array(features, dtype=np.float64)
        action_dims = 1 if self.kind == SpecKind.MDP else 2
        if self.features.ndim != 2 + action_dims:
            raise ParameterError(
                f"{self.kind.value} features need {2 + action_dims} axes, got shape {self.features.shape}"
            )
        self.horizon = int(horizon)
        self.n_states = self.features.shape[0]
        self.action_shape = tuple(self.features.shape[1:-1])
        self.n_joint = int(np.prod(self.action_shape))
        self.dim = self.features.shape[-1]
        self.initial_state = int(initial_state)
        self.joint_features = self.features.reshape(self.n_states, self.n_joint, self.dim)
        self.features.setflags(write=False)

    def split_joint(self, j: int) -> Tuple[int, ...]:
        return tuple(int(i) for i in np.unravel_index(j, self.action_shape))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "horizon": self.horizon,
            "initial_state": self.initial_state,
            "features": self.features.tolist(),
        }


def _as_array(value, shape: Tuple[int, ...], name: str) -> np.ndarray:
    array = np.array(value, dtype=np.float64)
    if array.shape != shape:
        raise ParameterError(f"{name} has shape {array.shape}, expected {shape}")
    return array


def _sampling_kernel(kernel: np.ndarray) -> np.ndarray:
    cleaned = np.where(kernel < 0.0, 0.0, kernel)
    sums = cleaned.sum(axis=-1, keepdims=True)
    if np.any(sums <= 0.0):
        # only reachable for invalid specs; validate() reports them
        cleaned = np.where(sums <= 0.0, 1.0 / kernel.shape[-1], cleaned)
        sums = cleaned.sum(axis=-1, keepdims=True)
    if np.max(np.abs(sums - 1.0)) > 1e-12:
        logger.debug(f"renormalising kernel rows, max deviation {np.max(np.abs(sums - 1.0)):.3e}")
    return cleaned / sums


class RewardFunction:
    """Per-step reward table in [0, 1] over (x, a) or (x, a, b)."""

    def __init__(self, table: np.ndarray, kind: SpecKind):
        table = np.array(table, dtype=np.float64)
        if not np.all(np.isfinite(table)):
            raise ParameterError("reward table contains non-finite values")
        if table.min(initial=0.0) < -REWARD_TOL or table.max(initial=0.0) > 1.0 + REWARD_TOL:
            raise ParameterError(
                f"reward values span [{table.min():.6g}, {table.max():.6g}]. Must lie in [0, 1]."
            )
        self.table = np.clip(table, 0.0, 1.0)
        self.table.setflags(write=False)
        self.kind = SpecKind(kind)

    @classmethod
    def from_table(cls, spec: LinearSpec, table) -> "RewardFunction":
        table = np.asarray(table, dtype=np.float64)
        expected = (spec.horizon, spec.n_states) + spec.action_shape
        if table.shape == (spec.horizon, spec.n_states, spec.n_joint):
            table = table.reshape(expected)
        if table.shape != expected:
            raise ParameterError(f"reward table has shape {table.shape}, expected {expected}")
        return cls(table, spec.kind)

    @classmethod
    def from_theta(cls, spec: LinearSpec, theta) -> "RewardFunction":
        theta = _as_array(theta, (spec.horizon, spec.dim), "theta")
        table = np.einsum("xjd,hd->hxj", spec.joint_features, theta)
        return cls.from_table(spec, table)

    @classmethod
    def zero(cls, spec: LinearSpec) -> "RewardFunction":
        return cls.from_table(spec, np.zeros((spec.horizon, spec.n_states, spec.n_joint)))

    @classmethod
    def constant(cls, spec: LinearSpec, value: float = 1.0) -> "RewardFunction":
        return cls.from_table(spec, np.full((spec.horizon, spec.n_states, spec.n_joint), float(value)))

    @classmethod
    def single_goal(cls, spec: LinearSpec, goal_state: int) -> "RewardFunction":
        if not 0 <= goal_state < spec.n_states:
            raise ParameterError(f"Invalid goal_state={goal_state}. Must lie in [0, {spec.n_states}).")
        table = np.zeros((spec.horizon, spec.n_states, spec.n_joint))
        table[:, goal_state, :] = 1.0
        return cls.from_table(spec, table)

    @classmethod
    def random_linear(cls, spec: LinearSpec, seed: int) -> "RewardFunction":
        rng = np.random.default_rng(seed)
        theta = rng.uniform(0.0, 1.0, size=(spec.horizon, spec.dim))
        table = np.einsum("xjd,hd->hxj", spec.joint_features, theta)
        return cls.from_table(spec, np.clip(table, 0.0, 1.0))

    @property
    def horizon(self) -> int:
        return self.table.shape[0]

    @property
    def joint_table(self) -> np.ndarray:
        return self.table.reshape(self.table.shape[0], self.table.shape[1], -1)

    def __add__(self, other: "RewardFunction") -> "RewardFunction":
        return RewardFunction(self.table + other.table, self.kind)

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "horizon": self.horizon, "table": self.table.tolist()}


@dataclass(frozen=True)
class Violation:
    code: str
    index: Tuple[int, ...]
    value: float
    message: str


def validate(spec: LinearSpec) -> List[Violation]:
    """Report every structural constraint of the linear model that `spec` violates."""
    violations: List[Violation] = []

    if spec.horizon < 2:
        violations.append(Violation("horizon", (), float(spec.horizon), "horizon must be at least 2"))
    if spec.dim < 2:
        violations.append(Violation("dim", (), float(spec.dim), "feature dimension must be at least 2"))

    norms = np.linalg.norm(spec.joint_features, axis=-1)
    for x, j in zip(*np.nonzero(norms > 1.0 + FEATURE_NORM_TOL)):
        index = (int(x),) + spec.split_joint(int(j))
        violations.append(
            Violation("feature_bound", index, float(norms[x, j]), f"||phi{index}|| = {norms[x, j]:.6g} > 1")
        )

    kernel = spec.joint_kernel
    for h, x, j, y in zip(*np.nonzero(kernel < -KERNEL_NEGATIVE_TOL)):
        index = (int(h), int(x)) + spec.split_joint(int(j)) + (int(y),)
        violations.append(
            Violation("kernel_negative", index, float(kernel[h, x, j, y]), f"P{index} = {kernel[h, x, j, y]:.6g} < 0")
        )

    row_sums = kernel.sum(axis=-1)
    for h, x, j in zip(*np.nonzero(np.abs(row_sums - 1.0) > KERNEL_SUM_TOL)):
        index = (int(h), int(x)) + spec.split_joint(int(j))
        violations.append(
            Violation(
                "kernel_normalization", index, float(row_sums[h, x, j]),
                f"kernel row {index} sums to {row_sums[h, x, j]:.10g}, not 1",
            )
        )

    rewards = spec.joint_rewards
    bad = (rewards < -REWARD_TOL) | (rewards > 1.0 + REWARD_TOL)
    for h, x, j in zip(*np.nonzero(bad)):
        index = (int(h), int(x)) + spec.split_joint(int(j))
        violations.append(
            Violation("reward_range", index, float(rewards[h, x, j]), f"r{index} = {rewards[h, x, j]:.6g} not in [0, 1]")
        )

    limit = np.sqrt(spec.dim)
    for h in range(spec.horizon):
        mass = np.linalg.norm(np.abs(spec.measures[h]).sum(axis=0))
        if mass > limit + MEASURE_NORM_TOL:
            violations.append(Violation("measure_norm", (h,), float(mass), f"||mu_{h}(S)|| = {mass:.6g} > sqrt(d)"))
        theta_norm = np.linalg.norm(spec.theta[h])
        if theta_norm > limit + MEASURE_NORM_TOL:
            violations.append(
                Violation("theta_norm", (h,), float(theta_norm), f"||theta_{h}|| = {theta_norm:.6g} > sqrt(d)")
            )

    return violations


def sample_transition(
    spec: LinearSpec,
    x: int,
    a: int,
    h: int,
    rng: np.random.Generator,
    b: Optional[int] = None,
) -> Tuple[int, float]:
    """Draw x' ~ P_h(.|x, a[, b]) and return it with the deterministic reward r_h(x, a[, b])."""
    if not 0 <= x < spec.n_states:
        raise ParameterError(f"Invalid state {x}. Must lie in [0, {spec.n_states}).")
    if not 0 <= h < spec.horizon:
        raise ParameterError(f"Invalid step {h}. Must lie in [0, {spec.horizon}).")
    j = spec.joint_index(a, b)
    next_state = int(rng.choice(spec.n_states, p=spec.sampling_kernel[h, x, j]))
    return next_state, float(spec.joint_rewards[h, x, j])
