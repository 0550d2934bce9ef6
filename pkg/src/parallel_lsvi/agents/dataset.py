import json
import logging
import numpy as np

from typing import Iterator, Optional, Tuple

from ..envs import FeatureMap, SpecKind
from ..errors import DatasetError

logger = logging.getLogger(__name__)

HEADER_KEYS = {"K", "P", "H", "kind", "action_shape", "n_states", "initial_state", "features", "beta", "ridge", "spec_hash"}


class TrajectoryDataset:
    """Every (x, a[, b], r, x') visited, indexed by (episode k, agent p, step h).

    Indices are 0-based. Actions are stored as flattened joint indices
    j = a * |B| + b; records on disk carry `a` and, for games, `b`.
    """

    def __init__(
        self,
        episodes: int,
        agents: int,
        horizon: int,
        kind: SpecKind,
        action_shape: Tuple[int, ...],
        n_states: int,
        initial_state: int = 0,
        features: Optional[np.ndarray] = None,
        beta: Optional[float] = None,
        ridge: float = 1.0,
        spec_hash: Optional[str] = None,
    ):
        for name, value in (("K", episodes), ("P", agents), ("H", horizon), ("n_states", n_states)):
            if int(value) != value or value < 1:
                raise DatasetError(f"Invalid {name}={value}. Must be a positive integer.")
        self.episodes = int(episodes)
        self.agents = int(agents)
        self.horizon = int(horizon)
        self.kind = SpecKind(kind)
        self.action_shape = tuple(int(n) for n in action_shape)
        if len(self.action_shape) != (1 if self.kind == SpecKind.MDP else 2):
            raise DatasetError(f"action_shape {self.action_shape} does not fit kind {self.kind.value}")
        self.n_joint = int(np.prod(self.action_shape))
        self.n_states = int(n_states)
        self.initial_state = int(initial_state)
        self.features = None if features is None else np.array(features, dtype=np.float64)
        self.beta = None if beta is None else float(beta)
        self.ridge = float(ridge)
        self.spec_hash = spec_hash

        shape = (self.episodes, self.agents, self.horizon)
        self.states = np.zeros(shape, dtype=np.int64)
        self.actions = np.zeros(shape, dtype=np.int64)
        self.rewards = np.zeros(shape, dtype=np.float64)
        self.next_states = np.zeros(shape, dtype=np.int64)
        self.filled = np.zeros(shape, dtype=bool)

    @classmethod
    def for_spec(cls, spec, episodes: int, agents: int, beta: float, ridge: float) -> "TrajectoryDataset":
        return cls(
            episodes,
            agents,
            spec.horizon,
            spec.kind,
            spec.action_shape,
            spec.n_states,
            initial_state=spec.initial_state,
            features=spec.features,
            beta=beta,
            ridge=ridge,
            spec_hash=spec.hash(),
        )

    def record(self, k: int, p: int, h: int, x: int, j: int, r: float, x_next: int) -> None:
        if not (0 <= k < self.episodes and 0 <= p < self.agents and 0 <= h < self.horizon):
            raise DatasetError(f"record index {(k, p, h)} outside the {self.episodes}x{self.agents}x{self.horizon} grid")
        if self.filled[k, p, h]:
            raise DatasetError(f"duplicate record at {(k, p, h)}")
        if not (0 <= x < self.n_states and 0 <= x_next < self.n_states):
            raise DatasetError(f"state out of range at {(k, p, h)}: {x} -> {x_next}")
        if not 0 <= j < self.n_joint:
            raise DatasetError(f"action index {j} out of range at {(k, p, h)}")
        self.states[k, p, h] = x
        self.actions[k, p, h] = j
        self.rewards[k, p, h] = r
        self.next_states[k, p, h] = x_next
        self.filled[k, p, h] = True

    def is_complete(self) -> bool:
        return bool(self.filled.all())

    def check_complete(self) -> None:
        if not self.is_complete():
            missing = np.argwhere(~self.filled)
            raise DatasetError(f"dataset is incomplete: {len(missing)} missing records, first at {tuple(missing[0])}")

    def feature_map(self) -> FeatureMap:
        if self.features is None:
            raise DatasetError("dataset header carries no feature table")
        return FeatureMap(self.kind, self.horizon, self.features, self.initial_state)

    def transition_counts(self) -> np.ndarray:
        """N[h, x, j, x'] = number of recorded (x, j) -> x' transitions at step h."""
        counts = np.zeros((self.horizon, self.n_states, self.n_joint, self.n_states))
        steps = np.broadcast_to(np.arange(self.horizon), self.states.shape)
        mask = self.filled
        np.add.at(counts, (steps[mask], self.states[mask], self.actions[mask], self.next_states[mask]), 1.0)
        return counts

    def header(self) -> dict:
        return {
            "K": self.episodes,
            "P": self.agents,
            "H": self.horizon,
            "kind": self.kind.value,
            "action_shape": list(self.action_shape),
            "n_states": self.n_states,
            "initial_state": self.initial_state,
            "features": None if self.features is None else self.features.tolist(),
            "beta": self.beta,
            "ridge": self.ridge,
            "spec_hash": self.spec_hash,
        }

    def records(self) -> Iterator[dict]:
        n_b = self.action_shape[1] if self.kind == SpecKind.MG else None
        for k, p, h in np.argwhere(self.filled):
            j = int(self.actions[k, p, h])
            item = {"k": int(k), "p": int(p), "h": int(h), "x": int(self.states[k, p, h])}
            if n_b is None:
                item["a"] = j
            else:
                item["a"], item["b"] = divmod(j, n_b)
            item["r"] = float(self.rewards[k, p, h])
            item["x_next"] = int(self.next_states[k, p, h])
            yield item

    def to_dict(self) -> dict:
        return {"header": self.header(), "records": list(self.records())}

    @classmethod
    def from_header(cls, header: dict) -> "TrajectoryDataset":
        missing = HEADER_KEYS - set(header)
        unknown = set(header) - HEADER_KEYS
        if missing or unknown:
            raise DatasetError(f"dataset header has missing keys {sorted(missing)} and unknown keys {sorted(unknown)}")
        try:
            return cls(
                header["K"],
                header["P"],
                header["H"],
                SpecKind(header["kind"]),
                tuple(header["action_shape"]),
                header["n_states"],
                initial_state=header["initial_state"],
                features=header["features"],
                beta=header["beta"],
                ridge=header["ridge"],
                spec_hash=header["spec_hash"],
            )
        except ValueError as e:
            raise DatasetError(f"invalid dataset header: {e}") from e

    def add_record(self, item: dict) -> None:
        try:
            j = int(item["a"])
            if self.kind == SpecKind.MG:
                a, b = j, int(item["b"])
                if not (0 <= a < self.action_shape[0] and 0 <= b < self.action_shape[1]):
                    raise DatasetError(f"joint action {(a, b)} out of range {self.action_shape}")
                j = a * self.action_shape[1] + b
            self.record(int(item["k"]), int(item["p"]), int(item["h"]), int(item["x"]), j, float(item["r"]), int(item["x_next"]))
        except KeyError as e:
            raise DatasetError(f"dataset record is missing field {e}") from e

    @classmethod
    def from_dict(cls, payload: dict) -> "TrajectoryDataset":
        if not isinstance(payload, dict) or "header" not in payload or "records" not in payload:
            raise DatasetError("dataset document needs 'header' and 'records'")
        dataset = cls.from_header(payload["header"])
        for item in payload["records"]:
            dataset.add_record(item)
        return dataset

    def save(self, path: str, ndjson: bool = False) -> None:
        with open(path, "w") as f:
            if ndjson:
                f.write(json.dumps(self.header()) + "\n")
                for item in self.records():
                    f.write(json.dumps(item) + "\n")
            else:
                json.dump(self.to_dict(), f)

    @classmethod
    def load(cls, path: str) -> "TrajectoryDataset":
        with open(path, "r") as f:
            text = f.read()
        try:
            payload = json.loads(text)
        except json.JSONDecodeError:
            payload = None
        if isinstance(payload, dict) and "records" in payload:
            return cls.from_dict(payload)

        lines = [line for line in text.splitlines() if line.strip()]
        if not lines:
            raise DatasetError(f"{path} is empty")
        dataset = cls.from_header(json.loads(lines[0]))
        for line in lines[1:]:
            dataset.add_record(json.loads(line))
        logger.debug(f"loaded {len(lines) - 1} NDJSON records from {path}")
        return dataset

    def __str__(self) -> str:
        return (
            f"TrajectoryDataset(kind={self.kind.value}, K={self.episodes}, P={self.agents}, H={self.horizon}, "
            f"records={int(self.filled.sum())}/{self.filled.size})"
        )
