import json
import numpy as np

from typing import Union

from .spec import FeatureMap, LinearMdpSpec, LinearMgSpec, LinearSpec, RewardFunction, SpecKind
from ..errors import ParameterError

MDP_KEYS = {"kind", "n_states", "n_actions", "horizon", "dim", "initial_state", "features", "measures", "theta"}
MG_KEYS = {"kind", "n_states", "n_actions_p1", "n_actions_p2", "horizon", "dim", "initial_state", "features", "measures", "theta"}


def spec_from_dict(payload: dict) -> Union[LinearMdpSpec, LinearMgSpec]:
    if not isinstance(payload, dict) or "kind" not in payload:
        raise ParameterError("spec document must be a JSON object with a 'kind' field")
    try:
        kind = SpecKind(payload["kind"])
    except ValueError as e:
        raise ParameterError(str(e)) from e

    expected = MDP_KEYS if kind == SpecKind.MDP else MG_KEYS
    missing = expected - set(payload)
    unknown = set(payload) - expected
    if missing or unknown:
        raise ParameterError(f"spec document keys: missing {sorted(missing)}, unknown {sorted(unknown)}")

    common = dict(
        n_states=payload["n_states"],
        horizon=payload["horizon"],
        dim=payload["dim"],
        features=np.asarray(payload["features"], dtype=np.float64),
        measures=np.asarray(payload["measures"], dtype=np.float64),
        theta=np.asarray(payload["theta"], dtype=np.float64),
        initial_state=payload["initial_state"],
    )
    if kind == SpecKind.MDP:
        return LinearMdpSpec(n_actions=payload["n_actions"], **common)
    return LinearMgSpec(n_actions_p1=payload["n_actions_p1"], n_actions_p2=payload["n_actions_p2"], **common)


def load_spec(path: str) -> Union[LinearMdpSpec, LinearMgSpec]:
    with open(path, "r") as f:
        payload = json.load(f)
    return spec_from_dict(payload)


def save_spec(spec: LinearSpec, path: str) -> None:
    # json renders floats with repr(), the shortest round-trip decimal
    with open(path, "w") as f:
        json.dump(spec.to_dict(), f)


def reward_from_dict(spec: Union[LinearSpec, FeatureMap], payload: dict) -> RewardFunction:
    """Shapes come from `spec`; a FeatureMap is enough, so planning can read rewards without the kernel."""
    if not isinstance(payload, dict):
        raise ParameterError("reward document must be a JSON object")
    if "kind" in payload and payload["kind"] != spec.kind.value:
        raise ParameterError(f"reward is for a {payload['kind']} spec, got a {spec.kind.value} spec")
    if "table" in payload:
        return RewardFunction.from_table(spec, np.asarray(payload["table"], dtype=np.float64))
    if "theta" in payload:
        return RewardFunction.from_theta(spec, np.asarray(payload["theta"], dtype=np.float64))
    raise ParameterError("reward document needs a 'table' or a 'theta' field")


def load_reward(spec: Union[LinearSpec, FeatureMap], path: str) -> RewardFunction:
    with open(path, "r") as f:
        payload = json.load(f)
    return reward_from_dict(spec, payload)


def save_reward(reward: RewardFunction, path: str) -> None:
    with open(path, "w") as f:
        json.dump(reward.to_dict(), f)
